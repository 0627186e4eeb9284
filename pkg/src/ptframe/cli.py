"""Command-line front-end: sweeps, EP search, decomposition checks and figure data.

Exit codes: 0 success, 2 configuration error, 3 singular parameter point,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .algebra import annihilation, number
from .errors import NumericalError, ParameterError, PTFrameError, SingularPointError
from .frames import SUM_TOL, check_decomposition, ef_drift, eigenvalue_sum_check
from .models import (H1Params, H2Params, H3Params, build, frame_check_masks,
                     random_state, with_param)
from .spectra import COALESCENCE_TOL, GAP_TOL, detect_eps, sweep

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_SINGULAR, EXIT_NUMERICAL = 0, 2, 3, 4

MODEL_FIELDS = ("omega", "gamma_e", "g", "gamma_a", "gamma_b", "kappa", "gamma",
                "epsilon", "n_max")
CONFIG_KEYS = {"model", "frame", "param", "range", "out", "format", "gap_tol",
               "coalescence_tol", "h0", "seed", *MODEL_FIELDS}
DEFAULT_PARAM = {"h1": "gamma_e", "h2": "kappa", "h3": "kappa"}
CHECK_TIMES = (0.5, 1.0, 2.0)
DRIFT_TOL = 1e-9
GAP_LIMIT = 1e-8

#: figure defaults; entries under "unprinted" are not fixed by the figures
#: themselves and are stamped into the metadata as assumptions
FIGURES = {
    1: dict(model="h1", param="gamma_e", range=(0.0, 4.0, 401),
            values=dict(omega=1.0), unprinted={}),
    2: dict(model="h2", param="kappa", range=(0.0, 2.0, 401),
            values=dict(g=1.0, n_max=4), unprinted=dict(gamma=0.3)),
    # stops short of kappa = g, where the drive shifts diverge
    3: dict(model="h3", param="kappa", range=(0.0, 0.999, 401),
            values=dict(g=1.0, n_max=12), unprinted=dict(gamma=0.1, epsilon=0.1)),
}


class ConfigError(PTFrameError, ValueError):
    """The run configuration is invalid or incomplete."""


@dataclass
class RunConfig:
    model: str | None = None
    frame: str = "if"
    param: str | None = None
    range: tuple[float, float, int] | None = None
    values: dict = field(default_factory=dict)
    out: str | None = None
    format: str = "csv"
    gap_tol: float = GAP_TOL
    coalescence_tol: float = COALESCENCE_TOL
    h0: str = "model"
    seed: int = 0

    @property
    def frames(self) -> tuple[str, ...]:
        return ("IF", "EF") if self.frame == "both" else (self.frame.upper(),)

    def grid(self) -> np.ndarray:
        start, stop, count = self.range
        return np.linspace(start, stop, count)


def parse_range(text) -> tuple[float, float, int]:
    if isinstance(text, (list, tuple)):
        parts = list(text)
    else:
        parts = str(text).split(":")
    if len(parts) != 3:
        raise ConfigError(f"range must be start:stop:count, got {text!r}")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except (TypeError, ValueError):
        raise ConfigError(f"range must be start:stop:count, got {text!r}") from None
    if count < 2:
        raise ConfigError("range count must be >= 2")
    if not start < stop:
        raise ConfigError(f"range needs start < stop, got {start:g}:{stop:g}")
    return start, stop, count


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    data = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return data


def make_config(args: argparse.Namespace, base: dict | None = None) -> RunConfig:
    """Merge figure defaults, the config file and flags (flags win)."""
    merged = dict(base or {})
    if getattr(args, "config", None):
        merged.update(_load_config(args.config))
    for key in CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val

    cfg = RunConfig()
    model = merged.get("model")
    if model is not None and model not in DEFAULT_PARAM:
        raise ConfigError(f"model must be h1, h2 or h3, got {model!r}")
    cfg.model = model
    frame = str(merged.get("frame", "if")).lower()
    if frame not in ("if", "ef", "both"):
        raise ConfigError(f"frame must be if, ef or both, got {frame!r}")
    cfg.frame = frame
    fmt = str(merged.get("format", "csv")).lower()
    if fmt not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {fmt!r}")
    cfg.format = fmt
    cfg.param = merged.get("param") or (DEFAULT_PARAM.get(model) if model else None)
    if merged.get("range") is not None:
        cfg.range = parse_range(merged["range"])
    cfg.out = merged.get("out")
    cfg.h0 = merged.get("h0", "model")
    if cfg.h0 not in ("model", "number-a"):
        raise ConfigError(f"h0 must be 'model' or 'number-a', got {cfg.h0!r}")
    try:
        cfg.gap_tol = float(merged.get("gap_tol", GAP_TOL))
        cfg.coalescence_tol = float(merged.get("coalescence_tol", COALESCENCE_TOL))
        cfg.seed = int(merged.get("seed", 0))
        for key in MODEL_FIELDS:
            if merged.get(key) is not None:
                cfg.values[key] = int(merged[key]) if key == "n_max" else float(merged[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad numeric value: {exc}") from None
    return cfg


def _require(values: dict, names, model: str):
    missing = [n for n in names if n not in values]
    if missing:
        raise ConfigError(f"{model} needs {', '.join('--' + m.replace('_', '-') for m in missing)}")


def model_params(cfg: RunConfig, at: float | None = None):
    """Parameter object for ``cfg``; the swept parameter takes the value ``at``."""
    if cfg.model is None:
        raise ConfigError("no model given (--model h1|h2|h3)")
    values = dict(cfg.values)
    if at is not None and cfg.param is not None:
        values[cfg.param] = at
    if cfg.model == "h1":
        extra = set(values) - {"omega", "gamma_e"}
        if extra:
            raise ConfigError(f"h1 takes no {', '.join(sorted(extra))}")
        _require(values, ("omega", "gamma_e"), "h1")
        return H1Params(omega=values["omega"], gamma_e=values["gamma_e"])

    allowed = {"g", "gamma_a", "gamma_b", "kappa", "gamma", "n_max"}
    if cfg.model == "h3":
        allowed.add("epsilon")
    extra = set(values) - allowed
    if extra:
        raise ConfigError(f"{cfg.model} takes no {', '.join(sorted(extra))}")
    _require(values, ("g",), cfg.model)
    bare = {"gamma_a", "gamma_b"} & set(values)
    mixed = {"kappa", "gamma"} & set(values)
    if bare and mixed:
        raise ConfigError("give either gamma_a/gamma_b or kappa/gamma, not both")
    if mixed:
        _require(values, ("kappa", "gamma"), cfg.model)
        ga, gb = values["gamma"] + values["kappa"], values["gamma"] - values["kappa"]
    else:
        _require(values, ("gamma_a", "gamma_b"), cfg.model)
        ga, gb = values["gamma_a"], values["gamma_b"]
    kw = dict(g=values["g"], gamma_a=ga, gamma_b=gb)
    if "n_max" in values:
        kw["n_max"] = values["n_max"]
    if cfg.model == "h2":
        return H2Params(**kw)
    _require(values, ("epsilon",), "h3")
    return H3Params(epsilon=values["epsilon"], **kw)


def _check_sweep_config(cfg: RunConfig):
    if cfg.range is None:
        raise ConfigError("sweep needs --range start:stop:count")
    p = model_params(cfg, cfg.range[0])
    try:
        with_param(p, cfg.param, cfg.range[0])
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None
    return p


# -- serialization ----------------------------------------------------------

def _num(x: float) -> str:
    return f"{float(x):.17g}"


def _column_order(s) -> np.ndarray:
    E = s.branches[:, 0]
    return np.lexsort((E.imag, E.real))


def _group_record(s, grp) -> dict:
    rec = dict(labels=list(grp.labels), branch_ids=list(grp.branch_ids), order=grp.order,
               eigenvalue=[grp.eigenvalue.real, grp.eigenvalue.imag],
               eigenvalue_gap=grp.eigenvalue_gap, gap_threshold=grp.gap_threshold,
               vector_coalescence=grp.vector_coalescence,
               columns=[f"{s.frame}.{s.labels[b]}" for b in grp.branch_ids])
    if grp.expectations is not None:
        rec["number_expectation"] = list(grp.expectations)
    return rec


def ep_records(s, reports) -> list[dict]:
    return [dict(frame=r.frame, parameter=r.parameter_name, location=r.location,
                 refinement_width=r.refinement_width, metric=r.metric,
                 order=r.order_estimate, groups=[_group_record(s, g) for g in r.groups])
            for r in reports]


def _observable(p):
    if isinstance(p, H2Params) and not isinstance(p, H3Params):
        return number(p.layout)
    return None


def run_sweeps(cfg: RunConfig, detect: bool = True):
    """Sweep every requested frame; returns ``[(SweepResult, [EPReport])]``."""
    p = _check_sweep_config(cfg)
    grid = cfg.grid()
    out = []
    for frame in cfg.frames:
        s = sweep(p, cfg.param, grid, frame=frame)
        reports = detect_eps(s, gap_tol=cfg.gap_tol, coalescence_tol=cfg.coalescence_tol,
                             observable=_observable(p)) if detect else []
        out.append((s, reports))
    return out


def metadata(cfg: RunConfig, results, extra: dict | None = None) -> dict:
    p = model_params(cfg, cfg.range[0])
    params = dataclasses.asdict(p)
    params.pop(cfg.param, None)
    meta = dict(
        tool="ptframe", version=__version__, model=cfg.model, parameter=cfg.param,
        range=dict(start=cfg.range[0], stop=cfg.range[1], count=cfg.range[2]),
        frames=list(cfg.frames), parameters=params,
        thresholds=dict(gap_tol=cfg.gap_tol, coalescence_tol=cfg.coalescence_tol),
        columns=[f"{s.frame}.{s.labels[b]}" for s, _ in results for b in _column_order(s)],
        exceptional_points=[rec for s, r in results for rec in ep_records(s, r)],
    )
    if extra:
        meta.update(extra)
    return meta


def write_csv(results, fh):
    s0 = results[0][0]
    header = [s0.parameter_name]
    cols = []
    for s, _ in results:
        for b in _column_order(s):
            header += [f"{s.frame}.{s.labels[b]}.re", f"{s.frame}.{s.labels[b]}.im"]
            cols.append(s.branches[b])
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for k, x in enumerate(s0.grid):
        row = [_num(x)]
        for c in cols:
            row += [_num(c[k].real), _num(c[k].imag)]
        w.writerow(row)


def read_csv(fh) -> tuple[list[str], np.ndarray]:
    rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]])


def sweep_json(results, meta: dict) -> dict:
    branches = []
    for s, _ in results:
        for b in _column_order(s):
            branches.append(dict(frame=s.frame, label=s.labels[b],
                                 re=s.branches[b].real.tolist(), im=s.branches[b].imag.tolist()))
    return dict(metadata=meta, grid=results[0][0].grid.tolist(), branches=branches)


def emit(cfg: RunConfig, results, meta: dict, stdout):
    if cfg.format == "json":
        text = json.dumps(sweep_json(results, meta), indent=1, allow_nan=False)
        _write(cfg.out, text + "\n", stdout)
        return
    buf = io.StringIO()
    write_csv(results, buf)
    _write(cfg.out, buf.getvalue(), stdout)
    if cfg.out:
        side = Path(cfg.out).with_suffix(".meta.json")
        side.write_text(json.dumps(meta, indent=1, allow_nan=False) + "\n", encoding="utf-8")


def _write(path, text: str, stdout):
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        stdout.write(text)


# -- commands ---------------------------------------------------------------

def cmd_sweep(cfg: RunConfig, stdout=sys.stdout, extra_meta=None) -> int:
    results = run_sweeps(cfg)
    emit(cfg, results, metadata(cfg, results, extra_meta), stdout)
    return EXIT_OK


def cmd_ep_find(cfg: RunConfig, stdout=sys.stdout) -> int:
    results = run_sweeps(cfg)
    recs = [rec for s, r in results for rec in ep_records(s, r)]
    _write(cfg.out, json.dumps(dict(exceptional_points=recs), indent=1, allow_nan=False) + "\n",
           stdout)
    return EXIT_OK


def figure_config(n: int, args: argparse.Namespace) -> tuple[RunConfig, dict]:
    fig = FIGURES[n]
    base = dict(model=fig["model"], param=fig["param"], frame="both",
                range=fig["range"], **fig["values"])
    cfg = make_config(args, base)
    assumed = {}
    for key, val in fig["unprinted"].items():
        if key not in cfg.values:
            cfg.values[key] = val
            assumed[key] = val
    if cfg.model in ("h2", "h3") and "gamma" in assumed and not {"gamma_a", "gamma_b"} & set(cfg.values):
        cfg.values.setdefault("kappa", cfg.range[0])
    return cfg, dict(figure=n, assumed_defaults=assumed)


def cmd_figure(n: int, args, stdout=sys.stdout) -> int:
    cfg, extra = figure_config(n, args)
    return cmd_sweep(cfg, stdout, extra)


def _custom_split(cfg: RunConfig, p):
    """Decomposition with a user-chosen ``H0`` instead of the model's own."""
    d = build(p)
    if cfg.h0 == "model":
        return d
    if isinstance(p, H1Params):
        raise ConfigError("--h0 number-a needs a bosonic model")
    a = annihilation(p.layout, 0)
    H0 = -1j * p.gamma * (a.T @ a)
    return check_decomposition(d.H, d.H - H0, H0, d.parity, d.tol, d.interior)


def check_report(cfg: RunConfig) -> dict:
    p = model_params(cfg)
    d = _custom_split(cfg, p)
    support, measure = frame_check_masks(p)
    rng = np.random.default_rng(cfg.seed)
    states = [random_state(d.dim, rng, support) for _ in range(5)]
    drifts, gaps = {}, {}
    for t in CHECK_TIMES:
        drifts[str(t)] = ef_drift(d.H_pt, d.H0, t, mask=measure).drift
        gaps[str(t)] = max(ef_drift(d.H_pt, d.H0, t, psi0=v, mask=measure).evolution_gap
                           for v in states)
    sum_gap, sum_note = None, None
    if d.certified:
        try:
            terms = eigenvalue_sum_check(d)
            sum_gap = max((t.gap for t in terms), default=0.0)
        except NumericalError as exc:
            sum_note = str(exc)
    else:
        sum_note = "decomposition not certified"
    certified = bool(d.certified and max(drifts.values()) <= DRIFT_TOL
                     and max(gaps.values()) <= GAP_LIMIT
                     and sum_gap is not None and sum_gap <= GAP_LIMIT)
    report = dict(
        model=cfg.model, parameters=dataclasses.asdict(p), h0=cfg.h0,
        pt_residual=d.pt_residual, sum_residual=d.sum_residual,
        commutator_residual=d.commutator_residual, ef_drift=drifts,
        evolution_gap=gaps, eigenvalue_sum_max_gap=sum_gap,
        thresholds=dict(decomposition=d.tol, sum=SUM_TOL, drift=DRIFT_TOL, gap=GAP_LIMIT),
        hidden_pt_certified=certified, version=__version__,
    )
    if sum_note:
        report["eigenvalue_sum_note"] = sum_note
    return report


def cmd_check(cfg: RunConfig, stdout=sys.stdout) -> int:
    report = check_report(cfg)
    text = json.dumps(report, indent=1, default=_json_default)
    _write(cfg.out, text + "\n", stdout)
    return EXIT_OK


def _json_default(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"cannot serialize {type(x).__name__}")


# -- argument parsing -------------------------------------------------------

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--model", choices=("h1", "h2", "h3"))
    p.add_argument("--frame", choices=("if", "ef", "both"))
    p.add_argument("--param", help="swept parameter (default gamma_e for h1, kappa otherwise)")
    p.add_argument("--range", help="start:stop:count")
    for name in MODEL_FIELDS:
        p.add_argument("--" + name.replace("_", "-"), dest=name,
                       type=int if name == "n_max" else float)
    p.add_argument("--gap-tol", dest="gap_tol", type=float)
    p.add_argument("--coalescence-tol", dest="coalescence_tol", type=float)
    p.add_argument("--out", help="output path (stdout when omitted)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--config", help="JSON file with the same keys as the flags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ptframe", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    fig = sub.add_parser("figure", help="branch data of one of the three figures")
    fig.add_argument("number", type=int, choices=(1, 2, 3))
    _add_common(fig)
    sw = sub.add_parser("sweep", help="track eigenvalue branches over a parameter range")
    _add_common(sw)
    ep = sub.add_parser("ep-find", help="sweep and report exceptional points only")
    _add_common(ep)
    ck = sub.add_parser("check", help="hidden-PT diagnostics at one parameter point")
    _add_common(ck)
    ck.add_argument("--h0", choices=("model", "number-a"),
                    help="geometric part: the model's own, or -i gamma a^dag a")
    ck.add_argument("--seed", type=int)
    return parser


def main(argv=None, stdout=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "figure":
            return cmd_figure(args.number, args, stdout)
        cfg = make_config(args)
        if args.command == "sweep":
            return cmd_sweep(cfg, stdout)
        if args.command == "ep-find":
            return cmd_ep_find(cfg, stdout)
        return cmd_check(cfg, stdout)
    except SingularPointError as exc:
        print(f"error: spectral singularity: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
