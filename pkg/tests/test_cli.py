import io
import json

import numpy as np
import pytest

from ptframe import cli
from ptframe.errors import EigenSolverError


def run(*argv):
    out = io.StringIO()
    code = cli.main([str(a) for a in argv], stdout=out)
    return code, out.getvalue()


def _columns(path):
    with open(path, encoding="utf-8") as fh:
        return cli.read_csv(fh)


def test_figure1_ep_annotation(tmp_path):
    out = tmp_path / "fig1.csv"
    assert run("figure", 1, "--out", out)[0] == 0
    meta = json.loads(out.with_suffix(".meta.json").read_text())
    locs = {(e["frame"], round(e["location"], 6)) for e in meta["exceptional_points"]}
    assert locs == {("IF", 2.0), ("EF", 2.0)}
    header, data = _columns(out)
    assert header[0] == "gamma_e" and len(header) == 1 + 2 * 2 * 2
    assert data.shape == (401, len(header))


def test_figure2_branches_at_zero(tmp_path):
    out = tmp_path / "fig2.csv"
    assert run("figure", 2, "--out", out)[0] == 0
    header, data = _columns(out)
    row = dict(zip(header, data[0]))
    ef = sorted(row[h] for h in header if h.startswith("EF.") and h.endswith(".re"))
    np.testing.assert_allclose(ef, [-2, -1, 1, 2], atol=1e-12)
    im = sorted(row[h] for h in header if h.startswith("IF.") and h.endswith(".im"))
    np.testing.assert_allclose(im, [-0.6, -0.6, -0.3, -0.3], atol=1e-12)
    meta = json.loads(out.with_suffix(".meta.json").read_text())
    assert meta["assumed_defaults"] == {"gamma": 0.3}
    assert all(c in meta["columns"] for e in meta["exceptional_points"]
               for g in e["groups"] for c in g["columns"])


def test_figure3_small(tmp_path):
    out = tmp_path / "fig3.json"
    code, _ = run("figure", 3, "--range", "0:0.9:4", "--n-max", 8, "--format", "json",
                  "--out", out)
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["metadata"]["assumed_defaults"] == {"gamma": 0.1, "epsilon": 0.1}
    assert len(doc["branches"]) == 8


def test_csv_round_trip(tmp_path):
    out = tmp_path / "s.csv"
    run("sweep", "--model", "h1", "--omega", 1, "--range", "0:3:7", "--frame", "both",
        "--out", out)
    text = out.read_text()
    header, data = cli.read_csv(io.StringIO(text))
    lines = text.splitlines()[1:]
    again = [",".join(cli._num(v) for v in row) for row in data]
    assert again == lines


def test_sweep_h2_json(tmp_path):
    out = tmp_path / "h2.json"
    code, _ = run("sweep", "--model", "h2", "--g", 1, "--gamma", 0.3, "--range", "0:2:401",
                  "--format", "json", "--out", out)
    assert code == 0
    doc = json.loads(out.read_text())
    assert len(doc["branches"]) == 4
    (ep,) = doc["metadata"]["exceptional_points"]
    assert ep["location"] == pytest.approx(1.0, abs=1e-6)


def test_ep_find_stdout():
    code, text = run("ep-find", "--model", "h1", "--omega", 1, "--range", "0:4:401")
    assert code == 0
    (ep,) = json.loads(text)["exceptional_points"]
    assert ep["location"] == pytest.approx(2.0, abs=1e-6)


def test_config_errors(capsys):
    assert run("sweep", "--model", "h2", "--g", 1, "--gamma", 0.1, "--range", "2:0:11")[0] == 2
    assert run("sweep", "--model", "h2", "--g", 1, "--range", "0:1:11")[0] == 2
    assert run("sweep", "--model", "h2", "--g", 1, "--gamma", 0.1, "--range", "0:1:1")[0] == 2
    assert run("sweep", "--model", "h1", "--omega", 1)[0] == 2
    assert run("sweep", "--model", "h1", "--omega", 1, "--g", 1, "--range", "0:1:3")[0] == 2
    assert run("sweep", "--model", "h2", "--g", 1, "--gamma", 0.1, "--gamma-a", 0.2,
               "--range", "0:1:3")[0] == 2
    assert "error" in capsys.readouterr().err


def test_singular_point_exit(capsys):
    code, _ = run("sweep", "--model", "h3", "--g", 1, "--gamma", 0.1, "--epsilon", 0.1,
                  "--n-max", 4, "--range", "0:1.5:11")
    assert code == 3
    err = capsys.readouterr().err
    assert "spectral singularity" in err and "kappa=1.05" in err


def test_numerical_failure_exit(monkeypatch):
    def boom(*a, **k):
        raise EigenSolverError("no convergence")
    monkeypatch.setattr(cli, "sweep", boom)
    assert run("sweep", "--model", "h1", "--omega", 1, "--range", "0:1:3")[0] == 4


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"model": "h1", "omega": 1, "range": "0:4:401", "gap-tol": 1e-6}))
    code, text = run("ep-find", "--config", cfg)
    assert code == 0 and len(json.loads(text)["exceptional_points"]) == 1
    code, text = run("ep-find", "--config", cfg, "--omega", 0.5)
    (ep,) = json.loads(text)["exceptional_points"]
    assert ep["location"] == pytest.approx(1.0, abs=1e-6)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"model": "h1", "colour": "red"}))
    assert run("ep-find", "--config", bad)[0] == 2
    assert run("ep-find", "--config", tmp_path / "missing.json")[0] == 2


def test_check_h2_certified():
    code, text = run("check", "--model", "h2", "--g", 1, "--kappa", 0.5, "--gamma", 0.6,
                     "--n-max", 4)
    rep = json.loads(text)
    assert code == 0 and rep["hidden_pt_certified"]
    vals = [rep["pt_residual"], rep["sum_residual"], rep["commutator_residual"],
            rep["eigenvalue_sum_max_gap"], *rep["ef_drift"].values(),
            *rep["evolution_gap"].values()]
    assert max(vals) <= 1e-10
    assert set(rep["ef_drift"]) == {"0.5", "1.0", "2.0"}


def test_check_h1_certified():
    code, text = run("check", "--model", "h1", "--omega", 1, "--gamma-e", 1)
    assert code == 0 and json.loads(text)["hidden_pt_certified"]


def test_check_wrong_split():
    code, text = run("check", "--model", "h2", "--g", 1, "--kappa", 0.5, "--gamma", 0.6,
                     "--n-max", 4, "--h0", "number-a")
    rep = json.loads(text)
    assert code == 0 and not rep["hidden_pt_certified"]
    assert rep["commutator_residual"] > 1e-2
    assert run("check", "--model", "h1", "--omega", 1, "--gamma-e", 1, "--h0", "number-a")[0] == 2


def test_check_h3():
    code, text = run("check", "--model", "h3", "--g", 1, "--kappa", 0.6, "--gamma", 0.1,
                     "--epsilon", 0.1, "--n-max", 12)
    assert code == 0 and json.loads(text)["hidden_pt_certified"]
