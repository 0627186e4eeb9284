"""Parameter sweeps, eigenvalue branch tracking and exceptional-point detection."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .algebra import EigResult, eig
from .errors import ParameterError, PTFrameError, SingularPointError
from .frames import Decomposition
from .models import (TRACKED_STATES, H2Params, H3Params, analytic_eigs, build,
                     supermodes, tracked_subspace, with_param)

log = logging.getLogger(__name__)

FRAMES = ("IF", "EF")
GAP_TOL = 1e-6
COALESCENCE_TOL = 1e-3
#: grid minima deeper than this fraction of the median metric are refined
SCREEN = 0.1
_EPS = np.finfo(float).eps
_INVPHI = (math.sqrt(5) - 1) / 2


def _frame(frame: str) -> str:
    f = str(frame).upper()
    if f not in FRAMES:
        raise ValueError(f"frame must be 'IF' or 'EF', got {frame!r}")
    return f


def thread_count() -> int:
    """Worker cap from ``PTFRAME_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("PTFRAME_THREADS", "1")))
    except ValueError:
        return 1


def state_label(n_c: int, n_d: int) -> str:
    return f"c{n_c}d{n_d}"


@dataclass(frozen=True)
class Family:
    """A one-parameter family of decompositions, optionally with labelled states.

    With ``states`` (supermode occupations) only those branches are followed,
    inside the invariant subspace returned by :func:`tracked_subspace`.
    """

    base: object
    parameter: str
    states: tuple | None = None
    builder: Callable[[float], Decomposition] | None = field(default=None, compare=False)

    def params(self, value: float):
        return with_param(self.base, self.parameter, value)

    def decomposition(self, value: float) -> Decomposition:
        try:
            if self.builder is not None:
                return self.builder(value)
            return build(self.params(value))
        except ParameterError as exc:
            raise type(exc)(f"{self.parameter}={float(value):.17g}: {exc}") from exc

    @property
    def subspace(self) -> np.ndarray | None:
        if self.states is None or self.builder is not None:
            return None
        return tracked_subspace(self.base, self.states)

    def operator(self, value: float, frame: str) -> np.ndarray:
        d = self.decomposition(value)
        op = d.H if _frame(frame) == "IF" else d.H_pt
        mask = self.subspace
        return op if mask is None else op[np.ix_(mask, mask)]

    @property
    def labels(self) -> tuple[str, ...] | None:
        if self.states is None:
            return None
        return tuple(state_label(*s) for s in self.states)

    def seeds(self, value: float, frame: str) -> np.ndarray:
        k = 0 if _frame(frame) == "IF" else 1
        p = self.params(value)
        return np.array([analytic_eigs(p, *s)[k] for s in self.states])

    def references(self, value: float) -> np.ndarray | None:
        """Supermode Fock states ``c+^n_c d+^n_d |0,0>`` as unit columns.

        Only for the number-conserving two-mode model; ``None`` elsewhere or
        where the supermode map is singular.
        """
        if self.states is None or self.builder is not None:
            return None
        if isinstance(self.base, H3Params) or not isinstance(self.base, H2Params):
            return None
        p = self.params(value)
        try:
            sm = supermodes(p)
        except SingularPointError:
            return None
        vac = p.layout.basis_vector((0, 0))
        cols = []
        for n_c, n_d in self.states:
            v = vac
            for _ in range(n_d):
                v = sm.d_plus @ v
            for _ in range(n_c):
                v = sm.c_plus @ v
            cols.append(v[self.subspace])
        R = np.stack(cols, axis=1)
        return R / np.linalg.norm(R, axis=0)


def family(model, parameter: str, states=None) -> Family:
    """Wrap a parameter object (or an existing family) for sweeping ``parameter``."""
    if isinstance(model, Family):
        return model
    if callable(model):
        return Family(base=None, parameter=parameter, builder=model)
    if states is None and isinstance(model, H2Params):
        states = TRACKED_STATES
    return Family(base=model, parameter=parameter,
                  states=tuple(tuple(s) for s in states) if states else None)


@dataclass(frozen=True)
class Matching:
    """Optimal branch assignment between two consecutive eigen-decompositions."""

    permutation: np.ndarray
    cost: float
    runner_up_cost: float
    ambiguous: bool


def _default_weight(E: np.ndarray) -> float:
    if len(E) < 2:
        return 0.1
    dist = np.abs(E[:, None] - E[None, :])
    np.fill_diagonal(dist, np.inf)
    nearest = dist.min(axis=1)
    positive = nearest[nearest > 0]
    return 0.1 * float(np.median(positive)) if positive.size else 0.1


def track_step(prev: EigResult, nxt: EigResult, weight: float | None = None,
               rows: Sequence[int] | None = None) -> Matching:
    """Match eigenpairs of ``prev`` (optionally only ``rows``) into ``nxt``.

    Minimizes ``sum |E_i - E'_j| + weight * (1 - |v_i^H v'_j|)`` over
    assignments.  The step is flagged ambiguous when the cheapest alternative
    assignment costs less than 10% more than the optimum.
    """
    if prev.right_vectors.shape[0] != nxt.right_vectors.shape[0]:
        raise ValueError("eigen-decompositions live in different dimensions")
    rows = np.arange(len(prev)) if rows is None else np.asarray(rows, dtype=int)
    if weight is None:
        weight = _default_weight(prev.eigenvalues)
    E0 = prev.eigenvalues[rows]
    V0 = prev.right_vectors[:, rows]
    C = (np.abs(E0[:, None] - nxt.eigenvalues[None, :])
         + weight * (1 - np.abs(V0.conj().T @ nxt.right_vectors)))
    r, cols = linear_sum_assignment(C)
    perm = np.empty(len(rows), dtype=int)
    perm[r] = cols
    best = float(C[r, cols].sum())

    runner = math.inf
    if C.shape[1] > 1:
        big = float(C.sum()) + 1.0
        for i, j in zip(r, cols):
            C2 = C.copy()
            C2[i, j] = big
            r2, c2 = linear_sum_assignment(C2)
            runner = min(runner, float(C2[r2, c2].sum()))
    ambiguous = bool(math.isfinite(runner) and (runner - best) < 0.1 * runner)
    return Matching(perm, best, runner, ambiguous)


@dataclass(frozen=True)
class SweepResult:
    """Tracked eigenvalue branches over a parameter grid.

    ``branches[b, k]`` is branch ``b`` at ``grid[k]`` and ``vectors[k][:, b]``
    its unit right eigenvector.  ``overlaps[b, k]`` is ``|v_b(k)^H v_b(k+1)|``
    and ``ambiguous[k]`` flags the step ``k -> k+1``.
    """

    parameter_name: str
    grid: np.ndarray
    branches: np.ndarray
    vectors: np.ndarray
    overlaps: np.ndarray
    ambiguous: np.ndarray
    frame: str
    labels: tuple[str, ...]
    family: Family | None = field(default=None, compare=False, repr=False)

    @property
    def n_branches(self) -> int:
        return self.branches.shape[0]


def _map(func, items, threads: int):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(func, items))
    return [func(x) for x in items]


def _label_by_references(res: EigResult, refs: np.ndarray) -> np.ndarray:
    C = 1 - np.abs(refs.conj().T @ res.right_vectors)
    r, c = linear_sum_assignment(C)
    out = np.empty(refs.shape[1], dtype=int)
    out[r] = c
    return out


def _initial_selection(fam: Family, res: EigResult, value: float, frame: str) -> np.ndarray:
    if fam.states is None:
        E = res.eigenvalues
        return np.lexsort((E.imag, E.real))
    refs = fam.references(value)
    if refs is not None:
        return _label_by_references(res, refs)
    seeds = fam.seeds(value, frame)
    r, c = linear_sum_assignment(np.abs(seeds[:, None] - res.eigenvalues[None, :]))
    out = np.empty(len(seeds), dtype=int)
    out[r] = c
    return out


def sweep(model, parameter_name: str, grid, frame: str = "IF", states=None,
          weight: float | None = None, threads: int | None = None) -> SweepResult:
    """Diagonalize the model across ``grid`` and follow its eigenvalue branches.

    Labelled branches are re-identified by supermode-state overlap after an
    ambiguous step (an exceptional point leaves branch identity undefined).
    """
    frame = _frame(frame)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("sweep grid needs at least 2 points")
    steps = np.diff(grid)
    if not (np.all(steps > 0) or np.all(steps < 0)):
        raise ValueError("sweep grid must be strictly monotone")
    fam = family(model, parameter_name, states)
    threads = thread_count() if threads is None else threads

    results = _map(lambda x: eig(fam.operator(x, frame)), list(grid), threads)

    order = _initial_selection(fam, results[0], grid[0], frame)
    nb, K = len(order), len(grid)
    dim = results[0].right_vectors.shape[0]
    branches = np.empty((nb, K), dtype=complex)
    vectors = np.empty((K, dim, nb), dtype=complex)
    overlaps = np.empty((nb, K - 1))
    ambiguous = np.zeros(K - 1, dtype=bool)
    for k in range(K):
        res = results[k]
        if k > 0:
            m = track_step(results[k - 1], res, weight, rows=order)
            order = m.permutation
            ambiguous[k - 1] = m.ambiguous
            if m.ambiguous and fam.states is not None:
                refs = fam.references(grid[k])
                if refs is not None:
                    order = _label_by_references(res, refs)
            overlaps[:, k - 1] = np.abs(np.sum(vectors[k - 1].conj() * res.right_vectors[:, order], axis=0))
        branches[:, k] = res.eigenvalues[order]
        vectors[k] = res.right_vectors[:, order]
    labels = fam.labels or tuple(f"b{i}" for i in range(nb))
    if ambiguous.any():
        log.info("ambiguous tracking at %s=%s", parameter_name, grid[1:][ambiguous])
    return SweepResult(parameter_name, grid, branches, vectors, overlaps,
                       ambiguous, frame, labels, fam)


def coalescence_metric(E: np.ndarray, V: np.ndarray) -> float:
    """``min_{i<j} |E_i - E_j| + (1 - |v_i^H v_j|)`` over unit-norm columns."""
    if len(E) < 2:
        return math.inf
    gap = np.abs(E[:, None] - E[None, :])
    coal = 1 - np.abs(V.conj().T @ V)
    m = gap + coal
    iu = np.triu_indices(len(E), 1)
    return float(m[iu].min())


@dataclass(frozen=True)
class EPGroup:
    branch_ids: tuple[int, ...]
    labels: tuple[str, ...]
    eigenvalue: complex
    eigenvalue_gap: float
    gap_threshold: float
    vector_coalescence: float
    expectations: tuple[float, ...] | None = None

    @property
    def order(self) -> int:
        return len(self.branch_ids)


@dataclass(frozen=True)
class EPReport:
    """A refined exceptional point and the branch groups coalescing there."""

    parameter_name: str
    frame: str
    location: float
    groups: tuple[EPGroup, ...]
    refinement_width: float
    metric: float

    @property
    def branch_ids(self) -> tuple[int, ...]:
        return tuple(sorted(i for g in self.groups for i in g.branch_ids))

    @property
    def eigenvalue_gap(self) -> float:
        return max(g.eigenvalue_gap for g in self.groups)

    @property
    def vector_coalescence(self) -> float:
        return max(g.vector_coalescence for g in self.groups)

    @property
    def order_estimate(self) -> int:
        return max(g.order for g in self.groups)


def _gap_floor(k: int, scale: float, gap_tol: float) -> float:
    """Admissible spread of a ``k``-fold coalescence in double precision.

    Rounding of size ``eps*||A||`` splits an order-``k`` Jordan block by about
    ``(eps*||A||)^(1/k)``.
    """
    return max(gap_tol, 10.0 * (_EPS * scale) ** (1.0 / k))


def _components(n: int, linked: np.ndarray) -> list[list[int]]:
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in zip(*np.nonzero(np.triu(linked, 1))):
        parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def _golden(f, lo: float, hi: float, width: float, max_iter: int = 300):
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= width:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
        if not (a < c < d < b):
            break
    x, fx = (c, fc) if fc <= fd else (d, fd)
    return x, fx, b - a


def detect_eps(s: SweepResult, model=None, frame: str | None = None,
               gap_tol: float = GAP_TOL, coalescence_tol: float = COALESCENCE_TOL,
               width: float = 1e-13, observable=None,
               screen: float = SCREEN) -> list[EPReport]:
    """Locate exceptional points along a sweep.

    Local minima of the coalescence metric on the grid are refined by
    golden-section search.  At the refined point eigenpairs whose vectors
    coalesce form Jordan clusters; a cluster of size ``k`` is accepted when its
    eigenvalue spread is below ``max(gap_tol, 10 (eps ||A||)^(1/k))``.
    Only minima below ``screen`` times the median grid metric are refined;
    shallow ripples from rounding or truncation are skipped.
    Clusters sharing an eigenvalue form one group, reported through the
    tracked branches it contains.
    """
    fam = s.family if model is None else family(model, s.parameter_name)
    frame = s.frame if frame is None else _frame(frame)
    grid = s.grid
    K = len(grid)
    m_grid = np.array([coalescence_metric(s.branches[:, k], s.vectors[k]) for k in range(K)])

    def at(value: float, k: int):
        res = eig(fam.operator(value, frame))
        ref = EigResult(s.branches[:, k], s.vectors[k], s.vectors[k],
                        np.zeros(s.n_branches), np.ones(s.n_branches), 1.0, 0.0)
        idx = track_step(ref, res).permutation
        return res, idx

    def metric(value: float, k: int) -> float:
        try:
            res, idx = at(value, k)
        except (PTFrameError, np.linalg.LinAlgError):
            return math.inf
        return coalescence_metric(res.eigenvalues[idx], res.right_vectors[:, idx])

    finite = m_grid[np.isfinite(m_grid)]
    bound = screen * float(np.median(finite)) if finite.size else -math.inf
    candidates = []
    for k in range(K):
        if not m_grid[k] <= bound:
            continue
        left = m_grid[k - 1] if k > 0 else math.inf
        right = m_grid[k + 1] if k < K - 1 else math.inf
        if m_grid[k] <= left and m_grid[k] <= right and (m_grid[k] < left or m_grid[k] < right):
            candidates.append(k)

    obs = None
    if observable is not None:
        obs = np.asarray(observable, dtype=complex)
        if fam.subspace is not None:
            obs = obs[np.ix_(fam.subspace, fam.subspace)]

    reports: list[EPReport] = []
    for k in candidates:
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, K - 1)]
        lo, hi = min(lo, hi), max(lo, hi)
        scale = max(1.0, abs(grid[k]))
        x, fx, achieved = _golden(lambda v: metric(v, k), lo, hi, max(width, 4 * _EPS * scale))
        if metric(grid[k], k) < fx:
            x, fx = float(grid[k]), metric(grid[k], k)
        try:
            res, idx = at(x, k)
        except PTFrameError:
            continue
        groups = _ep_groups(res, idx, s.labels, gap_tol, coalescence_tol,
                            float(np.linalg.norm(fam.operator(x, frame))), obs)
        if groups:
            reports.append(EPReport(s.parameter_name, frame, float(x), tuple(groups),
                                    float(achieved), float(fx)))

    reports.sort(key=lambda r: r.location)
    merged: list[EPReport] = []
    for r in reports:
        if merged and abs(r.location - merged[-1].location) < 1e-6 * max(1.0, abs(r.location)):
            if r.metric < merged[-1].metric:
                merged[-1] = r
            continue
        merged.append(r)
    return merged


def _ep_groups(res: EigResult, idx: np.ndarray, labels, gap_tol: float,
               coalescence_tol: float, scale: float, obs) -> list[EPGroup]:
    E, V = res.eigenvalues, res.right_vectors
    n = len(E)
    gap = np.abs(E[:, None] - E[None, :])
    coal = 1 - np.abs(V.conj().T @ V)
    linked = (coal < coalescence_tol) & (gap < _gap_floor(n, scale, gap_tol))
    clusters = []
    for comp in _components(n, linked):
        if len(comp) < 2:
            continue
        sub = gap[np.ix_(comp, comp)]
        if sub.max() <= _gap_floor(len(comp), scale, gap_tol):
            clusters.append(comp)
    if not clusters:
        return []

    means = np.array([E[c].mean() for c in clusters])
    same = np.abs(means[:, None] - means[None, :]) < gap_tol
    tracked = {int(j): b for b, j in enumerate(idx)}
    groups = []
    for comp in _components(len(clusters), same):
        members = [(tracked[j], j, ci) for ci in comp for j in clusters[ci] if j in tracked]
        if len(members) < 2:
            continue
        members.sort()
        eig_idx = [j for _, j, _ in members]
        sizes = [len(clusters[ci]) for ci in comp]
        coalescences = []
        for _, j, ci in members:
            partners = [q for q in clusters[ci] if q != j]
            coalescences.append(min(coal[j, q] for q in partners))
        expect = None
        if obs is not None:
            expect = tuple(float((np.vdot(V[:, j], obs @ V[:, j]) / np.vdot(V[:, j], V[:, j])).real)
                           for j in eig_idx)
        groups.append(EPGroup(
            branch_ids=tuple(b for b, _, _ in members),
            labels=tuple(labels[b] for b, _, _ in members),
            eigenvalue=complex(E[[j for ci in comp for j in clusters[ci]]].mean()),
            eigenvalue_gap=float(gap[np.ix_(eig_idx, eig_idx)].max()),
            gap_threshold=_gap_floor(max(sizes), scale, gap_tol),
            vector_coalescence=float(max(coalescences)),
            expectations=expect,
        ))
    groups.sort(key=lambda g: g.branch_ids)
    return groups


def reality_check(s: SweepResult) -> list[tuple[float, float]]:
    """Largest ``|Im E|`` over branches at every grid point."""
    worst = np.abs(s.branches.imag).max(axis=0)
    return [(float(x), float(w)) for x, w in zip(s.grid, worst)]
