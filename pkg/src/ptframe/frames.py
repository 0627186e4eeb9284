"""Equilibrium-frame transformation and hidden-PT decomposition checks.

A Hamiltonian ``H = H_pt + H0`` with ``[H_pt, H0] = 0`` is moved to the
equilibrium frame by ``psi = S(t) psi_ef`` with ``S(t) = expm(-i H0 t)``.
There the dynamics is generated by ``S^-1 H_pt S``, which equals ``H_pt``
exactly when the two parts commute.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .algebra import as_cmatrix, commutator, eig, expm
from .errors import DimensionError, IllConditionedError, NearEPError, PTFrameError
from .symmetry import DEFAULT_TOL, ParityOperator, pt_residual

SUM_TOL = 1e-12


def _rel(num: float, den: float) -> float:
    return float(num / den) if den > 0 else float(num)


def _block(M: np.ndarray, mask) -> np.ndarray:
    if mask is None:
        return M
    return M[np.ix_(mask, mask)]


@dataclass(frozen=True)
class Decomposition:
    """``H = H_pt + H0`` together with its diagnostic residuals.

    ``interior`` is an optional boolean mask of basis states on which the
    truncated operators represent the untruncated algebra; the commutator
    residual is measured on that block only.
    """

    H: np.ndarray
    H_pt: np.ndarray
    H0: np.ndarray
    parity: ParityOperator | None
    sum_residual: float
    commutator_residual: float
    pt_residual: float
    tol: float = DEFAULT_TOL
    interior: np.ndarray | None = None

    @property
    def valid(self) -> bool:
        return self.sum_residual <= SUM_TOL

    @property
    def certified(self) -> bool:
        return (self.valid and self.commutator_residual <= self.tol
                and self.pt_residual <= self.tol)

    @property
    def dim(self) -> int:
        return self.H.shape[0]


def check_decomposition(H, H_pt, H0, P: ParityOperator | None,
                        tol: float = DEFAULT_TOL, interior=None) -> Decomposition:
    H, H_pt, H0 = (as_cmatrix(m) for m in (H, H_pt, H0))
    if not H.shape == H_pt.shape == H0.shape:
        raise DimensionError("H, H_pt and H0 must share one shape")
    if interior is not None:
        interior = np.asarray(interior, dtype=bool)
        if interior.shape != (H.shape[0],):
            raise DimensionError("interior mask must have one entry per basis state")

    sum_res = _rel(np.linalg.norm(H - H_pt - H0), np.linalg.norm(H))
    comm = _block(commutator(H_pt, H0), interior)
    comm_res = _rel(np.linalg.norm(comm), np.linalg.norm(H_pt) * np.linalg.norm(H0))
    pt_res = pt_residual(H_pt, P).residual if P is not None else float("inf")
    return Decomposition(H, H_pt, H0, P, sum_res, comm_res, pt_res, tol, interior)


@dataclass(frozen=True)
class FrameCheck:
    time: float
    drift: float
    evolution_gap: float | None = None


def ef_frame_operator(H0, t: float) -> np.ndarray:
    """``S(t) = expm(-i H0 t)``; not unitary when ``H0`` is non-Hermitian."""
    return expm(-1j * t * as_cmatrix(H0))


def evolve(H, psi0, t: float) -> np.ndarray:
    """Solve ``i d/dt psi = H psi`` from ``psi0`` up to time ``t``."""
    H = as_cmatrix(H)
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (H.shape[0],):
        raise DimensionError(f"state of shape {psi0.shape} does not fit a {H.shape[0]}-dim space")
    if not np.linalg.norm(psi0) > 0:
        raise ValueError("initial state must be non-zero")
    return expm(-1j * t * H) @ psi0


def _frame_pair(H0, t: float, max_condition: float):
    S = ef_frame_operator(H0, t)
    # S^-1 from the exponential itself; inverting S loses the conditioning
    S_inv = expm(1j * t * as_cmatrix(H0))
    cond = np.linalg.norm(S, 2) * np.linalg.norm(S_inv, 2)
    if not cond < max_condition:
        raise IllConditionedError(
            f"S(t) condition ~{cond:.2e} at t={t}; use a smaller |t|")
    return S, S_inv


def evolution_gap(H_pt, H0, psi0, t: float, mask=None,
                  max_condition: float = 1e12) -> float:
    """``||psi_if(t) - S(t) psi_ef(t)||`` with both sides evolved independently."""
    H_pt, H0 = as_cmatrix(H_pt), as_cmatrix(H0)
    S, _ = _frame_pair(H0, t, max_condition)
    psi_if = evolve(H_pt + H0, psi0, t)
    psi_ef = evolve(H_pt, psi0, t)
    diff = psi_if - S @ psi_ef
    if mask is not None:
        diff = diff[np.asarray(mask, dtype=bool)]
    return float(np.linalg.norm(diff))


def ef_drift(H_pt, H0, t: float, psi0=None, mask=None,
             max_condition: float = 1e12) -> FrameCheck:
    """Relative change of ``H_pt`` under the frame change, ``S^-1 H_pt S - H_pt``.

    With ``mask`` the drift is measured on that block of basis states only.
    """
    H_pt, H0 = as_cmatrix(H_pt), as_cmatrix(H0)
    if H_pt.shape != H0.shape:
        raise DimensionError("H_pt and H0 must share one shape")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
    S, S_inv = _frame_pair(H0, t, max_condition)
    moved = S_inv @ H_pt @ S
    drift = _rel(np.linalg.norm(_block(moved - H_pt, mask)), np.linalg.norm(_block(H_pt, mask)))
    gap = None
    if psi0 is not None:
        gap = evolution_gap(H_pt, H0, psi0, t, mask, max_condition)
    return FrameCheck(float(t), drift, gap)


class SumTerm(NamedTuple):
    energy: complex
    energy_ef: complex
    energy_geometric: complex
    gap: float


def _match(res, v: np.ndarray, op: np.ndarray) -> complex:
    """Eigenvalue of ``op`` whose left vector overlaps ``v`` the most."""
    ov = np.abs(res.left_vectors.conj().T @ v)
    best = ov.max()
    ties = np.flatnonzero(ov >= best * (1 - 1e-8))
    if len(ties) > 1:
        rayleigh = np.vdot(v, op @ v) / np.vdot(v, v)
        ties = ties[np.argsort(np.abs(res.eigenvalues[ties] - rayleigh), kind="stable")]
    return complex(res.eigenvalues[ties[0]])


def eigenvalue_sum_check(decomp: Decomposition, max_condition: float = 1e6,
                         max_boundary_weight: float = 1e-3) -> list[SumTerm]:
    """Pair each eigenvalue of ``H`` with eigenvalues of ``H_pt`` and ``H0``.

    The three spectra come from separate diagonalizations and are paired via
    eigenvector overlaps.  When the decomposition carries an interior mask,
    eigenvectors with more than ``max_boundary_weight`` outside it are truncation
    artifacts and are skipped.  Eigenvalue condition numbers of ``H`` or
    ``H_pt`` at or above ``max_condition`` (rounding caps an exact
    exceptional point near ``1/sqrt(eps)``) mean the pairing is unreliable.
    """
    if not decomp.certified:
        raise PTFrameError("decomposition is not certified; the parts need not share eigenvectors")
    full = eig(decomp.H)
    keep = np.ones(len(full), dtype=bool)
    if decomp.interior is not None:
        outside = np.linalg.norm(full.right_vectors[~decomp.interior], axis=0)
        keep = outside <= max_boundary_weight
    res_pt = eig(decomp.H_pt)
    if np.any(full.conditions[keep] >= max_condition) or \
            (decomp.interior is None and res_pt.condition_estimate >= max_condition):
        raise NearEPError("eigenvector matching unreliable near EP")
    res_0 = eig(decomp.H0)
    terms = []
    for i in np.flatnonzero(keep):
        v = full.right_vectors[:, i]
        e = complex(full.eigenvalues[i])
        e_pt = _match(res_pt, v, decomp.H_pt)
        e_0 = _match(res_0, v, decomp.H0)
        terms.append(SumTerm(e, e_pt, e_0, float(abs(e - e_pt - e_0))))
    return terms
