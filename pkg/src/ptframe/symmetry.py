"""Parity operators, the antilinear PT action, and symmetry residuals.

Time reversal is entrywise complex conjugation in the fixed Fock/qubit basis,
so an operator ``H`` is PT-symmetric when ``P conj(H) P == H`` (``P`` is a
real reflection, ``P == P^-1``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import SpaceLayout, as_cmatrix, embed
from .errors import DimensionError, IllConditionedError, LayoutError

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class ParityOperator:
    matrix: np.ndarray
    layout: SpaceLayout
    kind: str

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class SymmetryReport:
    residual: float
    tol: float

    @property
    def is_symmetric(self) -> bool:
        return self.residual <= self.tol


def perfect_shuffle(d1: int, d2: int) -> np.ndarray:
    """Permutation matrix sending ``|i>|j>`` (``d1 x d2``) to ``|j>|i>``."""
    i, j = np.divmod(np.arange(d1 * d2), d2)
    S = np.zeros((d1 * d2, d1 * d2))
    S[j * d1 + i, i * d2 + j] = 1.0
    return S


def parity_qubit() -> ParityOperator:
    layout = SpaceLayout.qubit()
    sigma_x = np.array([[0, 1], [1, 0]], dtype=complex)
    return ParityOperator(embed(layout, 0, sigma_x), layout, "qubit_sigma_x")


def parity_two_mode(layout: SpaceLayout) -> ParityOperator:
    """Mode exchange times the total number parity ``exp(i pi N)``."""
    subs = layout.subsystems
    if len(subs) != 2 or any(s.kind != "boson" for s in subs):
        raise LayoutError("two-mode parity needs exactly two bosonic modes")
    if subs[0].cutoff != subs[1].cutoff:
        raise LayoutError("mode exchange needs equal cutoffs")
    d = subs[0].dim
    phase = np.where(layout.total_occupation() % 2 == 0, 1.0, -1.0)
    P = perfect_shuffle(d, d) @ np.diag(phase)
    return ParityOperator(P.astype(complex), layout, "two_mode_shuffle_phase")


def _check_dims(H: np.ndarray, P: ParityOperator):
    if H.shape != P.matrix.shape:
        raise DimensionError(f"operator shape {H.shape} does not match parity {P.matrix.shape}")


def pt_transform(X, P: ParityOperator) -> np.ndarray:
    """Apply the PT conjugation ``X -> P conj(X) P``."""
    X = np.asarray(X, dtype=complex)
    _check_dims(X, P)
    return P.matrix @ X.conj() @ P.matrix


def pt_asymmetry(X, P: ParityOperator) -> np.ndarray:
    return pt_transform(X, P) - np.asarray(X, dtype=complex)


def pt_residual(H, P: ParityOperator, tol: float = DEFAULT_TOL) -> SymmetryReport:
    """Relative Frobenius distance between ``H`` and its PT image."""
    H = as_cmatrix(H)
    _check_dims(H, P)
    scale = max(np.linalg.norm(H), np.finfo(float).eps)
    return SymmetryReport(float(np.linalg.norm(pt_asymmetry(H, P)) / scale), tol)


def pseudo_hermiticity_residual(H, eta, tol: float = DEFAULT_TOL,
                                max_condition: float = 1e12) -> SymmetryReport:
    """Relative residual of ``eta H eta^-1 = H^dagger``."""
    H = as_cmatrix(H)
    eta = as_cmatrix(eta)
    if H.shape != eta.shape:
        raise DimensionError(f"metric shape {eta.shape} does not match {H.shape}")
    if np.linalg.cond(eta) >= max_condition:
        raise IllConditionedError("metric eta is singular or ill-conditioned")
    # eta H eta^-1 solved from the right, never forming the inverse
    conj = np.linalg.solve(eta.T, (eta @ H).T).T
    scale = max(np.linalg.norm(H), np.finfo(float).eps)
    return SymmetryReport(float(np.linalg.norm(conj - H.conj().T) / scale), tol)
