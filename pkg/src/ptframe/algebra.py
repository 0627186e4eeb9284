"""Dense operator algebra on truncated qubit/boson product spaces.

Every operator is a square ``complex128`` numpy array.  Basis states of a
:class:`SpaceLayout` are ordered with the last subsystem varying fastest, so
for two bosonic modes ``(a, b)`` with cutoff ``n_max`` the state
``|n_a, n_b>`` sits at index ``n_a * (n_max + 1) + n_b``.  A qubit has the
basis ``(e, g)``: the excited level is index 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.linalg

from .errors import DimensionError, EigenSolverError, LayoutError

QUBIT_LEVELS = {"e": 0, "g": 1}


@dataclass(frozen=True)
class Subsystem:
    kind: str
    cutoff: int | None = None

    def __post_init__(self):
        if self.kind == "qubit":
            if self.cutoff is not None:
                raise LayoutError("a qubit takes no cutoff")
        elif self.kind == "boson":
            if self.cutoff is None or int(self.cutoff) < 1:
                raise LayoutError("boson cutoff must be >= 1")
        else:
            raise LayoutError(f"unknown subsystem kind {self.kind!r}")

    @property
    def dim(self) -> int:
        return 2 if self.kind == "qubit" else self.cutoff + 1


@dataclass(frozen=True)
class SpaceLayout:
    """Ordered list of subsystems defining the tensor-product basis."""

    subsystems: tuple[Subsystem, ...]

    def __post_init__(self):
        object.__setattr__(self, "subsystems", tuple(self.subsystems))
        if not self.subsystems:
            raise LayoutError("layout needs at least one subsystem")

    @classmethod
    def qubit(cls) -> "SpaceLayout":
        return cls((Subsystem("qubit"),))

    @classmethod
    def bosons(cls, n_modes: int, n_max: int) -> "SpaceLayout":
        return cls(tuple(Subsystem("boson", n_max) for _ in range(n_modes)))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.subsystems)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def index(self, levels) -> int:
        """Flat basis index of a product state given one level per subsystem."""
        if len(levels) != len(self.subsystems):
            raise LayoutError("one level per subsystem is required")
        return int(np.ravel_multi_index(tuple(levels), self.dims))

    def occupations(self) -> np.ndarray:
        """Array of shape ``(dim, n_subsystems)`` with the level of each factor."""
        grids = np.indices(self.dims).reshape(len(self.dims), -1)
        return grids.T.copy()

    def total_occupation(self) -> np.ndarray:
        """Summed boson occupation of every basis state (qubits contribute 0)."""
        occ = self.occupations()
        bosonic = [i for i, s in enumerate(self.subsystems) if s.kind == "boson"]
        return occ[:, bosonic].sum(axis=1)

    def basis_vector(self, levels) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(levels)] = 1.0
        return v


def as_cmatrix(m) -> np.ndarray:
    """Coerce to a finite, square complex matrix."""
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    return arr


def embed(layout: SpaceLayout, site: int, local) -> np.ndarray:
    """Place ``local`` on subsystem ``site`` with identities elsewhere."""
    if not 0 <= site < len(layout.subsystems):
        raise LayoutError(f"site {site} out of range for {len(layout.subsystems)} subsystems")
    local = np.asarray(local, dtype=complex)
    factors = [np.eye(d, dtype=complex) for d in layout.dims]
    if local.shape != factors[site].shape:
        raise DimensionError("local operator does not match subsystem dimension")
    factors[site] = local
    return reduce(np.kron, factors)


def _boson_site(layout: SpaceLayout, mode_index: int) -> Subsystem:
    if not 0 <= mode_index < len(layout.subsystems):
        raise LayoutError(f"mode index {mode_index} out of range")
    sub = layout.subsystems[mode_index]
    if sub.kind != "boson":
        raise LayoutError(f"subsystem {mode_index} is not a bosonic mode")
    return sub


def annihilation(layout: SpaceLayout, mode_index: int) -> np.ndarray:
    """Truncated annihilation operator ``a`` with ``<n-1|a|n> = sqrt(n)``."""
    sub = _boson_site(layout, mode_index)
    local = np.diag(np.sqrt(np.arange(1, sub.cutoff + 1, dtype=float)), 1)
    return embed(layout, mode_index, local)


def creation(layout: SpaceLayout, mode_index: int) -> np.ndarray:
    return annihilation(layout, mode_index).T.copy()


def number(layout: SpaceLayout, mode_index: int | None = None) -> np.ndarray:
    """Occupation of one mode, or of all bosonic modes when ``mode_index`` is None."""
    if mode_index is not None:
        _boson_site(layout, mode_index)
        occ = layout.occupations()[:, mode_index]
    else:
        occ = layout.total_occupation()
    return np.diag(occ.astype(complex))


def qubit_op(layout: SpaceLayout, site: int, bra: str, ket: str) -> np.ndarray:
    """Embedded ``|bra><ket|`` on a qubit subsystem (levels ``'e'`` or ``'g'``)."""
    if not 0 <= site < len(layout.subsystems) or layout.subsystems[site].kind != "qubit":
        raise LayoutError(f"subsystem {site} is not a qubit")
    try:
        i, j = QUBIT_LEVELS[bra], QUBIT_LEVELS[ket]
    except KeyError as exc:
        raise LayoutError(f"qubit levels are 'e' and 'g', got {exc.args[0]!r}") from None
    local = np.zeros((2, 2), dtype=complex)
    local[i, j] = 1.0
    return embed(layout, site, local)


def identity(layout: SpaceLayout) -> np.ndarray:
    return np.eye(layout.dim, dtype=complex)


def commutator(A, B) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape != B.shape:
        raise DimensionError(f"commutator needs equal square shapes, got {A.shape} and {B.shape}")
    return A @ B - B @ A


def expm(M) -> np.ndarray:
    """Matrix exponential (scaling and squaring with a Pade approximant)."""
    return scipy.linalg.expm(as_cmatrix(M))


@dataclass(frozen=True)
class EigResult:
    """Right/left eigenpairs of a general complex matrix.

    Right and left vectors are stored as unit-norm columns.  ``conditions[i]``
    is the eigenvalue condition number ``1/|w_i^H v_i|``; it diverges at an
    exceptional point, and ``condition_estimate`` is its maximum.
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray
    residual_norms: np.ndarray
    conditions: np.ndarray
    condition_estimate: float
    tol: float

    def __len__(self):
        return len(self.eigenvalues)

    def take(self, idx) -> "EigResult":
        idx = np.asarray(idx, dtype=int)
        cond = self.conditions[idx]
        return EigResult(
            self.eigenvalues[idx],
            self.right_vectors[:, idx],
            self.left_vectors[:, idx],
            self.residual_norms[idx],
            cond,
            float(cond.max()) if cond.size else 0.0,
            self.tol,
        )


def _null_pairs(A: np.ndarray, w: np.ndarray):
    """Right/left null vectors of ``A - w_i I`` from the smallest singular triplet."""
    n = A.shape[0]
    vr = np.empty((n, n), dtype=complex)
    vl = np.empty((n, n), dtype=complex)
    for i, x in enumerate(w):
        u, _, vh = np.linalg.svd(A - x * np.eye(n))
        vr[:, i] = vh[-1].conj()
        vl[:, i] = u[:, -1]
    return vr, vl


def eig(M, tol: float = 1e-10) -> EigResult:
    """All eigenvalues of ``M`` with unit-norm right and left eigenvectors.

    Near-defective input is not rejected; inspect ``condition_estimate``.
    ``tol`` is the relative residual bound ``||M v - E v|| <= tol * ||M||_2``
    the result is certified against.  When balancing in the LAPACK driver
    spoils that bound (entries spanning many orders of magnitude), the pairs
    are recomputed from an unbalanced Schur form.
    """
    A = as_cmatrix(M)
    try:
        w, vl, vr = scipy.linalg.eig(A, left=True, right=True)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(
            f"QR iteration did not converge (dim={A.shape[0]}, "
            f"||M||_F={np.linalg.norm(A):.3e}): {exc}"
        ) from exc
    vr = vr / np.linalg.norm(vr, axis=0)
    vl = vl / np.linalg.norm(vl, axis=0)
    residuals = np.linalg.norm(A @ vr - vr * w, axis=0)
    # ||A||_F / sqrt(n) <= ||A||_2 spares the SVD in the common case
    bound = tol * np.linalg.norm(A) / np.sqrt(max(A.shape[0], 1))
    if A.size and np.any(residuals > bound):
        bound = tol * np.linalg.norm(A, 2)
    if A.size and np.any(residuals > bound):
        w = np.diag(scipy.linalg.schur(A, output="complex")[0]).copy()
        vr, vl = _null_pairs(A, w)
        residuals = np.linalg.norm(A @ vr - vr * w, axis=0)
        if np.any(residuals > bound):
            raise EigenSolverError(
                f"eigenpair residual {residuals.max():.3e} exceeds {bound:.3e} "
                f"(dim={A.shape[0]})")
    overlap = np.abs(np.sum(vl.conj() * vr, axis=0))
    with np.errstate(divide="ignore"):
        cond = np.where(overlap > 0, 1.0 / np.maximum(overlap, 1e-300), np.inf)
    return EigResult(
        eigenvalues=w,
        right_vectors=vr,
        left_vectors=vl,
        residual_norms=residuals,
        conditions=cond,
        condition_estimate=float(cond.max()) if cond.size else 0.0,
        tol=tol,
    )
