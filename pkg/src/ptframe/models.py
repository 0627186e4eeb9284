"""The three passive/driven Hamiltonians, their supermodes and closed-form spectra.

* ``h1``: driven two-level atom with excited-state decay.
* ``h2``: two coupled lossy bosonic modes.
* ``h3``: the same modes with coherent drives tuned so that the loss part
  is the excitation number of displaced supermodes.

Rates are written through ``kappa = (gamma_a - gamma_b)/2`` (balanced
gain/loss) and ``gamma = (gamma_a + gamma_b)/2`` (common decay).
"""

from __future__ import annotations

import cmath
import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .algebra import SpaceLayout, annihilation, identity, number, qubit_op
from .errors import ParameterError, PTFrameError, SingularPointError
from .frames import Decomposition, check_decomposition
from .symmetry import ParityOperator, parity_qubit, parity_two_mode, pt_asymmetry

#: supermode occupations ``(n_c, n_d)`` of the four states followed in the figures
TRACKED_STATES = ((1, 0), (0, 1), (2, 0), (0, 2))

#: distance from the cutoff below which two-operator identities hold exactly
INTERIOR_MARGIN = 2


@dataclass(frozen=True)
class H1Params:
    omega: float
    gamma_e: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ParameterError("omega must be positive")
        if self.gamma_e < 0:
            raise ParameterError("gamma_e must be non-negative")


@dataclass(frozen=True)
class H2Params:
    g: float
    gamma_a: float
    gamma_b: float
    n_max: int = 4

    def __post_init__(self):
        if not self.g > 0:
            raise ParameterError("coupling g must be positive")
        if int(self.n_max) < 1:
            raise ParameterError("n_max must be >= 1")

    @classmethod
    def from_kappa(cls, g: float, kappa: float, gamma: float, n_max: int = 4, **kw):
        return cls(g=g, gamma_a=gamma + kappa, gamma_b=gamma - kappa, n_max=n_max, **kw)

    @property
    def kappa(self) -> float:
        return (self.gamma_a - self.gamma_b) / 2

    @property
    def gamma(self) -> float:
        return (self.gamma_a + self.gamma_b) / 2

    @property
    def lam(self) -> complex:
        """Supermode frequency; imaginary (principal root) once ``|kappa| > g``."""
        return cmath.sqrt(self.g ** 2 - self.kappa ** 2)

    @property
    def layout(self) -> SpaceLayout:
        return SpaceLayout.bosons(2, self.n_max)


@dataclass(frozen=True)
class H3Params(H2Params):
    epsilon: float = 0.0
    n_max: int = 12

    def __post_init__(self):
        super().__post_init__()
        if self.epsilon < 0:
            raise ParameterError("drive strength epsilon must be non-negative")

    def _lam_real(self) -> float:
        if abs(self.kappa) >= self.g:
            raise SingularPointError(
                f"spectral singularity regime: |kappa|={abs(self.kappa):g} >= g={self.g:g}")
        return math.sqrt(self.g ** 2 - self.kappa ** 2)

    @property
    def lam(self) -> complex:
        return complex(self._lam_real())

    @property
    def theta(self) -> complex:
        lam = self._lam_real()
        return self.gamma * (self.g - 1j * self.kappa) / lam ** 2

    @property
    def chi(self) -> float:
        return 2 * self.gamma * self.epsilon ** 2 / self._lam_real() ** 2

    @property
    def lambda0(self) -> float:
        return -2 * self.g * self.epsilon ** 2 / self._lam_real() ** 2


def with_param(p, name: str, value: float):
    """Copy of ``p`` with one parameter changed.

    ``kappa`` and ``gamma`` are accepted for the two-mode models; changing one
    keeps the other fixed.
    """
    value = float(value)
    if isinstance(p, H2Params) and name in ("kappa", "gamma"):
        kappa = value if name == "kappa" else p.kappa
        gamma = value if name == "gamma" else p.gamma
        return dataclasses.replace(p, gamma_a=gamma + kappa, gamma_b=gamma - kappa)
    names = {f.name for f in dataclasses.fields(p)} - {"n_max"}
    if name not in names:
        raise ParameterError(f"{type(p).__name__} has no sweepable parameter {name!r}")
    return dataclasses.replace(p, **{name: value})


def interior_mask(layout: SpaceLayout, margin: int = INTERIOR_MARGIN) -> np.ndarray:
    """Basis states whose total occupation stays ``margin`` below the cutoff."""
    n_max = min(s.cutoff for s in layout.subsystems if s.kind == "boson")
    return layout.total_occupation() <= n_max - margin


def build_h1(p: H1Params) -> Decomposition:
    L = SpaceLayout.qubit()
    s_eg, s_ge = qubit_op(L, 0, "e", "g"), qubit_op(L, 0, "g", "e")
    s_ee, s_gg = qubit_op(L, 0, "e", "e"), qubit_op(L, 0, "g", "g")
    half = p.gamma_e / 2
    H = p.omega * (s_eg + s_ge) - 1j * p.gamma_e * s_ee
    H_pt = p.omega * (s_eg + s_ge) - 1j * half * s_ee + 1j * half * s_gg
    H0 = -1j * half * identity(L)
    return check_decomposition(H, H_pt, H0, parity_qubit())


def _two_mode_ops(n_max: int):
    L = SpaceLayout.bosons(2, n_max)
    a, b = annihilation(L, 0), annihilation(L, 1)
    return L, a, b, a.T, b.T


def build_h2(p: H2Params) -> Decomposition:
    if p.n_max < 2:
        raise ParameterError("build_h2 needs n_max >= 2")
    L, a, b, ad, bd = _two_mode_ops(p.n_max)
    hop = p.g * (ad @ b + bd @ a)
    na, nb = ad @ a, bd @ b
    H = hop - 1j * p.gamma_a * na - 1j * p.gamma_b * nb
    H_pt = hop - 1j * p.kappa * na + 1j * p.kappa * nb
    H0 = -1j * p.gamma * (na + nb)
    return check_decomposition(H, H_pt, H0, parity_two_mode(L))


def build_h3(p: H3Params) -> Decomposition:
    theta, chi = p.theta, p.chi
    eps = p.epsilon
    L, a, b, ad, bd = _two_mode_ops(p.n_max)
    hop = p.g * (ad @ b + bd @ a)
    na, nb = ad @ a, bd @ b
    A, B = a - ad, b - bd
    I = identity(L)
    H = (hop + 1j * eps * (1 - 1j * theta) * A + 1j * eps * (1 - 1j * np.conj(theta)) * B
         - 1j * p.gamma_a * na - 1j * p.gamma_b * nb - 1j * chi * I)
    H_pt = hop + 1j * eps * A + 1j * eps * B - 1j * p.kappa * na + 1j * p.kappa * nb
    H0 = eps * theta * A + eps * np.conj(theta) * B - 1j * p.gamma * (na + nb) - 1j * chi * I
    return check_decomposition(H, H_pt, H0, parity_two_mode(L),
                               interior=interior_mask(L))


def build(p) -> Decomposition:
    """Dispatch on the parameter type."""
    if isinstance(p, H3Params):
        return build_h3(p)
    if isinstance(p, H2Params):
        return build_h2(p)
    if isinstance(p, H1Params):
        return build_h1(p)
    raise TypeError(f"no builder for {type(p).__name__}")


@dataclass(frozen=True)
class SupermodeMap:
    """Complex rotation ``[c, d]^T = R [a, b]^T`` and its displaced variant.

    ``c_plus`` is built from the creation operators with the same rotation, so
    it is not the adjoint of ``c`` when ``R`` is complex.
    """

    R: np.ndarray
    lam: complex
    alpha_half_sin: complex
    alpha_half_cos: complex
    c: np.ndarray
    c_plus: np.ndarray
    d: np.ndarray
    d_plus: np.ndarray
    eps_c: complex | None = None
    eps_d: complex | None = None
    c_eps: np.ndarray | None = None
    c_eps_plus: np.ndarray | None = None
    d_eps: np.ndarray | None = None
    d_eps_plus: np.ndarray | None = None

    @property
    def number(self) -> np.ndarray:
        return self.c_plus @ self.c + self.d_plus @ self.d

    @property
    def number_eps(self) -> np.ndarray:
        if self.c_eps is None:
            raise PTFrameError("displaced supermodes need a driven model")
        return self.c_eps_plus @ self.c_eps + self.d_eps_plus @ self.d_eps


def rotation_angles(g: float, kappa: float) -> tuple[complex, complex, complex]:
    """``(lam, sin(alpha/2), cos(alpha/2))`` for coupling ``g`` and gain/loss ``kappa``.

    ``sin`` takes the principal root; ``cos`` is fixed through
    ``sin * cos = g / (2 lam)`` so the diagonal form holds on both sides of
    the exceptional point.
    """
    lam = cmath.sqrt(g ** 2 - kappa ** 2)
    if abs(lam) <= 1e-14 * max(abs(g), 1.0):
        raise SingularPointError("exceptional point: supermode map singular")
    s = cmath.sqrt((lam + 1j * kappa) / (2 * lam))
    c = g / (2 * lam * s)
    return lam, s, c


def supermodes(p: H2Params) -> SupermodeMap:
    lam, s, c = rotation_angles(p.g, p.kappa)
    R = np.array([[c, s], [-s, c]])
    _, a, b, ad, bd = _two_mode_ops(p.n_max)
    ops = dict(
        c=c * a + s * b, d=-s * a + c * b,
        c_plus=c * ad + s * bd, d_plus=-s * ad + c * bd,
    )
    if isinstance(p, H3Params) and p.epsilon > 0:
        I = np.eye(a.shape[0], dtype=complex)
        eps_c = p.epsilon * (c + s)
        eps_d = p.epsilon * (c - s)
        ops.update(
            eps_c=eps_c, eps_d=eps_d,
            c_eps=1j * ops["c"] + eps_c / lam * I,
            c_eps_plus=-1j * ops["c_plus"] + eps_c / lam * I,
            d_eps=1j * ops["d"] - eps_d / lam * I,
            d_eps_plus=-1j * ops["d_plus"] - eps_d / lam * I,
        )
    return SupermodeMap(R=R, lam=lam, alpha_half_sin=s, alpha_half_cos=c, **ops)


def _check_occupations(n_c: int, n_d: int, n_max: int):
    if n_c < 0 or n_d < 0:
        raise ParameterError("occupations must be non-negative")
    if n_c + n_d > n_max:
        raise ParameterError(f"occupation {n_c + n_d} exceeds cutoff {n_max}")


def analytic_eigs_h2(p: H2Params, n_c: int, n_d: int) -> tuple[complex, complex]:
    """Closed-form eigenvalue of the supermode Fock state ``|n_c, n_d>``.

    Returns ``(E_if, E_ef)`` for the full Hamiltonian and its PT part.
    """
    _check_occupations(n_c, n_d, p.n_max)
    lam, gamma = p.lam, p.gamma
    e_if = (lam - 1j * gamma) * n_c - (lam + 1j * gamma) * n_d
    e_ef = lam * (n_c - n_d)
    return complex(e_if), complex(e_ef)


def analytic_eigs_h3(p: H3Params, n_c: int, n_d: int) -> tuple[complex, complex]:
    _check_occupations(n_c, n_d, p.n_max)
    e_if, e_ef = analytic_eigs_h2(p, n_c, n_d)
    return e_if + p.lambda0, e_ef + p.lambda0


def analytic_eigs(p, n_c: int, n_d: int) -> tuple[complex, complex]:
    if isinstance(p, H3Params):
        return analytic_eigs_h3(p, n_c, n_d)
    if isinstance(p, H2Params):
        return analytic_eigs_h2(p, n_c, n_d)
    raise TypeError(f"no supermode spectrum for {type(p).__name__}")


def tracked_subspace(p, states=TRACKED_STATES) -> np.ndarray | None:
    """Basis mask of an invariant subspace holding the tracked states, if any.

    ``h2`` conserves the photon number, so the sectors ``N = n_c + n_d`` are
    exact invariant subspaces.  The other models return ``None`` (full space).
    """
    if isinstance(p, H3Params) or not isinstance(p, H2Params):
        return None
    sectors = sorted({n_c + n_d for n_c, n_d in states})
    if max(sectors) > p.n_max:
        raise ParameterError("tracked states exceed the cutoff")
    return np.isin(p.layout.total_occupation(), sectors)


def fit_scalar_generator(H, G, P: ParityOperator) -> tuple[complex, float]:
    """Fit ``beta`` so that ``H - beta G`` is as PT-symmetric as possible.

    The asymmetry is real-linear in ``beta``, so the fit is a two-variable
    real least-squares problem.  A direction of ``beta`` that leaves the
    asymmetry unchanged is set to zero (minimum-norm solution).
    """
    H = np.asarray(H, dtype=complex)
    G = np.asarray(G, dtype=complex)
    if not np.linalg.norm(G) > 0:
        raise ParameterError("generator must be non-zero")
    target = pt_asymmetry(H, P).ravel()
    # asym(beta G) = Re(beta) asym(G) + Im(beta) asym(iG)
    cols = [pt_asymmetry(G, P).ravel(), pt_asymmetry(1j * G, P).ravel()]
    A = np.stack([np.concatenate([c.real, c.imag]) for c in cols], axis=1)
    y = np.concatenate([target.real, target.imag])
    scale = np.linalg.norm(A, axis=0).max()
    if scale == 0:
        raise ParameterError("generator is PT-symmetric; cannot fit")
    (x_re, x_im), *_ = np.linalg.lstsq(A, y, rcond=1e-12)
    beta = complex(x_re, x_im)
    if abs(beta) < 1e-14 * max(1.0, np.linalg.norm(H) / np.linalg.norm(G)):
        beta = 0j
    rest = H - beta * G
    denom = np.linalg.norm(rest)
    residual = float(np.linalg.norm(pt_asymmetry(rest, P)) / denom) if denom > 0 else 0.0
    return beta, residual


#: margin for frame checks on the driven model: ``exp(-i H0 t)`` leaks
#: boundary effects inward about one level per unit time
FRAME_MARGIN = 6
#: highest total occupation of random initial states in those checks
FRAME_SUPPORT = 2


def frame_check_masks(p) -> tuple[np.ndarray | None, np.ndarray | None]:
    """``(support, measure)`` masks for frame-change checks.

    Number-conserving models are exact on the full space (``None, None``).
    For the driven model initial states live on low occupations and
    differences are measured away from the cutoff.
    """
    if not isinstance(p, H3Params):
        return None, None
    if p.n_max < FRAME_MARGIN + FRAME_SUPPORT:
        raise ParameterError(
            f"frame checks on the driven model need n_max >= {FRAME_MARGIN + FRAME_SUPPORT}")
    occ = p.layout.total_occupation()
    return occ <= FRAME_SUPPORT, interior_mask(p.layout, FRAME_MARGIN)


def random_state(dim: int, rng: np.random.Generator, support=None) -> np.ndarray:
    """Normalized complex Gaussian state, zero outside ``support``."""
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    if support is not None:
        v = np.where(np.asarray(support, dtype=bool), v, 0)
    return v / np.linalg.norm(v)
