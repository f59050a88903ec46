"""Semigroup ``exp(-t P_gamma)`` on finitely supported states, the spectral
gap, and the expansion of the semigroup over eigenvalues with ``Re <= beta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .assembly import assemble_P
from .errors import ConvergenceError, KbmError, SpectrumError
from .linalg import CLUSTER_RTOL, cluster
from .model import HMode, SpectralWindow, TorusSpec, iter_modes, sobolev_weight
from .spectra.sweep import spectrum_window

COND_MAX = 1e8
ZERO_TOL = 1e-8
BETA_MARGIN = 1e-3
DEFAULT_GAP_WINDOW = SpectralWindow(-0.5, 2.5, -5.0, 5.0)


@dataclass
class StateVector:
    """Fourier coefficients ``c[k][m + M]`` of a function on the unit tangent bundle.

    Missing modes are zero.  The ``L^2`` norm is the ``l^2`` norm of the
    coefficients (orthonormal-basis convention).
    """

    coeffs: dict[tuple[int, int], np.ndarray]
    M: int
    spec: TorusSpec = field(default_factory=TorusSpec)
    s: float = 0.0

    def __post_init__(self):
        clean = {}
        for k, c in self.coeffs.items():
            c = np.asarray(c, dtype=complex)
            if c.shape != (2 * self.M + 1,):
                raise ValueError(f"mode {k}: expected {2 * self.M + 1} coefficients, got {c.shape}")
            if not np.all(np.isfinite(c)):
                raise ValueError(f"mode {k}: non-finite coefficients")
            clean[(int(k[0]), int(k[1]))] = c
        self.coeffs = dict(sorted(clean.items()))

    @classmethod
    def zeros_like(cls, other: "StateVector") -> "StateVector":
        return cls({}, other.M, other.spec, other.s)

    @classmethod
    def basis(cls, k, m: int, M: int, spec: TorusSpec | None = None, amplitude: complex = 1.0) -> "StateVector":
        c = np.zeros(2 * M + 1, dtype=complex)
        c[m + M] = amplitude
        return cls({tuple(k): c}, M, spec or TorusSpec())

    @classmethod
    def constant(cls, M: int, spec: TorusSpec | None = None, value: complex = 1.0) -> "StateVector":
        return cls.basis((0, 0), 0, M, spec, value)

    @classmethod
    def random_smooth(cls, K_max: float = 16.0, M: int = 16, seed: int = 0,
                      spec: TorusSpec | None = None) -> "StateVector":
        """Complex Gaussian coefficients damped by ``exp(-(|kappa|^2 + m^2) / 4)``."""
        spec = spec or TorusSpec()
        rng = np.random.default_rng(seed)
        m = np.arange(-M, M + 1)
        coeffs = {}
        for md in iter_modes(spec, K_max):
            z = rng.standard_normal(m.size) + 1j * rng.standard_normal(m.size)
            coeffs[md.k] = z * np.exp(-(md.norm2 + m * m) / 4.0)
        return cls(coeffs, M, spec)

    def mode(self, k) -> HMode:
        return HMode.from_index(k, self.spec)

    def norm(self, s: float | None = None) -> float:
        s = self.s if s is None else s
        m = np.arange(-self.M, self.M + 1)
        total = 0.0
        for k, c in self.coeffs.items():
            w = sobolev_weight(s, self.mode(k), m)
            total += float(np.sum(np.abs(w * c) ** 2))
        return math.sqrt(total)

    def mean(self) -> complex:
        """Coefficient of the constant function."""
        c = self.coeffs.get((0, 0))
        return 0j if c is None else complex(c[self.M])

    def __add__(self, other: "StateVector") -> "StateVector":
        self._compatible(other)
        out = {k: c.copy() for k, c in self.coeffs.items()}
        for k, c in other.coeffs.items():
            out[k] = out[k] + c if k in out else c.copy()
        return StateVector(out, self.M, self.spec, self.s)

    def __sub__(self, other: "StateVector") -> "StateVector":
        return self + other.scale(-1.0)

    def scale(self, a: complex) -> "StateVector":
        return StateVector({k: a * c for k, c in self.coeffs.items()}, self.M, self.spec, self.s)

    def _compatible(self, other):
        if other.M != self.M or other.spec != self.spec:
            raise ValueError("states differ in truncation or geometry")


@lru_cache(maxsize=4096)
def _decomposition(gamma: float, k: tuple[int, int], M: int, spec: TorusSpec):
    """Eigendecomposition ``(P, w, V, V^-1)`` of one block, or ``(P, None, None, None)``
    when the eigenvector matrix is too ill-conditioned to use."""
    P = assemble_P(gamma, HMode.from_index(k, spec), M, spec).entries
    if np.array_equal(P, np.diag(np.diag(P))):
        n = P.shape[0]
        return P, np.diag(P).astype(complex), np.eye(n, dtype=complex), np.eye(n, dtype=complex)
    w, V = sla.eig(P)
    if np.linalg.cond(V) > COND_MAX:
        return P, None, None, None
    return P, w, V, np.linalg.inv(V)


def _propagate_block(gamma, k, M, spec, c, t):
    P, w, V, W = _decomposition(float(gamma), k, M, spec)
    if w is None:
        return sla.expm(-t * P) @ c
    return V @ (np.exp(-t * w) * (W @ c))


def propagate(gamma: float, u: StateVector, t: float) -> StateVector:
    """``exp(-t P_gamma) u`` computed mode by mode."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma!r}")
    if not t >= 0:
        raise ValueError(f"t must be nonnegative, got {t!r}")
    if t == 0:
        return StateVector({k: c.copy() for k, c in u.coeffs.items()}, u.M, u.spec, u.s)
    out = {}
    for k, c in u.coeffs.items():
        v = _propagate_block(gamma, k, u.M, u.spec, c, t)
        if k == (0, 0) and np.linalg.norm(v) > np.linalg.norm(c) * (1 + 1e-6):
            raise KbmError("propagation of the normal k=0 block increased the L2 norm")
        out[k] = v
    return StateVector(out, u.M, u.spec, u.s)


def spectral_gap(gamma: float, spec: TorusSpec | None = None,
                 search_window: SpectralWindow = DEFAULT_GAP_WINDOW) -> float:
    """Smallest real part among the nonzero eigenvalues found in ``search_window``."""
    spec = spec or TorusSpec()
    if not (search_window.re_min < 0.0 < search_window.re_max
            and search_window.im_min < 0.0 < search_window.im_max):
        raise ValueError("search window must contain 0 in its interior")
    found = spectrum_window(gamma, search_window, spec)
    if not found.tail_certified:
        raise SpectrumError(f"tail certificate failed: {found.tail_failures[:3]}")
    vals = found.values
    zero = np.abs(vals) < ZERO_TOL
    if zero.sum() != 1:
        raise SpectrumError(f"expected one zero eigenvalue, found {int(zero.sum())}")
    rest = vals[~zero]
    if rest.size == 0:
        raise SpectrumError("no nonzero eigenvalue in the search window")
    return float(rest.real.min())


@dataclass(frozen=True)
class RetainedTerm:
    """One cluster of eigenvalues of a single block, with its projected data."""

    lam: complex
    k: tuple[int, int]
    size: int
    projected: np.ndarray = field(repr=False)     # Pi u
    nilpotent: np.ndarray = field(repr=False)     # (P - lam) Pi

    def evaluate(self, t: float) -> np.ndarray:
        # exp(-t P) Pi u = exp(-t lam) sum_l (-t)^l / l! N^l Pi u
        out = np.zeros_like(self.projected)
        v = self.projected.copy()
        for ell in range(self.size):
            out += (-t) ** ell / math.factorial(ell) * v
            v = self.nilpotent @ v
        return np.exp(-t * self.lam) * out


@dataclass
class ExpansionReport:
    beta: float
    retained: list[RetainedTerm]
    t: np.ndarray
    remainder_norms: np.ndarray
    fitted_rate: float
    envelope_constant: float
    u_norm: float

    @property
    def retained_values(self) -> np.ndarray:
        return np.array([r.lam for r in self.retained], dtype=complex)


def contour_projector(P: np.ndarray, center: complex, radius: float, n0: int = 16,
                      n_max: int = 4096, tol: float = 1e-12) -> np.ndarray:
    """Riesz projector ``(2 pi i)^-1 \\oint (z - P)^-1 dz`` over a circle, by the trapezoid rule.

    Nodes are doubled until successive projectors agree to ``tol`` (relative).
    """
    eye = np.eye(P.shape[0])
    prev = None
    n = n0
    while n <= n_max:
        theta = 2 * math.pi * (np.arange(n) + 0.5) / n
        z = center + radius * np.exp(1j * theta)
        R = np.linalg.inv(z[:, None, None] * eye[None] - P[None])
        Pi = np.tensordot(radius * np.exp(1j * theta) / n, R, axes=1)
        if prev is not None and np.linalg.norm(Pi - prev) <= tol * max(1.0, np.linalg.norm(Pi)):
            return Pi
        prev, n = Pi, 2 * n
    raise ConvergenceError(f"contour projector around {center} did not converge")


def _retained_terms(gamma, k, M, spec, c, beta) -> list[RetainedTerm]:
    P, w, V, W = _decomposition(float(gamma), k, M, spec)
    if w is None:
        w = sla.eigvals(P)
    near = np.abs(w.real - beta) < BETA_MARGIN
    if near.any():
        raise SpectrumError(f"beta={beta} within {BETA_MARGIN} of Re {w[near][0]} (mode {k})")
    keep = np.flatnonzero(w.real <= beta)
    terms = []
    for group in cluster(w[keep], CLUSTER_RTOL):
        idx = keep[group]
        lam = complex(np.mean(w[idx]))
        if len(idx) == 1 and V is not None:
            j = idx[0]
            proj = V[:, j] * (W[j, :] @ c)
            terms.append(RetainedTerm(lam, k, 1, proj, np.zeros_like(P)))
            continue
        others = np.delete(w, idx)
        gap = np.min(np.abs(others - lam)) if others.size else 1.0
        spread = np.max(np.abs(w[idx] - lam))
        radius = 0.5 * gap if gap > 0 else 1e-3
        if radius <= 2 * spread:
            raise ConvergenceError(f"cluster at {lam} (mode {k}) is not isolated")
        Pi = contour_projector(P, lam, radius)
        N = (P - lam * np.eye(P.shape[0])) @ Pi
        terms.append(RetainedTerm(lam, k, len(idx), Pi @ c, N))
    return terms


def equilibrium_decay(gamma: float, u: StateVector, t_grid, beta: float) -> ExpansionReport:
    """Remainder of ``exp(-t P) u`` after the eigen-expansion over ``Re lam <= beta``."""
    t = np.asarray(t_grid, dtype=float)
    if t.size < 2 or np.any(t < 1.0):
        raise ValueError("t_grid needs at least two points, all >= 1")
    retained: list[RetainedTerm] = []
    for k, c in u.coeffs.items():
        retained += _retained_terms(gamma, k, u.M, u.spec, c, beta)
    retained.sort(key=lambda r: (r.lam.real, r.lam.imag, r.k))

    rem = np.empty(t.size)
    for i, ti in enumerate(t):
        v = propagate(gamma, u, ti)
        for r in retained:
            v.coeffs[r.k] = v.coeffs[r.k] - r.evaluate(ti)
        rem[i] = v.norm(0.0)

    u_norm = u.norm(0.0)
    floor = 1e-13 * max(u_norm, 1e-300)
    if np.all(rem <= floor):
        rate, envelope = math.inf, 0.0
    else:
        ok = rem > floor
        rate = -float(np.polyfit(t[ok], np.log(rem[ok]), 1)[0]) if ok.sum() >= 2 else math.nan
        envelope = float(np.max(rem * np.exp(beta * t)) / u_norm)
    return ExpansionReport(float(beta), retained, t, rem, rate, envelope, u_norm)
