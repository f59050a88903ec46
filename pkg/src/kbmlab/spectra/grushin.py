"""Schur complement of the kinetic generator onto the fibre-constant line.

For one horizontal mode write ``h = 1/gamma`` and let ``S(lam)`` be the
restricted block ``c_n Delta_V - h X - h^2 lam`` on ``m != 0``.  The scalar

    E(lam) = gamma^-2 (lam + x_r S(lam)^-1 x_c - q),

with ``x_c`` / ``x_r`` the ``m = 0`` column / row of ``X`` off the diagonal and
``q`` the absorbing level, is minus ``gamma^-2`` times the Schur complement of
``P - lam + Q_A`` onto ``m = 0``.  Its zeros are therefore exactly the
eigenvalues of the truncated ``P + Q_A``; with ``A = 0`` they are the
eigenvalues of ``P``.

``S(lam)`` is strictly accretive while ``h^2 Re(lam) < c_n``
(``Re <S u, u> >= (c_n - h^2 Re lam) |u|^2``), so ``E`` is holomorphic on any
window with ``Re lam < c_n gamma^2``.
"""

from __future__ import annotations

import math

import numpy as np

from ..assembly import absorbing_level, assemble_X
from ..errors import ConvergenceError, SingularBlockError, WindingError
from ..linalg import smin
from ..model import HMode, SpectralWindow, TorusSpec

SINGULAR_TOL = 1e-12
BOUNDARY_TOL = 1e-10


class GrushinScalar:
    """The effective function ``lam -> E(lam)`` for fixed ``(gamma, mode, M, A)``.

    Evaluation is vectorised over ``lam``.
    """

    def __init__(self, gamma: float, mode: HMode, M: int, A: float = 0.0, spec: TorusSpec | None = None):
        if not gamma > 0:
            raise ValueError(f"gamma must be positive, got {gamma!r}")
        self.spec = spec or TorusSpec()
        self.gamma = float(gamma)
        self.h = 1.0 / self.gamma
        self.mode = mode
        self.M = int(M)
        self.A = float(A)
        self.q = absorbing_level(self.A, mode)

        X = assemble_X(mode, self.M).entries
        m = np.arange(-self.M, self.M + 1)
        perp = m != 0
        self.x_col = X[perp, self.M]
        self.x_row = X[self.M, perp]
        self._T = -self.h * X[np.ix_(perp, perp)]
        self._T[np.diag_indices_from(self._T)] += self.spec.c_n * (m[perp] ** 2)
        self._eye = np.eye(self._T.shape[0])

    def restricted(self, lam: complex) -> np.ndarray:
        return self._T - self.h**2 * complex(lam) * self._eye

    def _check_invertible(self, lam: np.ndarray):
        # accretivity margin certifies invertibility without an SVD
        margin = self.spec.c_n - self.h**2 * lam.real
        for z in lam[margin <= SINGULAR_TOL]:
            if smin(self.restricted(z)) <= SINGULAR_TOL:
                raise SingularBlockError(f"restricted block singular at lam={z}")

    def _solve(self, lam: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        S = self._T[None, :, :] - (self.h**2 * lam)[:, None, None] * self._eye[None]
        return np.linalg.solve(S, np.broadcast_to(rhs, (lam.size, rhs.size))[..., None])[..., 0]

    def scaled(self, lam):
        """``gamma^2 E(lam) = lam + x_r S^-1 x_c - q`` (better scaled for root finding)."""
        lam_arr = np.atleast_1d(np.asarray(lam, dtype=complex))
        self._check_invertible(lam_arr)
        g = self._solve(lam_arr, self.x_col)
        out = lam_arr + g @ self.x_row - self.q
        return out if np.ndim(lam) else complex(out[0])

    def __call__(self, lam):
        out = self.scaled(lam)
        return out / self.gamma**2

    def scaled_derivative(self, lam: complex) -> complex:
        """``d/dlam (gamma^2 E) = 1 + h^2 x_r S^-2 x_c``."""
        lam_arr = np.atleast_1d(np.asarray(lam, dtype=complex))
        g = self._solve(lam_arr, self.x_col)
        g2 = self._solve(lam_arr, g[0])
        return complex(1.0 + self.h**2 * (self.x_row @ g2[0]))


def grushin_scalar(gamma: float, lam: complex, mode: HMode, M: int, A: float = 0.0,
                   spec: TorusSpec | None = None) -> complex:
    return GrushinScalar(gamma, mode, M, A, spec)(lam)


def _contour(window: SpectralWindow, n_side: int) -> np.ndarray:
    c = window.corners()
    t = np.arange(n_side) / n_side
    pieces = [a + (b - a) * t for a, b in zip(c, c[1:] + c[:1])]
    return np.concatenate(pieces)


def winding_number(func, window: SpectralWindow, n_side: int = 32, max_side: int = 1 << 14,
                   max_step: float = math.pi / 4, floor: float = BOUNDARY_TOL) -> int:
    """Winding number of ``func`` around the boundary of ``window``.

    The boundary is sampled uniformly and the phase increments are summed;
    sampling is doubled until no increment exceeds ``max_step`` and the count
    agrees with the previous level.
    """
    previous = None
    while n_side <= max_side:
        z = _contour(window, n_side)
        f = func(z)
        if np.any(np.abs(f) < floor):
            j = int(np.argmin(np.abs(f)))
            raise WindingError(f"function vanishes on the contour near {z[j]}")
        steps = np.angle(np.roll(f, -1) / f)
        total = steps.sum() / (2 * math.pi)
        count = int(round(total))
        if abs(total - count) > 0.1:
            raise WindingError(f"non-integral winding {total}")
        if np.abs(steps).max() <= max_step and count == previous:
            return count
        previous = count
        n_side *= 2
    raise WindingError(f"winding number not resolved with {max_side} samples per side")


def grushin_zero_count(gamma: float, mode: HMode, M: int, A: float, window: SpectralWindow,
                       spec: TorusSpec | None = None) -> int:
    """Number of zeros of ``E`` inside ``window`` (argument principle)."""
    E = GrushinScalar(gamma, mode, M, A, spec)
    return winding_number(E, window, floor=BOUNDARY_TOL)


def grushin_zero(gamma: float, mode: HMode, M: int, A: float, seed: complex,
                 spec: TorusSpec | None = None, maxiter: int = 100) -> complex:
    """Newton iteration on ``E`` from ``seed``.

    Stops once ``|E(lam)| <= 1e-12 gamma^-2 max(1, |lam|)``.
    """
    E = GrushinScalar(gamma, mode, M, A, spec)
    lam = complex(seed)
    for _ in range(maxiter):
        f = E.scaled(lam)
        if abs(f) <= 1e-12 * max(1.0, abs(lam)):
            return lam
        lam = lam - f / E.scaled_derivative(lam)
    raise ConvergenceError(f"Newton iteration on E did not converge from seed {seed}")
