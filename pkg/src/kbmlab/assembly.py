"""Per-mode Galerkin matrices of the vertical Laplacian, the geodesic field,
the kinetic generator, the absorbing potential and the rescaled restricted block.

Rows and columns are indexed by the vertical index ``m = -M..M`` (array
position ``m + M``).  On the mode ``exp(i kappa . x)`` the geodesic field
``X = cos(theta) d/dx + sin(theta) d/dy`` is multiplication by
``i kappa1 cos(theta) + i kappa2 sin(theta)``, which shifts ``m`` by one:

    X[m+1, m] = (i kappa1 + kappa2) / 2,    X[m-1, m] = (i kappa1 - kappa2) / 2.

The truncation is a hard cutoff: rows and columns with ``|m| > M`` are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .model import HMode, TorusSpec, VIndexRange

Kind = Literal["DeltaV", "X", "P", "Q", "ScaledRestricted"]


@dataclass(frozen=True)
class ModeMatrix:
    kind: Kind
    mode: HMode
    M: int
    entries: np.ndarray
    gamma: float | None = None

    @property
    def m(self) -> np.ndarray:
        """Vertical indices labelling the rows (``m = 0`` removed for restricted blocks)."""
        m = np.arange(-self.M, self.M + 1)
        if self.kind == "ScaledRestricted":
            m = m[m != 0]
        return m

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def _check_M(M: int) -> int:
    if int(M) != M or M < 1:
        raise ValueError(f"vertical truncation M must be an integer >= 1, got {M!r}")
    return int(M)


def projector_indices(M: int) -> tuple[np.ndarray, np.ndarray]:
    """Vertical indices of the ranges of ``Pi`` (``m = 0``) and ``Pi-perp`` (``m != 0``)."""
    m = VIndexRange(_check_M(M)).m
    return m[m == 0], m[m != 0]


def assemble_delta_v(mode: HMode, M: int) -> ModeMatrix:
    M = _check_M(M)
    m = np.arange(-M, M + 1)
    return ModeMatrix("DeltaV", mode, M, np.diag((m * m).astype(complex)))


def assemble_X(mode: HMode, M: int) -> ModeMatrix:
    M = _check_M(M)
    k1, k2 = mode.kappa
    up = complex(k2, k1) / 2.0  # (i k1 + k2) / 2
    down = complex(-k2, k1) / 2.0  # (i k1 - k2) / 2
    n = 2 * M + 1
    X = np.zeros((n, n), dtype=complex)
    idx = np.arange(n - 1)
    X[idx + 1, idx] = up
    X[idx, idx + 1] = down
    return ModeMatrix("X", mode, M, X)


def assemble_P(gamma: float, mode: HMode, M: int, spec: TorusSpec | None = None) -> ModeMatrix:
    """``-gamma X + c_n gamma^2 Delta_V`` on one horizontal mode."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma!r}")
    spec = spec or TorusSpec()
    M = _check_M(M)
    P = -gamma * assemble_X(mode, M).entries
    m = np.arange(-M, M + 1)
    P[np.diag_indices_from(P)] = spec.c_n * gamma**2 * (m * m)
    return ModeMatrix("P", mode, M, P, gamma=float(gamma))


def absorbing_level(A: float, mode: HMode) -> float:
    """The ``(0, 0)`` entry ``A^2 1(|kappa|^2 <= A^2)`` of the absorbing potential.

    ``A = 0`` is accepted and means no potential.
    """
    if A < 0:
        raise ValueError(f"A must be nonnegative, got {A!r}")
    return float(A * A) if mode.norm2 <= A * A else 0.0


def assemble_Q(A: float, mode: HMode, M: int) -> ModeMatrix:
    if not A > 0:
        raise ValueError(f"A must be positive, got {A!r}")
    M = _check_M(M)
    Q = np.zeros((2 * M + 1, 2 * M + 1), dtype=complex)
    Q[M, M] = absorbing_level(A, mode)
    return ModeMatrix("Q", mode, M, Q)


def assemble_scaled_restricted(
    h: float, lam: complex, mode: HMode, M: int, spec: TorusSpec | None = None
) -> ModeMatrix:
    """``c_n Delta_V - h X - h^2 lam`` with the ``m = 0`` row and column removed."""
    if not h > 0:
        raise ValueError(f"h must be positive, got {h!r}")
    spec = spec or TorusSpec()
    M = _check_M(M)
    m = np.arange(-M, M + 1)
    full = -h * assemble_X(mode, M).entries
    full[np.diag_indices_from(full)] = spec.c_n * (m * m) - h * h * complex(lam)
    keep = m != 0
    return ModeMatrix("ScaledRestricted", mode, M, full[np.ix_(keep, keep)], gamma=1.0 / h)
