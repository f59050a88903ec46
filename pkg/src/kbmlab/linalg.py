"""Dense complex linear algebra with residual certificates.

The kinetic generator is far from normal, so every eigenpair carries its
residual ``||A v - lam v||`` and is flagged when the residual exceeds
``EIG_RTOL * ||A||_2``.  Eigenvalues are reported individually; clusters
(``|lam - mu| <= CLUSTER_RTOL * max(1, |lam|)``) are grouped by callers that
need multiplicities or spectral projectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .errors import NonFiniteError, TruncationError
from .model import HMode, SpectralWindow, sobolev_weight

EIG_RTOL = 1e-10
DRIFT_TOL = 1e-8
CLUSTER_RTOL = 1e-6
DEFAULT_CEILING = 512


@dataclass(frozen=True)
class EigenPair:
    value: complex
    vector: np.ndarray = field(repr=False)
    residual: float
    flagged: bool = False


@dataclass
class TruncationReport:
    M_used: int
    M_check: int
    max_drift: float
    converged: bool
    tol: float
    eigenpairs: list[EigenPair] = field(default_factory=list, repr=False)
    history: list[tuple[int, float]] = field(default_factory=list)

    def in_window(self, window: SpectralWindow) -> list[EigenPair]:
        return [p for p in self.eigenpairs if window.contains(p.value)]


def _as_finite(a) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteError("matrix has non-finite entries")
    return a


def eig(a, rtol: float = EIG_RTOL) -> list[EigenPair]:
    """All eigenpairs of ``a`` sorted by (Re, Im), each with its residual.

    Hermitian input goes through ``eigh`` so its eigenvalues come out real.
    """
    a = _as_finite(a).astype(complex)
    n = a.shape[0]
    if n == 0:
        return []
    if np.array_equal(a, a.conj().T):
        w, V = sla.eigh(a)
        w = w.astype(complex)
    else:
        w, V = sla.eig(a, check_finite=False)
    V = V / np.linalg.norm(V, axis=0)
    res = np.linalg.norm(a @ V - V * w, axis=0)
    scale = np.linalg.norm(a, 2)
    bad = res > rtol * max(scale, np.finfo(float).tiny)
    order = np.lexsort((w.imag, w.real))
    return [EigenPair(complex(w[j]), V[:, j], float(res[j]), bool(bad[j])) for j in order]


def eigvals(a) -> np.ndarray:
    """Eigenvalues only, sorted by (Re, Im); no certification."""
    w = sla.eigvals(_as_finite(a), check_finite=False)
    return w[np.lexsort((w.imag, w.real))]


def smin(a) -> float:
    """Smallest singular value (``1 / ||a^-1||_2`` when ``a`` is invertible)."""
    a = _as_finite(a)
    if a.shape[0] == 0:
        return np.inf
    return float(sla.svdvals(a, check_finite=False)[-1])


def opnorm(a) -> float:
    a = _as_finite(a) if np.ndim(a) == 2 and a.shape[0] == a.shape[1] else np.asarray(a)
    return float(sla.svdvals(a)[0]) if a.size else 0.0


def sobolev_diag(s: float, mode: HMode, m) -> np.ndarray:
    return np.atleast_1d(sobolev_weight(s, mode, m))


def weighted_opnorm(block, s_in: float, s_out: float, mode: HMode, m=None) -> float:
    """``||W_{s_out} A W_{s_in}^{-1}||_2`` with ``W_s = diag(w_s(k, m))``.

    ``m`` defaults to ``-M..M`` inferred from an odd block size.
    """
    a = np.asarray(block)
    if m is None:
        n = a.shape[0]
        if n % 2 != 1:
            raise ValueError("pass the vertical indices explicitly for even-sized blocks")
        M = n // 2
        m = np.arange(-M, M + 1)
    w_out = sobolev_diag(s_out, mode, m)
    w_in = sobolev_diag(s_in, mode, m)
    return opnorm(w_out[:, None] * a / w_in[None, :])


def match_sets(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Minimum-total-distance assignment between two complex point sets.

    Returns ``(rows, cols, distances)``; unmatched points are those not listed.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.size == 0 or b.size == 0:
        return np.array([], int), np.array([], int), np.array([])
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return r, c, cost[r, c]


def cluster(values, rtol: float = CLUSTER_RTOL) -> list[list[int]]:
    """Group indices of ``values`` into clusters of mutually close eigenvalues (single linkage)."""
    values = np.asarray(values, dtype=complex)
    n = values.size
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) <= rtol * max(1.0, abs(values[i]), abs(values[j])):
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: (values[g[0]].real, values[g[0]].imag))


def truncation_search(
    builder: Callable[[int], np.ndarray],
    window: SpectralWindow,
    tol: float = DRIFT_TOL,
    M0: int = 8,
    ceiling: int = DEFAULT_CEILING,
    mode: HMode | None = None,
) -> TruncationReport:
    """Double ``M`` from ``M0`` until the in-window eigenvalues move less than ``tol``.

    Convergence at ``M`` means: the eigenvalues of ``builder(M)`` and
    ``builder(2M)`` inside ``window`` have the same count and an optimal
    assignment between them moves no point by ``tol`` or more.  The strict
    inequality makes ``tol = 0`` unreachable by design.  Raises
    :class:`TruncationError` (carrying the partial report) once ``2M`` would
    exceed ``ceiling``.
    """
    if not tol >= 0:
        raise ValueError(f"tol must be nonnegative, got {tol!r}")
    if M0 < 4:
        raise ValueError(f"M0 must be >= 4, got {M0}")
    M = M0
    pairs = eig(builder(M))
    prev = None  # (M, pairs) of the last truncation that was compared
    history: list[tuple[int, float]] = []
    while True:
        if 2 * M > ceiling:
            if prev is None:
                report = TruncationReport(M, M, np.inf, False, tol, pairs, history)
            else:
                report = TruncationReport(prev[0], M, history[-1][1], False, tol, prev[1], history)
            drift = report.max_drift
            where = f" for mode k={mode.k}" if mode is not None else ""
            raise TruncationError(
                f"truncation did not converge{where}: drift {drift:.3e} >= tol {tol:.3e} "
                f"at ceiling M={ceiling}",
                report,
                mode,
            )
        pairs_2 = eig(builder(2 * M))
        a = np.array([p.value for p in pairs if window.contains(p.value)])
        b = np.array([p.value for p in pairs_2 if window.contains(p.value)])
        if a.size != b.size:
            drift = np.inf
        elif a.size == 0:
            drift = 0.0
        else:
            drift = float(match_sets(a, b)[2].max())
        history.append((M, drift))
        if drift < tol:
            return TruncationReport(M, 2 * M, drift, True, tol, pairs, history)
        prev = (M, pairs)
        M, pairs = 2 * M, pairs_2
