"""Uniform bound measurements: inverse norms, resolvent differences and
empirical hypoelliptic constants.

Every supremum over horizontal modes is taken over shells of equal
``|kappa|^2`` (see :func:`kbmlab.model.shells`), and is rejected with
:class:`TailError` when the outer part of the swept ball still carries a
sizeable fraction of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np
import scipy.linalg as sla

from ..assembly import absorbing_level, assemble_P, assemble_scaled_restricted
from ..errors import KbmError, SingularBlockError, TailError
from ..linalg import eigvals, smin, sobolev_diag, weighted_opnorm
from ..model import HMode, Shell, TorusSpec, shells

DEFAULT_M = 24
C0 = 10.0


def default_lambda_grid(c0: float = C0) -> list[complex]:
    """``{0, +-c0, +-c0 i, (+-c0 +- c0 i)/sqrt 2}``."""
    r = c0 / math.sqrt(2.0)
    return [0j, c0, -c0, 1j * c0, -1j * c0, complex(r, r), complex(r, -r), complex(-r, r), complex(-r, -r)]


@dataclass(frozen=True)
class BoundRow:
    gamma: float
    A: float
    lam: complex
    s: float
    sup: float
    value: float
    argmax_norm2: float


def _tail_ok(norm2s: np.ndarray, vals: np.ndarray, k2_max: float, ratio: float) -> bool:
    sup = vals.max()
    if k2_max <= 0:
        return True  # zero mode only, by request: nothing is truncated
    if not np.isfinite(sup):
        return True  # reported as inf, caller fails on it
    outer = norm2s >= 0.9 * k2_max
    if not outer.any():
        return True
    return bool(vals[outer].max() <= ratio * sup)


def _sup_over_shells(per_shell, shell_list: Sequence[Shell], k2_max: float, ratio: float, what: str):
    vals = np.array([per_shell(sh.representative) for sh in shell_list])
    norm2s = np.array([sh.norm2 for sh in shell_list])
    if not _tail_ok(norm2s, vals, k2_max, ratio):
        raise TailError(f"{what}: outer shells reach {vals[norm2s >= 0.9 * k2_max].max():.3e} "
                        f"against sup {vals.max():.3e}; increase K_max beyond {k2_max}")
    j = int(np.argmax(vals))
    return float(vals[j]), float(norm2s[j])


def _inverse_norm(B: np.ndarray, mode: HMode, s_in: float, s_out: float, m=None) -> float:
    """``||W_out B^-1 W_in^-1||`` computed as ``1 / smin(W_in B W_out^-1)`` when ``s_in == s_out``."""
    if m is None:
        M = B.shape[0] // 2
        m = np.arange(-M, M + 1)
    if s_in == s_out:
        w = sobolev_diag(s_in, mode, m)
        sv = smin(w[:, None] * B / w[None, :])
        return math.inf if sv == 0.0 else 1.0 / sv
    try:
        inv = np.linalg.inv(B)
    except np.linalg.LinAlgError:
        return math.inf
    return weighted_opnorm(inv, s_in, s_out, mode, m)


def _shifted_block(gamma, mode, M, lam, A, spec):
    B = assemble_P(gamma, mode, M, spec).entries.copy()
    B[np.diag_indices_from(B)] -= lam
    B[M, M] += absorbing_level(A, mode)
    return B


def _bound_study(gamma_grid, A_grid, lambda_grid, s, spec, K_max, M, gain, power, tail_ratio):
    spec = spec or TorusSpec()
    rows = []
    for gamma in gamma_grid:
        for A in A_grid:
            if not gamma > A > 0:
                raise ValueError(f"need gamma > A > 0, got gamma={gamma}, A={A}")
            for lam in lambda_grid:
                k2 = K_max if K_max is not None else 4.0 * (A * A + abs(lam) + 1.0)
                sh = shells(spec, k2)
                sup, arg = _sup_over_shells(
                    lambda md: _inverse_norm(_shifted_block(gamma, md, M, lam, A, spec), md, s, s + gain),
                    sh, k2, tail_ratio, "inverse bound",
                )
                rows.append(BoundRow(float(gamma), float(A), complex(lam), float(s), sup, A**power * sup, arg))
    return rows


def inverse_bound_study(gamma_grid: Iterable[float], A_grid: Iterable[float],
                        lambda_grid: Iterable[complex] | None = None, s: float = 0.0,
                        spec: TorusSpec | None = None, K_max: float | None = None,
                        M: int = DEFAULT_M) -> list[BoundRow]:
    """``A * sup_k ||(P - lam + Q_A)^-1||_{H^s -> H^s}`` on a parameter grid.

    ``K_max`` defaults to ``4 (A^2 + |lam| + 1)``; the outer decile of shells
    must stay below half of the supremum.  A singular block yields ``inf``.
    """
    lambda_grid = default_lambda_grid() if lambda_grid is None else list(lambda_grid)
    return _bound_study(list(gamma_grid), list(A_grid), lambda_grid, s, spec, K_max, M, 0.0, 1.0, 0.5)


def regularity_bound_study(gamma_grid: Iterable[float], A_grid: Iterable[float],
                           lambda_grid: Iterable[complex] | None = None, s: float = 0.0,
                           spec: TorusSpec | None = None, K_max: float | None = None,
                           M: int = DEFAULT_M) -> list[BoundRow]:
    """``A^(1/2) * sup_k ||(P - lam + Q_A)^-1||_{H^s -> H^(s+1/4)}``."""
    lambda_grid = default_lambda_grid() if lambda_grid is None else list(lambda_grid)
    return _bound_study(list(gamma_grid), list(A_grid), lambda_grid, s, spec, K_max, M, 0.25, 0.5, 0.5)


@dataclass(frozen=True)
class RestrictedRow:
    h: float
    lam: complex
    s: float
    value: float
    argmax_norm2: float


def restricted_inverse_study(h_grid: Iterable[float], lambda_grid: Iterable[complex] | None = None,
                             modes: Iterable[HMode] | float = 9.0, s: float = 0.0,
                             spec: TorusSpec | None = None, M: int = DEFAULT_M,
                             h0: float = 0.1) -> list[RestrictedRow]:
    """Sup over ``modes`` of ``||(Pi-perp (P~_h - h^2 lam) Pi-perp)^-1||_{H^s}``.

    ``modes`` is either an explicit list or a bound on ``|kappa|^2``.
    """
    spec = spec or TorusSpec()
    lambda_grid = default_lambda_grid() if lambda_grid is None else list(lambda_grid)
    if isinstance(modes, (int, float)):
        modes = [sh.representative for sh in shells(spec, float(modes))]
    modes = list(modes)
    rows = []
    for h in h_grid:
        if not 0 < h < h0:
            raise ValueError(f"need 0 < h < {h0}, got {h}")
        for lam in lambda_grid:
            vals = []
            for md in modes:
                S = assemble_scaled_restricted(h, lam, md, M, spec)
                vals.append(_inverse_norm(S.entries, md, s, s, S.m))
            j = int(np.argmax(vals))
            rows.append(RestrictedRow(float(h), complex(lam), float(s), float(vals[j]), modes[j].norm2))
    return rows


def _distance_to_base(lam: complex, spec: TorusSpec) -> float:
    r = abs(lam) + 1.0
    return min(abs(lam - sh.norm2) for sh in shells(spec, max(r * r, abs(lam.real) + 1.0) + 1.0))


RESOLVENT_K0 = 400.0
RESOLVENT_K_CAP = 409600.0
RESOLVENT_TAIL = 0.1


def _resolvent_diff_profile(gamma, lam, s, spec, shell_list, M, gain, chunk=512):
    """Per-shell ``||D_k||_{H^s -> H^(s+gain)}`` evaluated in batches."""
    m = np.arange(-M, M + 1)
    out = np.empty(len(shell_list))
    check = lam.real >= 0.0  # the truncated generator is accretive, so Re lam < 0 is safe
    for a in range(0, len(shell_list), chunk):
        reps = [sh.representative for sh in shell_list[a:a + chunk]]
        blocks = np.stack([assemble_P(gamma, md, M, spec).entries for md in reps])
        if check:
            for md, blk in zip(reps, blocks):
                if np.min(np.abs(eigvals(blk) - lam)) < 1e-6:
                    raise SingularBlockError(f"lam={lam} within 1e-6 of an eigenvalue of mode {md.k}")
        blocks[:, np.arange(m.size), np.arange(m.size)] -= lam
        D = np.linalg.inv(blocks)
        q = np.array([md.norm2 for md in reps])
        D[:, M, M] -= 1.0 / (q - lam)
        w_in = (1.0 + q[:, None] + m[None, :] ** 2) ** (0.5 * s)
        w_out = (1.0 + q[:, None] + m[None, :] ** 2) ** (0.5 * (s + gain))
        D = w_out[:, :, None] * D / w_in[:, None, :]
        out[a:a + len(reps)] = np.linalg.svd(D, compute_uv=False)[:, 0]
    return out


def resolvent_diff_norm(gamma: float, lam: complex, s: float = 0.0, spec: TorusSpec | None = None,
                        K_max: float | None = None, M: int = DEFAULT_M, gain: float = 0.25) -> float:
    """``sup_k ||(P - lam)^-1 - R_0||_{H^s -> H^(s+1/4)}`` over ``|kappa|^2 <= K_max``.

    ``R_0`` is the base resolvent acting on the fibre-constant line:
    ``1 / (|kappa|^2 - lam)`` in the ``(0, 0)`` entry and zero elsewhere.
    The outer decile of shells must stay below a tenth of the supremum,
    otherwise :class:`TailError` is raised.  With ``K_max=None`` the ball is
    grown by factors of 4 from 400 until that holds (up to 409600).
    """
    spec = spec or TorusSpec()
    lam = complex(lam)
    if _distance_to_base(lam, spec) < 0.1:
        raise ValueError(f"lam={lam} is within 0.1 of the base spectrum")
    adaptive = K_max is None
    K = RESOLVENT_K0 if adaptive else float(K_max)
    done: list[Shell] = []
    vals = np.empty(0)
    while True:
        new = shells(spec, K, k2_min=done[-1].norm2 if done else None)
        vals = np.concatenate([vals, _resolvent_diff_profile(gamma, lam, s, spec, new, M, gain)])
        done += new
        norm2s = np.array([sh.norm2 for sh in done])
        if _tail_ok(norm2s, vals, K, RESOLVENT_TAIL):
            return float(vals.max())
        if not adaptive or 4.0 * K > RESOLVENT_K_CAP:
            raise TailError(f"resolvent difference: outer shells reach {vals[norm2s >= 0.9 * K].max():.3e} "
                            f"against sup {vals.max():.3e}; increase K_max beyond {K}")
        K *= 4.0


def qa_resolvent_diff(gamma: float, A: float, lam: complex, s: float = 0.0, N: float = 0.0,
                      spec: TorusSpec | None = None, M: int = DEFAULT_M) -> float:
    """``sup_k ||(P - lam + Q_A)^-1 Q_A - (Delta_M - lam + Q_A)^-1 Q_A||_{H^s -> H^(s+N)}``.

    Only modes with ``|kappa|^2 <= A^2`` contribute; the difference has a
    single nonzero column (``m = 0``).
    """
    spec = spec or TorusSpec()
    if not gamma > A > 0:
        raise ValueError(f"need gamma > A > 0, got gamma={gamma}, A={A}")
    lam = complex(lam)
    best = 0.0
    for sh in shells(spec, A * A):
        md = sh.representative
        q = absorbing_level(A, md)
        B = _shifted_block(gamma, md, M, lam, A, spec)
        e0 = np.zeros(2 * M + 1, dtype=complex)
        e0[M] = 1.0
        col = q * np.linalg.solve(B, e0)
        col[M] -= q / (md.norm2 - lam + q)
        D = np.zeros_like(B)
        D[:, M] = col
        best = max(best, weighted_opnorm(D, s, s + N, md))
    return best


Variant = Literal["plain", "withQ", "shifted"]


def subelliptic_constant(gamma: float, s: float = 0.0, gain: float = 0.25, B: float = 1.0,
                         A: float = 1.0, variant: Variant = "withQ", y: float = 0.0,
                         spec: TorusSpec | None = None, K_max: float = 400.0,
                         M: int = DEFAULT_M) -> float:
    """Empirical ``C^2`` in ``||u||^2_{s+gain} <= C^2 (B^-2 ||L u||^2_s + B^2 ||u||^2_s)``.

    ``L`` is ``P`` (``plain``), ``P + Q_A`` (``withQ``) or ``P - i y``
    (``shifted``).  Per mode this is the top eigenvalue of the Hermitian
    pencil ``(W_{s+gain}^2, B^-2 L^H W_s^2 L + B^2 W_s^2)``.
    """
    spec = spec or TorusSpec()
    if not B > 0:
        raise ValueError("B must be positive")
    if variant == "withQ" and not gamma > A + B * B:
        raise ValueError(f"withQ needs gamma > A + B^2, got gamma={gamma}, A={A}, B={B}")
    if variant not in ("plain", "withQ", "shifted"):
        raise ValueError(f"unknown variant {variant!r}")
    m = np.arange(-M, M + 1)

    def per_mode(md):
        L = assemble_P(gamma, md, M, spec).entries.copy()
        if variant == "withQ":
            L[M, M] += absorbing_level(A, md)
        elif variant == "shifted":
            L[np.diag_indices_from(L)] -= 1j * y
        w_s2 = sobolev_diag(2 * s, md, m)
        w_g2 = sobolev_diag(2 * (s + gain), md, m)
        rhs = (L.conj().T * w_s2[None, :]) @ L / B**2 + B**2 * np.diag(w_s2)
        rhs = 0.5 * (rhs + rhs.conj().T)
        try:
            top = sla.eigh(np.diag(w_g2).astype(complex), rhs, eigvals_only=True,
                           subset_by_index=[m.size - 1, m.size - 1])
        except np.linalg.LinAlgError as exc:
            raise KbmError(f"pencil not positive definite for mode {md.k}") from exc
        return float(top[0])

    sup, _ = _sup_over_shells(per_mode, shells(spec, K_max), K_max, 0.5, "subelliptic constant")
    return sup
