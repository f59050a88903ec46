"""Window sweeps over horizontal modes and multiplicity-aware matching."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..assembly import assemble_P
from ..errors import AccretivityError, WindingError
from ..linalg import DEFAULT_CEILING, DRIFT_TOL, TruncationReport, match_sets, truncation_search
from ..model import HMode, SpectralWindow, TorusSpec, base_spectrum, expand_multiplicities, iter_modes
from .grushin import grushin_zero_count

ACCRETIVE_TOL = 1e-8
MATCH_MARGIN = 1e-3


def accretivity_violation(lam: complex) -> bool:
    return lam.real < -ACCRETIVE_TOL * max(1.0, abs(lam))


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("KBM_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class EigenItem:
    lam: complex
    mode: HMode
    residual: float
    truncation: TruncationReport = field(repr=False)


@dataclass
class EigenSet:
    gamma: float
    window: SpectralWindow
    items: list[EigenItem]
    horizontal_cutoff: float
    tail_certified: bool
    tail_failures: list[tuple[tuple[int, int], str]] = field(default_factory=list)

    @property
    def values(self) -> np.ndarray:
        return np.array([it.lam for it in self.items], dtype=complex)

    @property
    def all_converged(self) -> bool:
        return all(it.truncation.converged for it in self.items)

    def accretivity_violations(self) -> list[EigenItem]:
        return [it for it in self.items if accretivity_violation(it.lam)]


def _sweep_mode(gamma, mode, window, spec, tol, M0, ceiling):
    report = truncation_search(
        lambda M: assemble_P(gamma, mode, M, spec).entries, window, tol, M0, ceiling, mode=mode
    )
    return mode, report


def _tail_check(gamma, mode, M, window, spec):
    try:
        count = grushin_zero_count(gamma, mode, M, 0.0, window, spec)
    except WindingError as exc:
        return mode, f"winding failed: {exc}"
    return mode, None if count == 0 else f"{count} zero(s) in window"


def spectrum_window(
    gamma: float,
    window: SpectralWindow,
    spec: TorusSpec | None = None,
    tol: float = DRIFT_TOL,
    M0: int = 8,
    ceiling: int = DEFAULT_CEILING,
    workers: int | None = None,
) -> EigenSet:
    """Eigenvalues of the kinetic generator inside ``window``.

    Modes with ``|kappa|^2 <= 4 (re_max + 1)`` are eigensolved with adaptive
    truncation; the shell out to four times that cutoff is certified free of
    eigenvalues by counting zeros of the Schur-complement scalar.  A
    truncation failure raises :class:`TruncationError`; a tail failure is
    reported through ``tail_certified`` and ``tail_failures``.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma!r}")
    spec = spec or TorusSpec()
    workers = workers or default_workers()
    cutoff = 4.0 * (max(window.re_max, 0.0) + 1.0)
    modes = list(iter_modes(spec, cutoff))

    def run(fn, args):
        if workers == 1:
            return [fn(*a) for a in args]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda a: fn(*a), args))

    results = run(_sweep_mode, [(gamma, md, window, spec, tol, M0, ceiling) for md in modes])
    items: list[EigenItem] = []
    M_tail = M0
    for mode, report in results:
        M_tail = max(M_tail, report.M_check)
        for pair in report.in_window(window):
            items.append(EigenItem(pair.value, mode, pair.residual, report))
    items.sort(key=lambda it: (it.mode.k, it.lam.real, it.lam.imag))

    bad = [it for it in items if accretivity_violation(it.lam)]
    if bad:
        raise AccretivityError(f"eigenvalue {bad[0].lam} of mode {bad[0].mode.k} has negative real part")

    tail_modes = list(iter_modes(spec, 4.0 * cutoff, k2_min=cutoff))
    checks = run(_tail_check, [(gamma, md, M_tail, window, spec) for md in tail_modes])
    failures = [(md.k, why) for md, why in checks if why is not None]
    return EigenSet(float(gamma), window, items, cutoff, not failures, failures)


@dataclass
class MatchReport:
    pairs: list[tuple[complex, float, float]]
    unmatched_P: list[complex]
    unmatched_base: list[float]
    hausdorff: float

    @property
    def n_matched(self) -> int:
        return len(self.pairs)

    @property
    def n_unmatched(self) -> int:
        return len(self.unmatched_P) + len(self.unmatched_base)


def match_values(found, base, window: SpectralWindow, margin: float = MATCH_MARGIN) -> MatchReport:
    """Optimal assignment between ``found`` (complex) and the expanded ``base`` list.

    Points closer than ``margin`` to the window boundary are ignored on both
    sides.  The distance is the largest paired distance when every point is
    matched and ``inf`` otherwise.
    """
    if not margin > 0:
        raise ValueError("margin must be positive")
    found = np.asarray(found, dtype=complex)
    base = np.asarray(base, dtype=float)
    found = found[window.interior(found, margin)] if found.size else found
    base = base[window.interior(base.astype(complex), margin)] if base.size else base
    r, c, d = match_sets(found, base)
    pairs = [(complex(found[i]), float(base[j]), float(dist)) for i, j, dist in zip(r, c, d)]
    pairs.sort(key=lambda p: (p[1], p[0].real, p[0].imag))
    un_p = sorted((complex(found[i]) for i in set(range(found.size)) - set(r.tolist())),
                  key=lambda z: (z.real, z.imag))
    un_b = sorted(float(base[j]) for j in set(range(base.size)) - set(c.tolist()))
    if un_p or un_b:
        haus = math.inf
    else:
        haus = max((p[2] for p in pairs), default=0.0)
    return MatchReport(pairs, un_p, un_b, haus)


def match_spectra(found: EigenSet, spec: TorusSpec | None = None, margin: float = MATCH_MARGIN) -> MatchReport:
    spec = spec or TorusSpec()
    base = expand_multiplicities(base_spectrum(spec, found.window))
    return match_values(found.values, base, found.window, margin)
