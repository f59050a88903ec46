"""Geometry of the flat torus, Fourier-mode bookkeeping and Sobolev weights.

The unit tangent bundle of the flat torus ``R^2 / (L1 Z x L2 Z)`` is
``T^2 x S^1``.  Functions are expanded as

    u(x, theta) = sum_{k, m} c_{k,m} exp(i kappa . x) exp(i m theta),
    kappa_j = 2 pi k_j / L_j,

and every operator in this package is block diagonal over the horizontal
index ``k``.  Inside a block the vertical index runs over ``-M..M``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class TorusSpec:
    """Flat 2-torus with side lengths ``lengths``.

    ``n`` is kept explicit so that other bases can be slotted in later;
    only ``n == 2`` (circle fibres) is implemented.
    """

    lengths: tuple[float, float] = (TWO_PI, TWO_PI)
    n: int = 2

    def __post_init__(self):
        if self.n != 2:
            raise NotImplementedError(
                f"only the 2-torus (n=2, circle fibres) is implemented, got n={self.n}"
            )
        lengths = tuple(float(x) for x in self.lengths)
        if len(lengths) != 2 or not all(math.isfinite(x) and x > 0 for x in lengths):
            raise ValueError(f"lengths must be two positive reals, got {self.lengths!r}")
        object.__setattr__(self, "lengths", lengths)

    @property
    def c_n(self) -> float:
        return 1.0 / (self.n * (self.n - 1))

    def mode(self, k) -> "HMode":
        return HMode.from_index(k, self)

    def kappa(self, k) -> tuple[float, float]:
        return (TWO_PI * k[0] / self.lengths[0], TWO_PI * k[1] / self.lengths[1])

    def lattice_bounds(self, k2_max: float) -> tuple[int, int]:
        """Index box ``|k_j| <= ceil(sqrt(k2_max) L_j / 2pi) + 1`` covering the ball."""
        r = math.sqrt(max(k2_max, 0.0))
        return tuple(int(math.ceil(r * L / TWO_PI)) + 1 for L in self.lengths)


@dataclass(frozen=True)
class HMode:
    """Horizontal Fourier mode ``exp(i kappa . x)``."""

    k: tuple[int, int]
    kappa: tuple[float, float]

    @classmethod
    def from_index(cls, k, spec: TorusSpec | None = None) -> "HMode":
        spec = spec or TorusSpec()
        k = (int(k[0]), int(k[1]))
        return cls(k, spec.kappa(k))

    @property
    def norm2(self) -> float:
        """``|kappa|^2``, the eigenvalue of the base Laplacian on this mode."""
        return self.kappa[0] ** 2 + self.kappa[1] ** 2

    def __neg__(self) -> "HMode":
        return HMode((-self.k[0], -self.k[1]), (-self.kappa[0], -self.kappa[1]))


@dataclass(frozen=True)
class VIndexRange:
    """Vertical indices ``m = -M..M`` labelling the fibre harmonics ``exp(i m theta)``."""

    M: int

    def __post_init__(self):
        if int(self.M) < 1:
            raise ValueError(f"vertical truncation must be >= 1, got {self.M}")

    @property
    def m(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1)

    @property
    def size(self) -> int:
        return 2 * self.M + 1

    def eigenvalues(self) -> np.ndarray:
        # |m|(|m| + n - 2) with n = 2
        return self.m.astype(float) ** 2

    def position(self, m: int) -> int:
        return int(m) + self.M


@dataclass(frozen=True)
class SpectralWindow:
    """Closed rectangle ``[re_min, re_max] x [im_min, im_max]`` in the complex plane."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError(f"degenerate spectral window {self!r}")

    def contains(self, z) -> np.ndarray | bool:
        z = np.asarray(z)
        ok = (
            (z.real >= self.re_min)
            & (z.real <= self.re_max)
            & (z.imag >= self.im_min)
            & (z.imag <= self.im_max)
        )
        return bool(ok) if ok.ndim == 0 else ok

    def boundary_distance(self, z) -> np.ndarray | float:
        """Signed distance to the boundary; positive inside."""
        z = np.asarray(z)
        d = np.minimum.reduce(
            [
                z.real - self.re_min,
                self.re_max - z.real,
                z.imag - self.im_min,
                self.im_max - z.imag,
            ]
        )
        return float(d) if np.ndim(d) == 0 else d

    def interior(self, z, margin: float) -> np.ndarray | bool:
        d = np.asarray(self.boundary_distance(z)) > margin
        return bool(d) if d.ndim == 0 else d

    def corners(self) -> list[complex]:
        """Counter-clockwise corners starting at the lower left."""
        return [
            complex(self.re_min, self.im_min),
            complex(self.re_max, self.im_min),
            complex(self.re_max, self.im_max),
            complex(self.re_min, self.im_max),
        ]


@dataclass(frozen=True)
class SobolevParams:
    s: float = 0.0

    def weight(self, mode: HMode, m) -> np.ndarray | float:
        return sobolev_weight(self.s, mode, m)


def sobolev_weight(s: float, mode: HMode, m):
    """``(1 + |kappa|^2 + m^2)^(s/2)``; ``m`` may be an integer or an array."""
    m = np.asarray(m, dtype=float)
    w = (1.0 + mode.norm2 + m * m) ** (0.5 * s)
    return float(w) if w.ndim == 0 else w


def iter_modes(spec: TorusSpec, k2_max: float, k2_min: float | None = None) -> Iterator[HMode]:
    """Modes with ``k2_min < |kappa|^2 <= k2_max`` in lexicographic order of ``k``.

    With ``k2_min=None`` the lower bound is dropped (``k = 0`` included).
    """
    b1, b2 = spec.lattice_bounds(k2_max)
    for k1 in range(-b1, b1 + 1):
        for k2 in range(-b2, b2 + 1):
            mode = HMode.from_index((k1, k2), spec)
            q = mode.norm2
            if q <= k2_max and (k2_min is None or q > k2_min):
                yield mode


def _group_values(values: np.ndarray, rtol: float = 1e-12) -> list[tuple[float, int]]:
    out: list[tuple[float, int]] = []
    for v in np.sort(values):
        if out and abs(v - out[-1][0]) <= rtol * max(1.0, abs(v)):
            out[-1] = (out[-1][0], out[-1][1] + 1)
        else:
            out.append((float(v), 1))
    return out


@dataclass(frozen=True)
class Shell:
    """All lattice modes sharing one value of ``|kappa|^2``."""

    norm2: float
    representative: HMode
    indices: tuple[tuple[int, int], ...] = field(repr=False)

    @property
    def multiplicity(self) -> int:
        return len(self.indices)

    def modes(self, spec: TorusSpec) -> list[HMode]:
        return [HMode.from_index(k, spec) for k in self.indices]


def shells(spec: TorusSpec, k2_max: float, k2_min: float | None = None) -> list[Shell]:
    """Lattice modes with ``k2_min < |kappa|^2 <= k2_max`` grouped by ``|kappa|^2`` (ascending).

    Rotating the fibre angle by the polar angle of ``kappa`` is the diagonal
    unitary ``diag(exp(i m phi))``; it maps the block of mode ``k`` onto the
    block of any other mode with the same ``|kappa|``, and it commutes with
    Sobolev weights and with every operator that is diagonal in ``m``.  Norms
    and spectra of per-mode blocks are therefore shell invariants, and the
    representative (lexicographically smallest ``k``) stands for the shell.
    """
    b1, b2 = spec.lattice_bounds(k2_max)
    k1, k2 = np.meshgrid(np.arange(-b1, b1 + 1), np.arange(-b2, b2 + 1), indexing="ij")
    k1, k2 = k1.ravel(), k2.ravel()
    q = (TWO_PI * k1 / spec.lengths[0]) ** 2 + (TWO_PI * k2 / spec.lengths[1]) ** 2
    keep = q <= k2_max
    if k2_min is not None:
        keep &= q > k2_min
    k1, k2, q = k1[keep], k2[keep], q[keep]
    order = np.lexsort((k2, k1, q))
    k1, k2, q = k1[order], k2[order], q[order]
    if q.size == 0:
        return []
    new = np.empty(q.size, dtype=bool)
    new[0] = True
    new[1:] = np.abs(np.diff(q)) > 1e-12 * np.maximum(1.0, q[1:])
    starts = np.flatnonzero(new)
    ends = np.append(starts[1:], q.size)
    out = []
    for a, b in zip(starts, ends):
        rep = HMode.from_index((k1[a], k2[a]), spec)
        out.append(Shell(rep.norm2, rep, tuple(zip(k1[a:b].tolist(), k2[a:b].tolist()))))
    return out


def base_spectrum(spec: TorusSpec, window: SpectralWindow) -> list[tuple[float, int]]:
    """Eigenvalues of the base Laplacian inside ``window`` with multiplicities.

    The spectrum is real, so nothing is returned unless ``0`` lies in
    ``[im_min, im_max]``.
    """
    if not (window.im_min <= 0.0 <= window.im_max) or window.re_max < 0.0:
        return []
    vals = np.array([md.norm2 for md in iter_modes(spec, window.re_max)])
    vals = vals[vals >= window.re_min]
    return _group_values(vals)


def expand_multiplicities(spectrum: list[tuple[float, int]]) -> np.ndarray:
    return np.array([v for v, mult in spectrum for _ in range(mult)], dtype=float)
