"""Monte-Carlo simulation of kinetic Brownian motion on the unit tangent
bundle of the flat torus.

The direction angle is a Brownian motion with variance ``gamma^2 t`` (the
fibre part ``c_n gamma^2 Delta_V`` with ``2 c_n = 1``) and the position moves
with speed ``gamma`` along it.  Each path draws from its own counter-based
stream ``Philox(key=(seed, path_index))``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import integrate, stats

from .io import write_csv
from .model import TorusSpec

STEP_CHUNK = 1 << 16
PATH_BLOCK = 64
MAX_STEPS = 10**7
FIGURE_GAMMAS = (1e-2, 10.0, 1e4)


def dt_cap(gamma: float) -> float:
    return min(0.1 / gamma**2, 0.1 / gamma)


@dataclass(frozen=True)
class SdeConfig:
    """Simulation parameters.

    ``dt=None`` picks ``min(0.1/gamma^2, 0.1/gamma, T/1000)``.  A step above
    the cap is rejected unless ``allow_large_dt`` is set; ``dt_overridden``
    then records it.  ``record_every`` thins the stored time grid.
    """

    gamma: float
    T: float = 1.0
    n_paths: int = 1
    seed: int = 0
    dt: float | None = None
    spec: TorusSpec = field(default_factory=TorusSpec)
    record_every: int = 1
    allow_large_dt: bool = False
    dt_overridden: bool = field(default=False, init=False)

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be positive, got {self.gamma!r}")
        if not (math.isfinite(self.T) and self.T > 0):
            raise ValueError(f"T must be positive, got {self.T!r}")
        if int(self.n_paths) < 1:
            raise ValueError("n_paths must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if int(self.record_every) < 1:
            raise ValueError("record_every must be >= 1")
        dt = self.dt if self.dt is not None else min(dt_cap(self.gamma), self.T / 1000.0)
        if not (math.isfinite(dt) and dt > 0):
            raise ValueError(f"dt must be positive, got {dt!r}")
        over = dt > dt_cap(self.gamma) * (1 + 1e-12)
        if over and not self.allow_large_dt:
            raise ValueError(f"dt={dt} exceeds min(0.1/gamma^2, 0.1/gamma)={dt_cap(self.gamma)}; "
                             "set allow_large_dt to override")
        object.__setattr__(self, "dt", float(dt))
        object.__setattr__(self, "dt_overridden", bool(over))

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def record_index(self) -> np.ndarray:
        idx = np.arange(0, self.n_steps + 1, self.record_every)
        return idx if idx[-1] == self.n_steps else np.append(idx, self.n_steps)

    @property
    def times(self) -> np.ndarray:
        return self.record_index * self.dt


def path_rng(seed: int, path_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, path_index], dtype=np.uint64)))


@dataclass
class Trajectory:
    """One sample path on the universal cover, stored at ``times``."""

    config: SdeConfig
    path_index: int
    times: np.ndarray
    positions: np.ndarray  # (n, 2), unwrapped
    angles: np.ndarray     # unwrapped

    def wrapped(self) -> np.ndarray:
        return np.mod(self.positions, np.asarray(self.config.spec.lengths))

    def to_csv(self, path: str | Path) -> Path:
        rows = zip(self.times, self.positions[:, 0], self.positions[:, 1], self.angles)
        return write_csv(path, ["t", "x_unwrapped", "y_unwrapped", "theta"], rows)


def simulate_path(config: SdeConfig, path_index: int) -> Trajectory:
    """Euler-Maruyama path: ``theta += gamma sqrt(dt) xi``, ``x += gamma dt (cos, sin)(theta)``.

    The position update uses the angle at the start of the step.
    """
    rng = path_rng(config.seed, path_index)
    g, dt = config.gamma, config.dt
    L = np.asarray(config.spec.lengths)
    x = rng.uniform(0.0, 1.0, 2) * L
    theta = rng.uniform(0.0, 2 * math.pi)
    rec = config.record_index
    n = config.n_steps
    pos = np.empty((rec.size, 2))
    ang = np.empty(rec.size)
    pos[0], ang[0] = x, theta
    r = 1
    sig, speed = g * math.sqrt(dt), g * dt
    for start in range(0, n, STEP_CHUNK):
        c = min(STEP_CHUNK, n - start)
        dth = sig * rng.standard_normal(c)
        th = np.empty(c + 1)
        th[0] = theta
        np.cumsum(dth, out=th[1:])
        th[1:] += theta
        cx = np.cumsum(np.cos(th[:-1])) * speed + x[0]
        cy = np.cumsum(np.sin(th[:-1])) * speed + x[1]
        # record points falling inside (start, start + c]
        hi = np.searchsorted(rec, start + c, side="right")
        sel = rec[r:hi] - start  # step counts 1..c within the chunk
        pos[r:hi, 0] = cx[sel - 1]
        pos[r:hi, 1] = cy[sel - 1]
        ang[r:hi] = th[sel]
        r = hi
        x = np.array([cx[-1], cy[-1]])
        theta = th[-1]
    return Trajectory(config, path_index, config.times, pos, ang)


@dataclass
class EnsembleStats:
    t: np.ndarray
    msd: np.ndarray
    msd_se: np.ndarray
    vacf: np.ndarray
    vacf_se: np.ndarray
    angular_var: np.ndarray
    n_paths: int

    def to_csv(self, path: str | Path) -> Path:
        rows = zip(self.t, self.msd, self.msd_se, self.vacf, self.vacf_se, self.angular_var)
        return write_csv(path, ["t", "msd", "msd_se", "vacf", "vacf_se", "angvar"], rows)


def _block_sums(config: SdeConfig, lo: int, hi: int) -> np.ndarray:
    """Sums of (d2, d2^2, c, c^2, a, a^2) over paths lo..hi-1 in index order."""
    out = np.zeros((6, config.record_index.size))
    for p in range(lo, hi):
        tr = simulate_path(config, p)
        d = tr.positions - tr.positions[0]
        d2 = d[:, 0] ** 2 + d[:, 1] ** 2
        a = tr.angles - tr.angles[0]
        c = config.gamma**2 * np.cos(a)
        out += np.stack([d2, d2 * d2, c, c * c, a, a * a])
    return out


def ensemble_stats(config: SdeConfig, workers: int = 1) -> EnsembleStats:
    """Mean-square displacement, velocity autocorrelation and angular variance.

    Paths are processed in fixed blocks and the block sums are added in
    block order, so the result does not depend on ``workers``.
    """
    n = int(config.n_paths)
    if n < 100:
        raise ValueError(f"ensemble statistics need n_paths >= 100, got {n}")
    blocks = [(lo, min(lo + PATH_BLOCK, n)) for lo in range(0, n, PATH_BLOCK)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _block_sums(config, *b), blocks))
    else:
        parts = [_block_sums(config, *b) for b in blocks]
    S = np.zeros_like(parts[0])
    for part in parts:
        S += part
    mean = S[0::2] / n
    var = np.maximum(S[1::2] / n - mean**2, 0.0) * n / (n - 1)
    se = np.sqrt(var / n)
    msd, vacf, _ = mean
    angvar = var[2]
    return EnsembleStats(config.times, msd, se[0], vacf, se[1], angvar, n)


def vacf_oracle(t, gamma: float) -> np.ndarray:
    """``gamma^2 E cos(W)`` with ``W ~ N(0, gamma^2 t)``, by quadrature of the normal law."""

    def one(s):
        if s == 0:
            return gamma**2
        sd = gamma * math.sqrt(s)
        val, _ = integrate.quad(lambda w: math.cos(w) * stats.norm.pdf(w, scale=sd),
                                -12 * sd, 12 * sd, limit=400, epsabs=1e-13)
        return gamma**2 * val

    return np.array([one(float(s)) for s in np.atleast_1d(t)])


def msd_oracle(t, gamma: float) -> np.ndarray:
    """``2 int_0^t (t - s) vacf(s) ds`` by quadrature."""

    def vacf(s):
        return gamma**2 * math.exp(-0.5 * gamma**2 * s)

    out = []
    for ti in np.atleast_1d(t):
        ti = float(ti)
        val, _ = integrate.quad(lambda s: (ti - s) * vacf(s), 0.0, ti, limit=400,
                                points=[min(ti, 10.0 / gamma**2)])
        out.append(2.0 * val)
    return np.array(out)


def figure1_panels(gammas=FIGURE_GAMMAS, T: float = 1.0, seed: int = 0,
                   spec: TorusSpec | None = None, max_steps: int = MAX_STEPS,
                   max_points: int = 20000) -> list[Trajectory]:
    """One wrapped-ready path per ``gamma``; horizons are cut so each path has at most ``max_steps`` steps.

    The horizon actually used is ``trajectory.config.T``.
    """
    spec = spec or TorusSpec()
    panels = []
    for g in gammas:
        base = SdeConfig(float(g), T=T, seed=seed, spec=spec)
        Tg = T
        if base.n_steps > max_steps:
            Tg = max_steps * base.dt
            base = SdeConfig(float(g), T=Tg, seed=seed, spec=spec, dt=base.dt)
        stride = max(1, -(-base.n_steps // max_points))
        panels.append(simulate_path(replace(base, record_every=stride), 0))
    return panels
