"""Command-line driver: ``kbmlab <subcommand> [flags]``.

Every run writes CSV tables, optional SVG plots and a ``manifest.json``
into ``--out``.  Settings come from the built-in defaults, then from the
optional TOML file given by ``--config`` (top-level keys or a table named
after the subcommand), then from flags.

Exit codes: 0 success, 2 certification or validation failure, 1 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from . import sde
from .errors import KbmError, TruncationError
from .io import sha256_file, write_csv, write_json
from .model import SpectralWindow, TorusSpec
from .semigroup import StateVector, equilibrium_decay, spectral_gap
from .spectra.bounds import DEFAULT_M, qa_resolvent_diff, resolvent_diff_norm, subelliptic_constant
from .spectra.sweep import default_workers, match_spectra, spectrum_window
from .svg import Panel, write_svg

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK, EXIT_INTERNAL, EXIT_FAIL = 0, 1, 2

DEFAULTS = {
    "spectrum": dict(gamma=100.0, window=[-0.5, 4.5, -1.0, 1.0], tol=1e-8, M0=8, ceiling=512),
    "converge": dict(gammas=[10.0, 30.0, 100.0, 300.0], window=[-0.5, 4.5, -1.0, 1.0], tol=1e-8,
                     M0=8, ceiling=512, svg=False),
    "resolvent": dict(gammas=[10.0, 30.0, 100.0, 300.0, 1000.0], lam=[-1.0, 0.0], s=0.0, K_max=None,
                      M=DEFAULT_M, qa_A=None, N=0.0, svg=False),
    "gap": dict(gammas=[100.0], beta=0.9, t_grid=[1.0, 5.0, 9], state="random", seed=0,
                state_K=16.0, state_M=16),
    "hypo": dict(gammas=[20.0, 50.0, 100.0], variant="withQ", s=0.0, gain=0.25, B=None, B_exp=0.125,
                 A=None, A_exp=0.25, ys=[0.0], K_max=400.0, M=DEFAULT_M),
    "simulate": dict(gamma=10.0, T=1.0, n_paths=1, seed=0, dt=None, allow_large_dt=False,
                     record_every=1, figure1=False, figure1_gammas=list(sde.FIGURE_GAMMAS), svg=False),
}
COMMON = dict(out="out", lengths=[2 * math.pi, 2 * math.pi])


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


class Run:
    """Collects outputs and notes for the manifest of one invocation."""

    def __init__(self, name: str, cfg: dict):
        self.name = name
        self.cfg = cfg
        self.out = Path(cfg["out"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []
        self.notes: dict = {}
        self.seeds: list[int] = []
        self.t0 = time.perf_counter()

    @property
    def spec(self) -> TorusSpec:
        return TorusSpec(tuple(self.cfg["lengths"]))

    def csv(self, name, header, rows) -> Path:
        p = write_csv(self.out / name, header, rows)
        self.files.append(p)
        return p

    def svg(self, name, panels, **kw) -> Path:
        p = write_svg(self.out / name, panels, **kw)
        self.files.append(p)
        return p

    def manifest(self, status: int, error: str | None = None) -> Path:
        outputs = [{"path": p.name, "sha256": sha256_file(p)} for p in self.files]
        combined = hashlib.sha256("".join(o["sha256"] for o in outputs).encode()).hexdigest()
        return write_json(self.out / "manifest.json", {
            "subcommand": self.name,
            "config": self.cfg,
            "seeds": self.seeds,
            "version": _version(),
            "wall_time_s": round(time.perf_counter() - self.t0, 3),
            "outputs": outputs,
            "outputs_sha256": combined,
            "exit_code": status,
            "error": error,
            "notes": self.notes,
        })


def _window(vals) -> SpectralWindow:
    return SpectralWindow(*map(float, vals))


def cmd_spectrum(run: Run) -> int:
    c = run.cfg
    window = _window(c["window"])
    try:
        found = spectrum_window(c["gamma"], window, run.spec, c["tol"], c["M0"], c["ceiling"])
    except TruncationError as exc:
        run.notes["failing_modes"] = [list(exc.mode.k)] if exc.mode is not None else []
        raise
    run.csv("spectrum.csv", ["k1", "k2", "re", "im", "residual", "M_used"],
            [(it.mode.k[0], it.mode.k[1], it.lam.real, it.lam.imag, it.residual, it.truncation.M_used)
             for it in found.items])
    rep = match_spectra(found, run.spec)
    rows = [(z.real, z.imag, b, d) for z, b, d in rep.pairs]
    rows += [(z.real, z.imag, math.nan, math.inf) for z in rep.unmatched_P]
    rows += [(math.nan, math.nan, b, math.inf) for b in rep.unmatched_base]
    run.csv("match.csv", ["lambda_P_re", "lambda_P_im", "lambda_base", "distance"], rows)
    run.notes.update(n_eigenvalues=len(found.items), hausdorff=rep.hausdorff,
                     tail_certified=found.tail_certified, horizontal_cutoff=found.horizontal_cutoff,
                     failing_modes=[list(k) for k, _ in found.tail_failures])
    ok = found.tail_certified and found.all_converged
    if not ok:
        print(f"certification failed for modes {run.notes['failing_modes']}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_converge(run: Run) -> int:
    c = run.cfg
    window = _window(c["window"])
    rows, certified = [], True
    for g in c["gammas"]:
        found = spectrum_window(g, window, run.spec, c["tol"], c["M0"], c["ceiling"])
        rep = match_spectra(found, run.spec)
        certified &= found.tail_certified and found.all_converged
        rows.append((float(g), rep.hausdorff, rep.n_matched, rep.n_unmatched))
    run.csv("converge.csv", ["gamma", "hausdorff", "n_matched", "n_unmatched"], rows)
    d = [r[1] for r in rows]
    run.notes["monotone_decrease"] = bool(all(b < a for a, b in zip(d, d[1:])))
    run.notes["certified"] = bool(certified)
    if c["svg"]:
        run.svg("converge.svg", [Panel("spectral distance", [(np.array([r[0] for r in rows]), np.array(d), "")],
                                       "gamma", "Hausdorff distance", logx=True, logy=True, markers=True)])
    ok = certified and (not rows or rows[-1][3] == 0)
    return EXIT_OK if ok else EXIT_FAIL


def loglog_slope(x, y) -> tuple[float, float]:
    x, y = np.asarray(x, float), np.asarray(y, float)
    if x.size < 2:
        return math.nan, math.nan
    slope, icept = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope), float(icept)


def cmd_resolvent(run: Run) -> int:
    c = run.cfg
    lam = complex(*c["lam"])
    vals = [resolvent_diff_norm(g, lam, c["s"], run.spec, c["K_max"], c["M"]) for g in c["gammas"]]
    run.csv("resolvent.csv", ["gamma", "value"], zip(map(float, c["gammas"]), vals))
    slope, icept = loglog_slope(c["gammas"], vals)
    run.csv("resolvent_fit.csv", ["slope", "intercept", "n_points"], [(slope, icept, len(vals))])
    run.notes["slope"] = slope
    if c["qa_A"] is not None:
        A = float(c["qa_A"])
        qa = [qa_resolvent_diff(g, A, lam, c["s"], c["N"], run.spec, c["M"]) for g in c["gammas"]]
        run.csv("qa_resolvent.csv", ["gamma", "A", "value", "value_gamma_over_A3"],
                [(float(g), A, v, v * g / A**3) for g, v in zip(c["gammas"], qa)])
    if c["svg"]:
        run.svg("resolvent.svg", [Panel("resolvent difference", [(np.array(c["gammas"], float), np.array(vals), "")],
                                        "gamma", "norm", logx=True, logy=True, markers=True)])
    return EXIT_OK


def cmd_gap(run: Run) -> int:
    c = run.cfg
    t0, t1, n = c["t_grid"]
    t = np.linspace(float(t0), float(t1), int(n))
    if c["state"] == "random":
        u = StateVector.random_smooth(c["state_K"], c["state_M"], c["seed"], run.spec)
        run.seeds.append(int(c["seed"]))
    elif c["state"] == "constant":
        u = StateVector.constant(c["state_M"], run.spec)
    else:
        raise ValueError(f"unknown state {c['state']!r} (random or constant)")
    gaps, rem_rows, exp_rows, ok = [], [], [], True
    for g in c["gammas"]:
        gaps.append((float(g), spectral_gap(g, run.spec)))
        rep = equilibrium_decay(g, u, t, c["beta"])
        rem_rows += [(float(g), ti, r) for ti, r in zip(rep.t, rep.remainder_norms)]
        exp_rows.append((float(g), rep.beta, rep.fitted_rate, rep.envelope_constant, len(rep.retained)))
        ok &= rep.fitted_rate >= rep.beta
    run.csv("gap.csv", ["gamma", "gap"], gaps)
    run.csv("remainder.csv", ["gamma", "t", "remainder"], rem_rows)
    run.csv("expansion.csv", ["gamma", "beta", "fitted_rate", "envelope_constant", "n_retained"], exp_rows)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_hypo(run: Run) -> int:
    c = run.cfg
    rows = []
    for g in c["gammas"]:
        B = float(c["B"]) if c["B"] is not None else g ** c["B_exp"]
        A = float(c["A"]) if c["A"] is not None else g ** c["A_exp"]
        for y in c["ys"]:
            C2 = subelliptic_constant(g, c["s"], c["gain"], B, A, c["variant"], y, run.spec, c["K_max"], c["M"])
            rows.append((float(g), A, B, float(y), c["variant"], c["gain"], c["s"], C2))
    run.csv("hypo.csv", ["gamma", "A", "B", "y", "variant", "gain", "s", "C2"], rows)
    vals = np.array([r[-1] for r in rows])
    run.notes["variation_factor"] = float(vals.max() / vals.min())
    return EXIT_OK


def cmd_simulate(run: Run) -> int:
    c = run.cfg
    run.seeds.append(int(c["seed"]))
    workers = default_workers()
    if c["figure1"]:
        panels = sde.figure1_panels(c["figure1_gammas"], c["T"], c["seed"], run.spec)
        run.notes["horizons"] = {f"{tr.config.gamma:g}": tr.config.T for tr in panels}
        run.notes["dt"] = {f"{tr.config.gamma:g}": tr.config.dt for tr in panels}
        for tr in panels:
            w = tr.wrapped()
            run.csv(f"figure1_gamma_{tr.config.gamma:g}.csv", ["t", "x_unwrapped", "y_unwrapped", "theta",
                                                               "x_wrapped", "y_wrapped"],
                    zip(tr.times, tr.positions[:, 0], tr.positions[:, 1], tr.angles, w[:, 0], w[:, 1]))
        L = run.spec.lengths
        run.svg("figure1.svg", [Panel(f"gamma = {tr.config.gamma:g}", [(tr.wrapped()[:, 0], tr.wrapped()[:, 1], "")],
                                      "x", "y", xlim=(0, L[0]), ylim=(0, L[1])) for tr in panels],
                break_jumps=0.5 * min(L))
        return EXIT_OK
    cfg = sde.SdeConfig(c["gamma"], c["T"], c["n_paths"], c["seed"], c["dt"], run.spec,
                        c["record_every"], c["allow_large_dt"])
    run.notes.update(dt=cfg.dt, dt_overridden=cfg.dt_overridden, n_steps=cfg.n_steps)
    if cfg.n_paths < 100:
        for p in range(cfg.n_paths):
            tr = sde.simulate_path(cfg, p)
            run.files.append(tr.to_csv(run.out / f"trajectory_{p}.csv"))
        return EXIT_OK
    st = sde.ensemble_stats(cfg, workers)
    run.files.append(st.to_csv(run.out / "stats.csv"))
    exact = sde.msd_oracle(st.t, cfg.gamma)
    m = st.t >= min(0.1, cfg.T / 2)
    run.notes["msd_max_rel_err"] = float(np.max(np.abs(st.msd[m] / exact[m] - 1))) if m.any() else None
    if c["svg"]:
        run.svg("stats.svg", [Panel("mean-square displacement", [(st.t, st.msd, "Monte Carlo"), (st.t, exact, "exact")],
                                    "t", "msd")])
    return EXIT_OK


COMMANDS = {
    "spectrum": cmd_spectrum, "converge": cmd_converge, "resolvent": cmd_resolvent,
    "gap": cmd_gap, "hypo": cmd_hypo, "simulate": cmd_simulate,
}


def _floats(n=None):
    return dict(type=float, nargs=n or "+")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kbmlab", description="Kinetic Brownian motion spectral laboratory.")
    sub = ap.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def add(name, help_):
        p = sub.add_parser(name, help=help_, argument_default=S)
        p.add_argument("--config", help="TOML file; flags override it")
        p.add_argument("--out", help="output directory (default: out)")
        p.add_argument("--lengths", **_floats(2), help="torus side lengths (default: 2pi 2pi)")
        return p

    p = add("spectrum", "eigenvalues in a window and their matching to the base spectrum")
    p.add_argument("--gamma", type=float)
    p.add_argument("--window", **_floats(4), metavar=("RE_MIN", "RE_MAX", "IM_MIN", "IM_MAX"))
    p.add_argument("--tol", type=float)
    p.add_argument("--M0", type=int)
    p.add_argument("--ceiling", type=int)

    p = add("converge", "spectral distance over a gamma grid")
    p.add_argument("--gammas", **_floats())
    p.add_argument("--window", **_floats(4), metavar=("RE_MIN", "RE_MAX", "IM_MIN", "IM_MAX"))
    p.add_argument("--tol", type=float)
    p.add_argument("--M0", type=int)
    p.add_argument("--ceiling", type=int)
    p.add_argument("--svg", action="store_true")

    p = add("resolvent", "resolvent-difference norms and their rate in gamma")
    p.add_argument("--gammas", **_floats())
    p.add_argument("--lam", **_floats(2), metavar=("RE", "IM"))
    p.add_argument("--s", type=float)
    p.add_argument("--K-max", dest="K_max", type=float, help="fixed |kappa|^2 bound (default: adaptive)")
    p.add_argument("--M", type=int)
    p.add_argument("--qa-A", dest="qa_A", type=float, help="also tabulate the absorbed difference at this A")
    p.add_argument("--N", type=float)
    p.add_argument("--svg", action="store_true")

    p = add("gap", "spectral gap and equilibrium remainder")
    p.add_argument("--gammas", **_floats())
    p.add_argument("--beta", type=float)
    p.add_argument("--t-grid", dest="t_grid", type=float, nargs=3, metavar=("T0", "T1", "N"))
    p.add_argument("--state", choices=["random", "constant"])
    p.add_argument("--seed", type=int)
    p.add_argument("--state-K", dest="state_K", type=float)
    p.add_argument("--state-M", dest="state_M", type=int)

    p = add("hypo", "empirical subelliptic constants")
    p.add_argument("--gammas", **_floats())
    p.add_argument("--variant", choices=["plain", "withQ", "shifted"])
    p.add_argument("--s", type=float)
    p.add_argument("--gain", type=float)
    p.add_argument("--B", type=float, help="fixed B (default: gamma**B_exp)")
    p.add_argument("--B-exp", dest="B_exp", type=float)
    p.add_argument("--A", type=float, help="fixed A (default: gamma**A_exp)")
    p.add_argument("--A-exp", dest="A_exp", type=float)
    p.add_argument("--ys", **_floats())
    p.add_argument("--K-max", dest="K_max", type=float)
    p.add_argument("--M", type=int)

    p = add("simulate", "sample paths, ensemble statistics or the three-panel figure")
    p.add_argument("--gamma", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--n-paths", dest="n_paths", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--allow-large-dt", dest="allow_large_dt", action="store_true")
    p.add_argument("--record-every", dest="record_every", type=int)
    p.add_argument("--figure1", action="store_true")
    p.add_argument("--figure1-gammas", dest="figure1_gammas", **_floats())
    p.add_argument("--svg", action="store_true")
    return ap


def resolve_config(command: str, flags: dict) -> dict:
    """Defaults, then the TOML file, then flags."""
    cfg = {**COMMON, **DEFAULTS[command]}
    path = flags.pop("config", None)
    if path is not None:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        section = data.get(command, {})
        top = {k: v for k, v in data.items() if not isinstance(v, dict)}
        for k, v in {**top, **section}.items():
            key = k.replace("-", "_")
            if key not in cfg:
                raise ValueError(f"unknown setting {k!r} for {command}")
            cfg[key] = v
    cfg.update(flags)
    cfg["config_file"] = path
    return cfg


def main(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    try:
        cfg = resolve_config(command, args)
        run = Run(command, cfg)
    except (OSError, ValueError, tomllib.TOMLDecodeError) as exc:
        print(f"kbmlab: {exc}", file=sys.stderr)
        return EXIT_FAIL
    try:
        status, error = COMMANDS[command](run), None
    except (KbmError, ValueError) as exc:
        status, error = EXIT_FAIL, f"{type(exc).__name__}: {exc}"
    except Exception as exc:  # noqa: BLE001 - reported through the exit code
        status, error = EXIT_INTERNAL, f"{type(exc).__name__}: {exc}"
    if error:
        print(f"kbmlab {command}: {error}", file=sys.stderr)
    run.manifest(status, error)
    return status


if __name__ == "__main__":
    sys.exit(main())
