"""Command-line front end: ``ionrot --config run.cfg --out results/``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .ansatz import RotationAnsatz
from .chain import EquilibriumError, IonPair, RigidHarmonicTrap, magnetic_electric_ratio
from .config import COMMANDS, ConfigError, Diagnostic, RunConfig, load_config, parse_config
from .units import HBAR, to_si

__all__ = ["main", "run", "validate", "ResultBundle", "csv_text", "EXIT_OK", "EXIT_CONFIG", "EXIT_NUMERICAL"]

log = logging.getLogger("ionrot")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_PROTOCOL_KEYS = ("protocol.theta_f", "protocol.t_f")
_REQUIRED = {
    "design-nm": ("ion1.mass", "ion2.mass", *_PROTOCOL_KEYS, "protocol.n_free"),
    "design-direct": ("ion1.mass", "ion2.mass", *_PROTOCOL_KEYS, "protocol.n_free"),
    "verify": ("ion1.mass", "ion2.mass", *_PROTOCOL_KEYS),
    "doublewell": ("ion1.mass", "ion2.mass", "doublewell.curvature", "doublewell.beta", *_PROTOCOL_KEYS,
                   "protocol.n_free"),
    "ratio": ("ratio.r", "ratio.theta_dot"),
    "sweep": ("ion1.mass", "ion2.mass", *_PROTOCOL_KEYS, "protocol.n_free"),
}


@dataclass
class ResultBundle:
    """Everything a run writes: data files, a summary and the manifest."""

    files: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)

    def write(self, out: Path):
        out.mkdir(parents=True, exist_ok=True)
        for name, text in self.files.items():
            (out / name).write_text(text, newline="\n")
        (out / "summary.json").write_text(_json(self.summary), newline="\n")
        (out / "manifest.json").write_text(_json(self.manifest), newline="\n")


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"not serialisable: {type(x)}")


def csv_text(columns) -> str:
    """CSV with a ``name [unit] (module)`` header and 17 significant digits."""
    header = ",".join(f"{name} [{unit}] ({module})" for name, unit, module, _ in columns)
    data = np.column_stack([np.asarray(col, dtype=float) for *_, col in columns])
    rows = [",".join(f"{v:.17g}" for v in row) for row in data]
    return "\n".join([header, *rows]) + "\n"


# --- config interpretation -------------------------------------------------------------------


def _ions(cfg: RunConfig) -> IonPair:
    return IonPair(cfg.get("ion1.mass"), cfg.get("ion2.mass"))


def _trap(cfg: RunConfig, ions: IonPair) -> RigidHarmonicTrap:
    if cfg.get("trap.spring_constant") is not None:
        return RigidHarmonicTrap(cfg.get("trap.spring_constant"))
    return RigidHarmonicTrap.from_frequency(cfg.get("trap.frequency"), ions.m1)


def _scalar(cfg: RunConfig, key: str):
    v = cfg.get(key)
    return v[0] if isinstance(v, list) else v


def _coefficients(cfg: RunConfig):
    c = cfg.get("protocol.coefficients")
    return None if c is None else list(c) + [0.0] * (4 - len(c))


def _sim(cfg: RunConfig, **overrides):
    from .quantum import SimConfig

    kw = {}
    for key, name in (("sim.n1", "n1"), ("sim.n2", "n2"), ("sim.half_width", "half_width"),
                      ("sim.n_steps", "n_steps"), ("sim.samples", "samples")):
        if cfg.get(key) is not None:
            kw[name] = cfg.get(key)
    kw.update(overrides)
    return SimConfig(**kw)


def validate(cfg: RunConfig) -> list[Diagnostic]:
    """Unit, completeness, grid and regime checks; never raises."""
    diags = list(cfg.diagnostics)
    cmd = cfg.command
    if cmd not in COMMANDS:
        diags.append(Diagnostic("error", "command", f"expected one of {', '.join(COMMANDS)}, got {cmd!r}"))
        return diags
    for key in _REQUIRED[cmd]:
        if cfg.get(key) is None and not any(d.field == key for d in diags):
            diags.append(Diagnostic("error", key, "required for this command"))
    needs_trap = cmd in ("design-nm", "design-direct", "verify", "sweep")
    if needs_trap and cfg.get("trap.frequency") is None and cfg.get("trap.spring_constant") is None:
        diags.append(Diagnostic("error", "trap", "give trap.frequency or trap.spring_constant"))
    for key in ("ion1.mass", "ion2.mass", "trap.frequency", "trap.spring_constant", "doublewell.beta"):
        v = cfg.get(key)
        if v is not None and not v > 0:
            diags.append(Diagnostic("error", key, "must be positive"))
    t_f = cfg.get("protocol.t_f")
    if t_f is not None:
        if any(not t > 0 for t in t_f):
            diags.append(Diagnostic("error", "protocol.t_f", "durations must be positive"))
        if cmd != "sweep" and len(t_f) != 1:
            diags.append(Diagnostic("error", "protocol.t_f", "a single duration is expected for this command"))
    n_free = cfg.get("protocol.n_free")
    if n_free is not None:
        hi = 2 if cmd == "doublewell" else 4
        if any(not 0 <= n <= hi for n in n_free):
            diags.append(Diagnostic("error", "protocol.n_free", f"must lie in 0..{hi}"))
        if cmd != "sweep" and len(n_free) != 1:
            diags.append(Diagnostic("error", "protocol.n_free", "a single value is expected for this command"))
    coeffs = cfg.get("protocol.coefficients")
    if coeffs is not None and len(coeffs) > 4:
        diags.append(Diagnostic("error", "protocol.coefficients", "at most four coefficients (c3..c6)"))
    if cmd == "design-nm" and cfg.get("ion1.mass") and cfg.get("ion1.mass") != cfg.get("ion2.mass"):
        diags.append(Diagnostic("error", "ion2.mass", "normal-mode design needs equal masses; use design-direct"))
    if cmd == "doublewell" and cfg.get("ion1.mass") and cfg.get("ion1.mass") == cfg.get("ion2.mass"):
        diags.append(Diagnostic("error", "ion2.mass", "the double-well design needs different masses"))
    if cfg.get("doublewell.branch") not in (None, "split", "compact"):
        diags.append(Diagnostic("error", "doublewell.branch", "expected 'split' or 'compact'"))
    for key in ("sim.n1", "sim.n2"):
        n = cfg.get(key)
        if n is not None and (n < 4 or n & (n - 1)):
            diags.append(Diagnostic("error", key, "grid sizes must be powers of two >= 4"))
    hw = cfg.get("sim.half_width")
    if hw is not None and hw < 6:
        diags.append(Diagnostic("error", "sim.half_width", "domain margin below 6 ground-state widths"))
    if any(d.level == "error" for d in diags):
        return diags
    # regime: rotation faster than the softest ion's trap frequency
    if needs_trap and t_f is not None:
        ions = _ions(cfg)
        trap = _trap(cfg, ions)
        omega_min = trap.frequency(max(ions.m1, ions.m2))
        c = _coefficients(cfg) or [0.0] * 4
        for t in t_f:
            speed = RotationAnsatz(_scalar(cfg, "protocol.theta_f"), t, *c).max_speed()
            if speed > omega_min:
                diags.append(Diagnostic(
                    "warning", "protocol.t_f",
                    f"inverted effective potential interval at t_f = {t:g} us "
                    f"(max |theta_dot| = {speed:.4g} > {omega_min:.4g} rad/us)",
                ))
    return diags


# --- pipelines -------------------------------------------------------------------------------


def _protocol_columns(ansatz: RotationAnsatz, n: int):
    t = np.linspace(0.0, ansatz.t_f, n)
    return [
        ("t", "us", "rotation-ansatz", t),
        ("theta", "rad", "rotation-ansatz", ansatz.theta(t)),
        ("theta_dot", "rad/us", "rotation-ansatz", ansatz.theta_dot(t)),
        ("theta_ddot", "rad/us^2", "rotation-ansatz", ansatz.theta_ddot(t)),
    ]


def _trace_columns(trace):
    trace = np.asarray(trace if len(trace) else [np.nan], dtype=float)
    return [("iteration", "1", "sta-designer", np.arange(trace.size)),
            ("best_objective", "quanta", "sta-designer", trace)]


def _design_summary(res):
    return {
        "t_f_us": res.t_f,
        "theta_f_rad": res.theta_f,
        "n_free": res.n_free,
        "coefficients": res.coefficients,
        "objective_quanta": res.objective_quanta,
        "mode_excess_quanta": [e / res.energy_unit for e in res.mode_energies_final],
        "converged": res.converged,
        "evaluations": res.nfev,
        "method": res.method,
    }


def _run_design_nm(cfg: RunConfig, seed: int) -> ResultBundle:
    from .sta import DesignResult, auxiliary_series, design_equal_ions, equal_ion_excess

    ions = _ions(cfg)
    trap = _trap(cfg, ions)
    omega = trap.frequency(ions.m1)
    theta_f, t_f = _scalar(cfg, "protocol.theta_f"), _scalar(cfg, "protocol.t_f")
    n_free = _scalar(cfg, "protocol.n_free")
    fixed = _coefficients(cfg)
    if fixed is not None:
        ans = RotationAnsatz(theta_f, t_f, *fixed)
        finals = equal_ion_excess(ans, ions.m1, omega)
        res = DesignResult(theta_f, t_f, n_free, ans.coefficients, sum(finals), HBAR * omega, finals,
                           [sum(finals) / (HBAR * omega)], True, 1, "fixed")
    else:
        res = design_equal_ions(ions, omega, t_f, theta_f, n_free,
                                restarts=cfg.get("optimizer.restarts", 0), seed=seed,
                                max_iter=cfg.get("optimizer.max_iter", 2000),
                                step=cfg.get("optimizer.step", 1e-3))
    ans = res.ansatz()
    n = cfg.get("output.samples", 401)
    cols = auxiliary_series(ans, ions.m1, omega, n)
    units = {"t": "us", "theta": "rad", "theta_dot": "rad/us"}
    mode_cols = []
    for name, val in cols.items():
        unit = units.get(name)
        if unit is None:
            if name.startswith("omega_sq"):
                unit = "rad^2/us^2"
            elif name.startswith("p0_dot"):
                unit = "amu^0.5 um/us^2"
            elif name.startswith("b_dot"):
                unit = "1/us"
            elif name.startswith("b_"):
                unit = "1"
            elif name.startswith("alpha_dot"):
                unit = "amu^0.5 um/us"
            elif name.startswith("alpha"):
                unit = "amu^0.5 um"
            else:
                unit, val = "quanta", val / (HBAR * omega)
        mode_cols.append((name, unit, "sta-designer", val))
    files = {
        "protocol.csv": csv_text(_protocol_columns(ans, n)),
        "modes.csv": csv_text(mode_cols),
        "trace.csv": csv_text(_trace_columns(res.trace)),
    }
    return ResultBundle(files, _design_summary(res))


def _run_design_direct(cfg: RunConfig, seed: int) -> ResultBundle:
    from .sta import design_direct

    ions = _ions(cfg)
    trap = _trap(cfg, ions)
    n_free = _scalar(cfg, "protocol.n_free")
    start = _coefficients(cfg)
    res = design_direct(ions, trap, _scalar(cfg, "protocol.t_f"), _scalar(cfg, "protocol.theta_f"),
                        n_free, sim=_sim(cfg, samples=2), restarts=cfg.get("optimizer.restarts", 0),
                        seed=seed, max_iter=cfg.get("optimizer.max_iter", 2000),
                        step=cfg.get("optimizer.step", 1e-2), x0=None if start is None else start[:n_free])
    n = cfg.get("output.samples", 401)
    files = {
        "protocol.csv": csv_text(_protocol_columns(res.ansatz(), n)),
        "trace.csv": csv_text(_trace_columns(res.trace)),
    }
    return ResultBundle(files, _design_summary(res))


def _run_verify(cfg: RunConfig, seed: int) -> ResultBundle:
    from .chain import effective_springs, equilibrium_harmonic
    from .quantum import RigidHarmonic, excess_energy, ground_state, propagate
    from .sta import equal_ion_excess

    ions = _ions(cfg)
    trap = _trap(cfg, ions)
    omega = trap.frequency(ions.m1)
    ans = RotationAnsatz(_scalar(cfg, "protocol.theta_f"), _scalar(cfg, "protocol.t_f"),
                         *(_coefficients(cfg) or [0.0] * 4))
    sim = _sim(cfg, samples=cfg.get("output.samples", 201))
    model = RigidHarmonic(trap.k, ions)
    psi0, e0 = ground_state(model, sim=sim, omega_ref=omega)
    traj = propagate(model, psi0, ans, sim)
    geo = equilibrium_harmonic(effective_springs(trap, ions, ans.theta_dot(traj.times)))
    unit = HBAR * omega
    files = {"observables.csv": csv_text([
        ("t", "us", "quantum-verifier", traj.times),
        ("norm", "1", "quantum-verifier", traj.norm),
        ("energy_minus_initial", "quanta", "quantum-verifier", (traj.energy - traj.energy[0]) / unit),
        ("s1_mean", "um", "quantum-verifier", traj.s1_mean),
        ("s2_mean", "um", "quantum-verifier", traj.s2_mean),
        ("s1_eq", "um", "chain-model", geo.s1_eq),
        ("s2_eq", "um", "chain-model", geo.s2_eq),
    ])}
    summary = {
        "t_f_us": ans.t_f,
        "coefficients": ans.coefficients,
        "ground_energy_quanta": e0 / unit,
        "excess_quanta": excess_energy(traj) / unit,
        "steps": traj.steps,
        "dt_us": traj.dt,
        "grid": [sim.n1, sim.n2],
    }
    if ions.equal:
        summary["normal_mode_prediction_quanta"] = sum(equal_ion_excess(ans, ions.m1, omega)) / unit
    return ResultBundle(files, summary)


def _run_doublewell(cfg: RunConfig, seed: int) -> ResultBundle:
    from .doublewell import (DoubleWellConfig, design_doublewell, doublewell_excess, geometry_series,
                             mode_drives_doublewell)
    from .sta import DesignResult, mode_excess, solve_auxiliary

    ions = _ions(cfg)
    dw = DoubleWellConfig(ions, cfg.get("doublewell.curvature"), cfg.get("doublewell.beta"),
                          branch=cfg.get("doublewell.branch", "split"))
    theta_f, t_f = _scalar(cfg, "protocol.theta_f"), _scalar(cfg, "protocol.t_f")
    n_free = _scalar(cfg, "protocol.n_free")
    fixed = _coefficients(cfg)
    if fixed is not None:
        ans = RotationAnsatz(theta_f, t_f, *fixed)
        finals, e0, _ = doublewell_excess(dw, ans)
        res = DesignResult(theta_f, t_f, n_free, ans.coefficients, sum(finals), e0, finals,
                           [sum(finals) / e0], True, 1, "fixed")
    else:
        res, _ = design_doublewell(dw, t_f, theta_f, n_free, restarts=cfg.get("optimizer.restarts", 0),
                                   seed=seed, max_iter=cfg.get("optimizer.max_iter", 300),
                                   step=cfg.get("optimizer.step", 1e-2))
    series = geometry_series(dw, res.ansatz(), certified=True)
    plus, minus = mode_drives_doublewell(series)
    t = series["t"]
    excess = np.zeros_like(t)
    for drive in (plus, minus):
        st = solve_auxiliary(drive, t_f, t_eval=t)
        excess += mode_excess(st, drive.omega_sq(t), drive.p0_dot(t), drive.omega0_sq)
    stride = max(1, (t.size - 1) // (cfg.get("output.samples", 401) - 1))
    sel = slice(None, None, stride)
    force = to_si(1.0, "force") * 1e12
    files = {"geometry.csv": csv_text([
        ("t", "us", "doublewell-designer", t[sel]),
        ("theta_dot", "rad/us", "rotation-ansatz", series["theta_dot"][sel]),
        ("d", "um", "doublewell-designer", series["d"][sel]),
        ("s0", "um", "doublewell-designer", series["s0"][sel]),
        ("gamma", "pN", "doublewell-designer", series["gamma"][sel] * force),
        ("omega_plus", "rad/us", "doublewell-designer", np.sqrt(series["omega_plus_sq"][sel])),
        ("omega_minus", "rad/us", "doublewell-designer", np.sqrt(series["omega_minus_sq"][sel])),
        ("excess_over_E0", "1", "doublewell-designer", excess[sel] / res.energy_unit),
        ("grad_norm", "amu um/us^2", "doublewell-designer", series["grad_norm"][sel]),
        ("decoupling", "1", "doublewell-designer", series["decoupling"][sel]),
    ])}
    files["trace.csv"] = csv_text(_trace_columns(res.trace))
    summary = _design_summary(res)
    summary["delta_E_over_E0"] = summary.pop("objective_quanta")
    summary["E0_hbar_rad_per_us"] = res.energy_unit / HBAR
    summary["max_grad_norm"] = float(series["grad_norm"].max())
    summary["max_decoupling"] = float(series["decoupling"].max())
    return ResultBundle(files, summary)


def _run_ratio(cfg: RunConfig, seed: int) -> ResultBundle:
    r = to_si(cfg.get("ratio.r"), "length")
    w = to_si(cfg.get("ratio.theta_dot"), "angular-frequency")
    return ResultBundle({}, {"r_m": r, "theta_dot_per_s": w, "ratio": magnetic_electric_ratio(r, w)})


def _sweep_job(args):
    cfg_text, t_f, n_free, seed = args
    cfg = parse_config(cfg_text)
    from .quantum import protocol_excess
    from .sta import design_direct, design_equal_ions

    ions = _ions(cfg)
    trap = _trap(cfg, ions)
    theta_f = _scalar(cfg, "protocol.theta_f")
    kw = dict(restarts=cfg.get("optimizer.restarts", 0), seed=seed, max_iter=cfg.get("optimizer.max_iter", 2000))
    if ions.equal:
        res = design_equal_ions(ions, trap.frequency(ions.m1), t_f, theta_f, n_free,
                                step=cfg.get("optimizer.step", 1e-3), **kw)
    else:
        res = design_direct(ions, trap, t_f, theta_f, n_free, sim=_sim(cfg, samples=2),
                            step=cfg.get("optimizer.step", 1e-2), **kw)
    exact = None
    if cfg.get("sweep.verify", False):
        exact = protocol_excess(ions, trap, res.ansatz(), _sim(cfg, samples=2)) / res.energy_unit
    return t_f, n_free, res.objective_quanta, exact, list(res.coefficients)


def _run_sweep(cfg: RunConfig, seed: int, workers: int) -> ResultBundle:
    t_list, n_list = cfg.get("protocol.t_f"), cfg.get("protocol.n_free")
    jobs = [(cfg.text, t, n, seed) for t in t_list for n in n_list]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    table = {(t, n): (obj, ex, c) for t, n, obj, ex, c in results}
    ions = _ions(cfg)
    module = "sta-designer" if ions.equal else "quantum-verifier"
    cols = [("t_f", "us", "cli", t_list)]
    for n in n_list:
        cols.append((f"excess_nfree{n}", "quanta", module, [table[(t, n)][0] for t in t_list]))
    if cfg.get("sweep.verify", False):
        for n in n_list:
            cols.append((f"exact_nfree{n}", "quanta", "quantum-verifier", [table[(t, n)][1] for t in t_list]))
    summary = {"runs": [{"t_f_us": t, "n_free": n, "objective_quanta": table[(t, n)][0],
                         "exact_quanta": table[(t, n)][1], "coefficients": table[(t, n)][2]}
                        for t in t_list for n in n_list]}
    return ResultBundle({"sweep.csv": csv_text(cols)}, summary)


def run(cfg: RunConfig, seed: int | None = None, workers: int = 1) -> ResultBundle:
    """Validate and execute a configuration; raises ConfigError on invalid input."""
    diags = validate(cfg)
    errors = [d for d in diags if d.level == "error"]
    if errors:
        raise ConfigError(errors)
    for d in diags:
        log.warning("%s", d)
    seed = cfg.get("seed", 0) if seed is None else seed
    started = time.time()
    cmd = cfg.command
    if cmd == "sweep":
        bundle = _run_sweep(cfg, seed, workers)
    else:
        bundle = {
            "design-nm": _run_design_nm,
            "design-direct": _run_design_direct,
            "verify": _run_verify,
            "doublewell": _run_doublewell,
            "ratio": _run_ratio,
        }[cmd](cfg, seed)
    bundle.manifest = _manifest(cfg, seed, workers, started, diags, bundle)
    return bundle


def _manifest(cfg, seed, workers, started, diags, bundle):
    import numba
    import scipy

    return {
        "command": cfg.command,
        "config_sha256": cfg.digest,
        "config": cfg.text,
        "seed": seed,
        "workers": workers,
        "diagnostics": [str(d) for d in diags],
        "files": sorted(bundle.files) + ["summary.json"],
        "versions": {
            "ionrot": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
        },
        "started_unix": started,
        "elapsed_s": time.time() - started,
    }


def _numerical_errors():
    from .doublewell import DegenerateConstraintError, InconsistentGeometryError, InfeasibleConfigurationError
    from .quantum import ConvergenceError
    from .sta import IntegrationError, RegimeError, ResolutionError

    return (IntegrationError, RegimeError, ResolutionError, ConvergenceError, EquilibriumError,
            InfeasibleConfigurationError, InconsistentGeometryError, DegenerateConstraintError,
            FloatingPointError, np.linalg.LinAlgError)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ionrot", description=__doc__)
    parser.add_argument("--config", required=True, help="flat key = value configuration file")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="optimizer restart seed (overrides config)")
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="sweep worker processes")
    parser.add_argument("--dry-run", action="store_true", help="validate the configuration only")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must fit in an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.dry_run:
        diags = validate(cfg)
        for d in diags:
            print(d)
        return EXIT_CONFIG if any(d.level == "error" for d in diags) else EXIT_OK
    try:
        bundle = run(cfg, args.seed, max(1, args.workers))
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(d, file=sys.stderr)
        return EXIT_CONFIG
    except _numerical_errors() as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    bundle.write(Path(args.out))
    print(_json(bundle.summary), end="")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
