"""Invariant-based inverse engineering of rotations through dynamical normal modes.

Each decoupled mode is a unit-mass oscillator

    H'' = p^2/2 + (W/2) (s - F/W)^2,   W = Omega^2(t),  F = dp0/dt,

whose Lewis-Riesenfeld invariant is parametrised by the Ermakov scaling b
and the Newton trajectory alpha:

    b'' + W b = W0 / b^3,     alpha'' + W alpha = F,

started from b = 1, alpha = 0 at rest.  A protocol is free of final
excitation when b(t_f) = 1 and b', alpha, alpha' vanish there, which is what
the designers below drive towards by minimising the final mode energies.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.special import eval_hermite, gammaln

from .ansatz import RotationAnsatz
from .chain import IonPair, RigidHarmonicTrap
from .ode import TabulatedDrive, integrate_mode
from .optimize import nelder_mead
from .units import CC, HBAR

__all__ = [
    "IntegrationError",
    "RegimeError",
    "ResolutionError",
    "ModeDrive",
    "ModeState",
    "DesignResult",
    "solve_auxiliary",
    "mode_energy",
    "mode_excess",
    "lewis_riesenfeld_phase",
    "build_elementary_solution",
    "invariant_value",
    "equal_ion_drives",
    "equal_ion_excess",
    "design_equal_ions",
    "design_direct",
    "auxiliary_series",
]

log = logging.getLogger(__name__)


class IntegrationError(RuntimeError):
    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (t = {time:.6g} us)")
        self.time = time


class RegimeError(ValueError):
    """The effective trap is inverted where a closed form needs it confining."""


class ResolutionError(RuntimeError):
    """A grid is too small or too coarse for the state placed on it."""


@dataclass(frozen=True)
class ModeDrive:
    omega_sq: Callable
    p0_dot: Callable
    omega0_sq: float


@dataclass
class ModeState:
    """Auxiliary functions of one mode, scalars or time series over ``t``."""

    b: np.ndarray
    b_dot: np.ndarray
    alpha: np.ndarray
    alpha_dot: np.ndarray
    t: np.ndarray | None = None

    def __getitem__(self, i) -> "ModeState":
        t = None if self.t is None else self.t[i]
        return ModeState(self.b[i], self.b_dot[i], self.alpha[i], self.alpha_dot[i], t)

    @property
    def final(self) -> "ModeState":
        return self[-1]


@dataclass
class DesignResult:
    theta_f: float
    t_f: float
    n_free: int
    coefficients: np.ndarray
    objective: float
    energy_unit: float
    mode_energies_final: tuple
    trace: list = field(default_factory=list)
    converged: bool = True
    nfev: int = 0
    method: str = "normal-modes"

    @property
    def objective_quanta(self) -> float:
        return self.objective / self.energy_unit

    def ansatz(self) -> RotationAnsatz:
        return RotationAnsatz(self.theta_f, self.t_f, *self.coefficients)


def solve_auxiliary(drive: ModeDrive, t_f: float, t_eval=None, rtol: float = 1e-10,
                    atol: float = 1e-12, n_table: int = 4001, y0=(1.0, 0.0, 0.0, 0.0),
                    table: TabulatedDrive | None = None) -> ModeState:
    """Integrate the Ermakov and Newton equations of one mode over [0, t_f].

    ``t_eval`` may run backwards (from t_f to 0) to integrate in reverse; its
    first entry is where ``y0`` is imposed.
    """
    t_eval = np.array([0.0, t_f]) if t_eval is None else np.asarray(t_eval, dtype=float)
    if table is None:
        table = TabulatedDrive(drive.omega_sq, drive.p0_dot, 0.0, t_f, n_table)
    if not table.finite:
        raise IntegrationError("drive is not finite on the protocol window", table.first_bad)
    states, status, t_stop, _ = integrate_mode(y0, t_eval, table, drive.omega0_sq, rtol, atol)
    if status != 0:
        reason = "step size underflow" if status == 1 else "step limit reached"
        raise IntegrationError(f"auxiliary integration failed: {reason}", t_stop)
    return ModeState(states[:, 0], states[:, 1], states[:, 2], states[:, 3], t_eval)


def _newton_part(alpha, alpha_dot, omega_sq, p0_dot, omega0_sq):
    alpha, alpha_dot = np.asarray(alpha, float), np.asarray(alpha_dot, float)
    w, f = np.broadcast_arrays(np.asarray(omega_sq, float), np.asarray(p0_dot, float))
    tiny = np.abs(w) < 1e-12 * abs(omega0_sq)
    with np.errstate(divide="ignore", invalid="ignore"):
        shifted = 0.5 * w * (alpha - f / w) ** 2
        expanded = 0.5 * w * alpha**2 - alpha * f + np.where(f != 0.0, f**2 / (2.0 * w), 0.0)
    return 0.5 * alpha_dot**2 + np.where(tiny, expanded, shifted)


def mode_energy(n: int, state: ModeState, omega_sq, p0_dot, omega0_sq: float, hbar: float = HBAR):
    """Mean energy of the n-th elementary solution of H''."""
    b, bd = np.asarray(state.b, float), np.asarray(state.b_dot, float)
    w0 = math.sqrt(omega0_sq)
    width = (2 * n + 1) * hbar / (4.0 * w0) * (bd**2 + omega_sq * b**2 + omega0_sq / b**2)
    return width + _newton_part(state.alpha, state.alpha_dot, omega_sq, p0_dot, omega0_sq)


def mode_excess(state: ModeState, omega_sq, p0_dot, omega0_sq: float, n: int = 0,
                hbar: float = HBAR):
    """mode_energy minus (n + 1/2) hbar Omega0, without the cancellation.

    Uses W b^2 + W0/b^2 - 2 W0 = (W - W0) b^2 + W0 (b - 1/b)^2, so the result
    is non-negative whenever W = W0 and resolves excitations far below the
    zero-point energy.
    """
    b, bd = np.asarray(state.b, float), np.asarray(state.b_dot, float)
    w0 = math.sqrt(omega0_sq)
    width = (2 * n + 1) * hbar / (4.0 * w0) * (
        bd**2 + (omega_sq - omega0_sq) * b**2 + omega0_sq * (b - 1.0 / b) ** 2
    )
    return width + _newton_part(state.alpha, state.alpha_dot, omega_sq, p0_dot, omega0_sq)


def lewis_riesenfeld_phase(n: int, traj: ModeState, drive: ModeDrive, hbar: float = HBAR):
    """Phase turning the elementary solutions into solutions of the TDSE.

    phi(t) = -(1/hbar) int_0^t [eps/b^2 + u^2/2 - W0 alpha^2/(2 b^4) + F^2/(2W)] dt'
    with eps = (n + 1/2) hbar Omega0 and u = alpha' - alpha b'/b, evaluated on
    the trajectory time grid.
    """
    t = np.asarray(traj.t, float)
    b, bd, a, ad = traj.b, traj.b_dot, traj.alpha, traj.alpha_dot
    eps = (n + 0.5) * hbar * math.sqrt(drive.omega0_sq)
    u = ad - a * bd / b
    w, f = drive.omega_sq(t), drive.p0_dot(t)
    integrand = eps / b**2 + 0.5 * u**2 - drive.omega0_sq * a**2 / (2.0 * b**4) + f**2 / (2.0 * w)
    return -cumulative_simpson(integrand, x=t, initial=0.0) / hbar


def _oscillator_eigenfunction(n: int, x, omega0: float, hbar: float):
    xi = np.sqrt(omega0 / hbar) * x
    log_norm = 0.25 * math.log(omega0 / (math.pi * hbar)) - 0.5 * (n * math.log(2.0) + gammaln(n + 1))
    return np.exp(log_norm - 0.5 * xi**2) * eval_hermite(n, xi)


def build_elementary_solution(n: int, state: ModeState, omega0_sq: float, grid,
                              phase: float = 0.0, hbar: float = HBAR) -> np.ndarray:
    """Elementary solution psi_n on a uniform 1D mode-coordinate grid.

    ``phase`` is the global Lewis-Riesenfeld phase (see
    :func:`lewis_riesenfeld_phase`); leave it at 0 when only densities or
    expectation values are needed.
    """
    s = np.asarray(grid, float)
    b, bd, a, ad = float(state.b), float(state.b_dot), float(state.alpha), float(state.alpha_dot)
    if not b > 0:
        raise ValueError("Ermakov scaling b must be positive")
    sigma = (s - a) / b
    S = bd * s**2 / (2.0 * b) + (ad * b - a * bd) * s / b
    psi = np.exp(1j * (S / hbar + phase)) * _oscillator_eigenfunction(n, sigma, math.sqrt(omega0_sq), hbar)
    psi /= math.sqrt(b)
    norm = np.sum(np.abs(psi) ** 2) * (s[1] - s[0])
    if abs(1.0 - norm) > 1e-6:
        raise ResolutionError(f"grid misses part of the elementary solution (norm {norm:.8f})")
    return psi


def invariant_value(state: ModeState, s, p, omega0_sq: float):
    """Classical Lewis-Riesenfeld invariant of one mode at phase-space points (s, p)."""
    b, bd, a, ad = state.b, state.b_dot, state.alpha, state.alpha_dot
    return 0.5 * (b * (p - ad) - bd * (s - a)) ** 2 + 0.5 * omega0_sq * ((s - a) / b) ** 2


# --- equal ions in a rigid harmonic trap ---------------------------------------------------


def _equal_ion_kinematics(ansatz: RotationAnsatz, mass: float, omega0: float, t, cc: float):
    td, tdd, tddd = ansatz.theta_dot(t), ansatz.theta_ddot(t), ansatz.theta_dddot(t)
    w2 = omega0**2 - td**2
    if np.any(w2 <= 0):
        raise RegimeError("rotation outruns the trap (omega^2 <= 0); closed-form equilibrium undefined")
    w2d = -2.0 * td * tdd
    w2dd = -2.0 * (tdd**2 + td * tddd)
    x0 = np.cbrt(2.0 * cc / (mass * w2))
    x0d = -x0 * w2d / (3.0 * w2)
    x0dd = -(x0d * w2d + x0 * w2dd - x0 * w2d**2 / w2) / (3.0 * w2)
    return w2, x0, x0d, x0dd


def equal_ion_drives(ansatz: RotationAnsatz, mass: float, omega0: float, cc: float = CC):
    """Drives of the stretch (+) and centre-of-mass (-) modes of two equal ions.

    Omega+^2 = 3 omega^2, Omega-^2 = omega^2 with omega^2 = omega0^2 - theta_dot^2;
    the stretch mode is pushed by the change of the equilibrium separation x0,
    p0+ = -sqrt(m/2) dx0/dt; the centre of mass is not pushed.
    """
    root = math.sqrt(mass / 2.0)

    def w_minus(t):
        return ansatz.effective_frequency_sq(omega0, t)

    def w_plus(t):
        return 3.0 * ansatz.effective_frequency_sq(omega0, t)

    def f_plus(t):
        return -root * _equal_ion_kinematics(ansatz, mass, omega0, t, cc)[3]

    def f_minus(t):
        return np.zeros_like(np.asarray(t, dtype=float))

    return (ModeDrive(w_plus, f_plus, 3.0 * omega0**2), ModeDrive(w_minus, f_minus, omega0**2))


def _equal_ion_tables(ansatz, mass, omega0, cc, n_table):
    t = np.linspace(0.0, ansatz.t_f, n_table)
    w2, _, _, x0dd = _equal_ion_kinematics(ansatz, mass, omega0, t, cc)
    f = -math.sqrt(mass / 2.0) * x0dd
    plus = TabulatedDrive(lambda _: 3.0 * w2, lambda _: f, 0.0, ansatz.t_f, n_table)
    minus = TabulatedDrive(lambda _: w2, lambda _: 0.0, 0.0, ansatz.t_f, n_table)
    return plus, minus


def equal_ion_excess(ansatz: RotationAnsatz, mass: float, omega0: float, cc: float = CC,
                     n_table: int = 4001, rtol: float = 1e-10, atol: float = 1e-12):
    """Final excess energies (E''_0+ - hbar Omega0+/2, E''_0- - hbar Omega0-/2)."""
    plus, minus = equal_ion_drives(ansatz, mass, omega0, cc)
    tab_plus, tab_minus = _equal_ion_tables(ansatz, mass, omega0, cc, n_table)
    out = []
    for drive, tab in ((plus, tab_plus), (minus, tab_minus)):
        st = solve_auxiliary(drive, ansatz.t_f, rtol=rtol, atol=atol, table=tab).final
        # theta_dot(t_f) = 0, so the final drive is (Omega0^2, 0)
        out.append(float(mode_excess(st, drive.omega0_sq, 0.0, drive.omega0_sq)))
    return tuple(out)


def _objective(fn, scale):
    def f(x):
        try:
            val = sum(fn(x)) / scale
        except (RegimeError, IntegrationError, ResolutionError):
            return np.inf
        return val if np.isfinite(val) else np.inf

    return f


def design_equal_ions(ions: IonPair, omega0: float, t_f: float, theta_f: float, n_free: int,
                      restarts: int = 0, seed: int = 0, max_iter: int = 2000, step: float = 1e-3,
                      fatol_quanta: float = 1e-12, spread: float = 1e-2,
                      tie_quanta: float = 1e-9) -> DesignResult:
    """Minimise the summed final normal-mode excitation over the free coefficients.

    Restarts sample separate basins (perturbations of size ``spread``).  The
    objective has a family of zeros once n_free >= 2; among restart results
    within ``tie_quanta`` of the best, the one whose classical point-ion
    motion ends with the least energy is kept.  That picks the member of the
    family least affected by the anharmonic Coulomb terms.
    """
    from .quantum import RigidHarmonic, classical_excess
    if not ions.equal:
        raise ValueError("normal-mode design applies to equal ions; use design_direct or the double well")
    if not 0 <= n_free <= 4:
        raise ValueError("n_free must be in 0..4")
    unit = HBAR * omega0

    def excess(x):
        a = RotationAnsatz.from_free(theta_f, t_f, x, n_free)
        return equal_ion_excess(a, ions.m1, omega0)

    static = RigidHarmonic(ions.m1 * omega0**2, ions)

    def anharmonic(x):
        try:
            return abs(classical_excess(static, RotationAnsatz.from_free(theta_f, t_f, x, n_free)))
        except (ResolutionError, RegimeError, ValueError):
            return math.inf

    opt = nelder_mead(_objective(excess, unit), n_free, step, fatol_quanta, max_iter, restarts, seed,
                      spread=spread, tiebreak=anharmonic, tie_tol=tie_quanta)
    coeffs = RotationAnsatz.from_free(theta_f, t_f, opt.x, n_free).coefficients
    finals = equal_ion_excess(RotationAnsatz(theta_f, t_f, *coeffs), ions.m1, omega0)
    result = DesignResult(theta_f, t_f, n_free, coeffs, sum(finals), unit,
                          finals, opt.trace, opt.converged, opt.nfev, "normal-modes")
    if not opt.converged:
        log.warning("equal-ion design at t_f=%g us returned the best point found", t_f)
    return result


def design_direct(ions: IonPair, trap: RigidHarmonicTrap, t_f: float, theta_f: float, n_free: int,
                  sim=None, restarts: int = 0, seed: int = 0, max_iter: int = 2000,
                  step: float = 1e-2, fatol_quanta: float = 1e-6, x0=None, presearch: bool = True,
                  presearch_restarts: int = 6, presearch_iter: int = 300,
                  presearch_spread: float = 0.1) -> DesignResult:
    """Minimise the exact final excitation, one full quantum simulation per evaluation.

    Without ``x0`` the simplex is seeded by a search on the linearised
    (Gaussian) excitation, which costs a small fraction of a simulation per
    evaluation and tracks it closely while the state stays near-Gaussian.
    Its restarts scatter over ``presearch_spread`` around the origin.  The
    seeded search then starts at a tenth of ``step``.
    """
    from .quantum import RigidHarmonic, SimConfig, gaussian_excess, protocol_excess

    sim = SimConfig() if sim is None else sim
    omega_ref = trap.frequency(ions.m1)
    unit = HBAR * omega_ref
    cache = {}
    if x0 is None and presearch and n_free > 0:
        model = RigidHarmonic(trap.k, ions)

        def proxy(x):
            try:
                return gaussian_excess(model, RotationAnsatz.from_free(theta_f, t_f, x, n_free), rtol=1e-9) / unit
            except (ResolutionError, ValueError):
                return np.inf

        pre = nelder_mead(proxy, n_free, step, 1e-8, presearch_iter, presearch_restarts, seed,
                          spread=presearch_spread)
        x0, step = pre.x, 0.1 * step
        log.info("linearised pre-search: %.4g quanta after %d evaluations", pre.fun, pre.nfev)

    def excess(x):
        a = RotationAnsatz.from_free(theta_f, t_f, x, n_free)
        key = tuple(a.coefficients)
        if key not in cache:
            cache[key] = protocol_excess(ions, trap, a, sim)
        return (cache[key],)

    opt = nelder_mead(_objective(excess, unit), n_free, step, fatol_quanta, max_iter, restarts, seed, x0)
    coeffs = RotationAnsatz.from_free(theta_f, t_f, opt.x, n_free).coefficients
    value = opt.fun * unit
    return DesignResult(theta_f, t_f, n_free, coeffs, value, unit, (value,),
                        opt.trace, opt.converged, opt.nfev, "direct")


def auxiliary_series(ansatz: RotationAnsatz, mass: float, omega0: float, n_samples: int = 401):
    """Time series of theta, the mode drives, auxiliary functions and mode excess."""
    t = np.linspace(0.0, ansatz.t_f, n_samples)
    plus, minus = equal_ion_drives(ansatz, mass, omega0)
    tabs = _equal_ion_tables(ansatz, mass, omega0, CC, 4001)
    cols = {"t": t, "theta": ansatz.theta(t), "theta_dot": ansatz.theta_dot(t)}
    for tag, drive, tab in (("plus", plus, tabs[0]), ("minus", minus, tabs[1])):
        st = solve_auxiliary(drive, ansatz.t_f, t_eval=t, table=tab)
        w, f = drive.omega_sq(t), drive.p0_dot(t)
        cols[f"omega_sq_{tag}"] = w
        cols[f"p0_dot_{tag}"] = f
        cols[f"b_{tag}"] = st.b
        cols[f"b_dot_{tag}"] = st.b_dot
        cols[f"alpha_{tag}"] = st.alpha
        cols[f"alpha_dot_{tag}"] = st.alpha_dot
        cols[f"excess_{tag}"] = mode_excess(st, w, f, drive.omega0_sq)
    return cols
