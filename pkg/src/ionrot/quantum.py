"""Full two-ion quantum dynamics on a 2D grid by split-operator propagation.

The wavefunction is carried in a frame that follows a classical reference
trajectory x_c(t) (Newton's equations under the same potential, started at
rest in the equilibrium).  Writing

    psi(s, t) = exp(i p_c . y / hbar) phi(y, t),   y = s - x_c(t),

phi obeys the Schrodinger equation with kinetic energy T and the potential
remainder W(y) = V(x_c + y) - V(x_c) - grad V(x_c) . y, up to a global phase.
The transformation is exact; it only means the grid has to hold the quantum
spread around the classical motion instead of the whole swept region, which
is what makes fast protocols affordable.  All observables are reported in
the lab (rotating-line) coordinates s1, s2.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from numba import njit
from scipy import fft as sfft
from scipy.integrate import solve_ivp

from .ansatz import RotationAnsatz
from .chain import (
    EffectiveSprings,
    IonPair,
    RigidHarmonicTrap,
    effective_springs,
    equilibrium_harmonic,
    equilibrium_numeric,
)
from .sta import ResolutionError
from .units import CC, HBAR

__all__ = [
    "classical_excess",
    "gaussian_excess",
    "Grid2D",
    "Wavefunction2D",
    "RigidHarmonic",
    "TiltedDoubleWell",
    "SimConfig",
    "Trajectory",
    "ConvergenceError",
    "potential_at",
    "reference_trajectory",
    "make_grid",
    "ground_state",
    "propagate",
    "excess_energy",
    "protocol_excess",
    "dump_snapshot",
    "step_policy",
]

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, energies=()):
        super().__init__(message)
        self.energies = list(energies)


# --- potentials ----------------------------------------------------------------------------


def _zero(t):
    return 0.0 * np.asarray(t, dtype=float)


@dataclass(frozen=True)
class RigidHarmonic:
    """k s^2/2 for both ions plus Coulomb, seen from the rotating line."""

    k: float
    ions: IonPair
    theta_dot: Callable = _zero
    cc: float = CC
    beta = 0.0

    def springs(self, t) -> tuple:
        w2 = np.square(self.theta_dot(t))
        return self.k - self.ions.m1 * w2, self.k - self.ions.m2 * w2

    def gamma(self, t):
        return _zero(t)

    def with_rotation(self, theta_dot: Callable) -> "RigidHarmonic":
        return RigidHarmonic(self.k, self.ions, theta_dot, self.cc)

    def equilibrium(self, t: float = 0.0) -> np.ndarray:
        u1, u2 = self.springs(t)
        geo = equilibrium_harmonic(EffectiveSprings(float(u1), float(u2)), self.cc)
        return np.array([geo.s1_eq, geo.s2_eq])


@dataclass(frozen=True)
class TiltedDoubleWell:
    """u_i s_i^2/2 + gamma s_i + beta s_i^4 per ion plus Coulomb.

    u_i(t) = kappa - m_i theta_dot^2 with a common (negative) curvature kappa.
    """

    kappa: float
    beta: float
    ions: IonPair
    gamma: Callable = _zero
    theta_dot: Callable = _zero
    cc: float = CC
    guess: tuple = (-3.0, 3.0)

    def springs(self, t) -> tuple:
        w2 = np.square(self.theta_dot(t))
        return self.kappa - self.ions.m1 * w2, self.kappa - self.ions.m2 * w2

    def with_rotation(self, theta_dot: Callable) -> "TiltedDoubleWell":
        return TiltedDoubleWell(self.kappa, self.beta, self.ions, self.gamma, theta_dot, self.cc, self.guess)

    def equilibrium(self, t: float = 0.0) -> np.ndarray:
        return equilibrium_numeric(lambda s: _gradient(self, s, t), lambda s: _hessian(self, s, t), self.guess)


def potential_at(model, s1, s2, t: float = 0.0, eps: float = 0.0):
    """Rotating-frame potential with the Coulomb denominator clamped at ``eps``."""
    u1, u2 = model.springs(t)
    g = model.gamma(t)
    d = np.maximum(np.asarray(s2) - np.asarray(s1), eps)
    ext = 0.5 * u1 * s1**2 + 0.5 * u2 * s2**2 + g * (s1 + s2) + model.beta * (s1**4 + s2**4)
    return ext + model.cc / d


def _gradient(model, s, t):
    u1, u2 = model.springs(t)
    g = model.gamma(t)
    f = model.cc / (s[1] - s[0]) ** 2
    b = 4.0 * model.beta
    return np.array([u1 * s[0] + g + b * s[0] ** 3 + f, u2 * s[1] + g + b * s[1] ** 3 - f])


def _hessian(model, s, t):
    u1, u2 = model.springs(t)
    c = 2.0 * model.cc / (s[1] - s[0]) ** 3
    b = 12.0 * model.beta
    return np.array([[u1 + b * s[0] ** 2 + c, -c], [-c, u2 + b * s[1] ** 2 + c]])


# --- grid and state -------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid2D:
    """Uniform periodic grid of displacements from the reference positions."""

    n1: int
    n2: int
    s1_min: float
    s1_max: float
    s2_min: float
    s2_max: float

    def __post_init__(self):
        for n in (self.n1, self.n2):
            if n < 4 or n & (n - 1):
                raise ValueError(f"grid sizes must be powers of two >= 4, got {n}")
        if not (self.s1_max > self.s1_min and self.s2_max > self.s2_min):
            raise ValueError("grid extents must be increasing")

    @property
    def ds1(self) -> float:
        return (self.s1_max - self.s1_min) / self.n1

    @property
    def ds2(self) -> float:
        return (self.s2_max - self.s2_min) / self.n2

    @property
    def cell(self) -> float:
        return self.ds1 * self.ds2

    @property
    def axes(self):
        return (self.s1_min + self.ds1 * np.arange(self.n1), self.s2_min + self.ds2 * np.arange(self.n2))

    def wavenumbers(self):
        """Angular wavenumbers; momenta are hbar k with spacing 2 pi hbar / (N ds)."""
        return (2.0 * np.pi * np.fft.fftfreq(self.n1, self.ds1), 2.0 * np.pi * np.fft.fftfreq(self.n2, self.ds2))

    def kinetic(self, ions: IonPair, hbar: float = HBAR) -> np.ndarray:
        k1, k2 = self.wavenumbers()
        return hbar**2 * np.add.outer(k1**2 / (2.0 * ions.m1), k2**2 / (2.0 * ions.m2))


@dataclass
class Wavefunction2D:
    """Amplitudes phi(y) on a co-moving grid placed at ``origin`` with momentum ``momentum``."""

    amplitudes: np.ndarray
    grid: Grid2D
    origin: np.ndarray
    momentum: np.ndarray
    t: float = 0.0

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.cell)

    def lab_amplitudes(self, hbar: float = HBAR) -> np.ndarray:
        y1, y2 = self.grid.axes
        phase = np.add.outer(self.momentum[0] * y1, self.momentum[1] * y2) / hbar
        return self.amplitudes * np.exp(1j * phase)

    def lab_axes(self):
        y1, y2 = self.grid.axes
        return y1 + self.origin[0], y2 + self.origin[1]


@dataclass(frozen=True)
class SimConfig:
    """Discretisation of the quantum verifier.

    ``half_width`` is the grid half-extent per axis in single-ion ground-state
    widths sigma_i = sqrt(hbar / (2 m_i omega_i)).  ``n_steps`` overrides the
    step policy (used by convergence studies).
    """

    n1: int = 256
    n2: int = 256
    half_width: float = 20.0
    n_steps: int | None = None
    clamp_fraction: float = 1.0 / 50.0
    edge_rows: int = 2
    leak_tol: float = 1e-8
    norm_tol: float = 1e-8
    dtau_omega: float = 0.02
    gs_tol: float = 1e-12
    gs_max_steps: int = 200_000
    samples: int = 201
    rtol_reference: float = 1e-13


# --- numerics kernels -----------------------------------------------------------------------


@njit(cache=True)
def _coulomb_remainder(dl, D, cc, eps):
    s = D + dl
    if s > eps:
        return cc * dl * dl / (D * D * s)
    return cc / eps - cc / D + cc * dl / (D * D)


@njit(cache=True)
def _remainder_grid(out, y1, y2, a1, a2, D, cc, eps):
    for i in range(y1.size):
        for j in range(y2.size):
            out[i, j] = a1[i] + a2[j] + _coulomb_remainder(y2[j] - y1[i], D, cc, eps)


@njit(cache=True)
def _apply_phase(psi, y1, y2, a1, a2, D, cc, eps, scale):
    for i in range(y1.size):
        for j in range(y2.size):
            w = a1[i] + a2[j] + _coulomb_remainder(y2[j] - y1[i], D, cc, eps)
            psi[i, j] *= complex(math.cos(scale * w), math.sin(scale * w))


def _axis_terms(model, x, t, y1, y2):
    """Single-ion parts of W on each axis (the linear force drops out)."""
    u1, u2 = model.springs(t)
    b = model.beta
    out = []
    for u, xi, y in ((u1, x[0], y1), (u2, x[1], y2)):
        out.append(0.5 * u * y**2 + b * (6.0 * xi**2 * y**2 + 4.0 * xi * y**3 + y**4))
    return out


# --- classical reference ---------------------------------------------------------------------


@dataclass
class _Reference:
    sol: object
    t_f: float
    x0: np.ndarray

    def __call__(self, t):
        y = self.sol(t)
        return y[:2], y[2:]


def reference_trajectory(model, t_f: float, rtol: float = 1e-13) -> _Reference:
    """Classical trajectory from rest at the t=0 equilibrium (DOP853, dense output)."""
    m = model.ions.masses
    x0 = model.equilibrium(0.0)
    if t_f <= 0:
        raise ValueError("t_f must be positive")

    def rhs(t, y):
        return np.concatenate([y[2:], -_gradient(model, y[:2], t) / m])

    sol = solve_ivp(rhs, (0.0, t_f), np.concatenate([x0, [0.0, 0.0]]), method="DOP853",
                    rtol=rtol, atol=1e-14 * max(1.0, float(np.abs(x0).max())), dense_output=True)
    if sol.status != 0:
        raise ResolutionError(f"classical reference trajectory failed: {sol.message}")
    if np.any(np.diff(sol.y[:2], axis=0) <= 0):
        raise ResolutionError("classical reference trajectory lost the ion ordering")
    return _Reference(sol.sol, t_f, x0)


def classical_excess(model, protocol, rtol: float = 1e-13) -> float:
    """Final energy above equilibrium of the classical point-ion motion under ``protocol``.

    This is the centroid part of the quantum excitation; the harmonic
    normal-mode picture reproduces it only to linear order.
    """
    driven = model.with_rotation(protocol.theta_dot)
    ref = reference_trajectory(driven, protocol.t_f, rtol)
    x, v = ref(protocol.t_f)
    x0 = ref.x0
    kin = 0.5 * float(np.dot(model.ions.masses, v**2))
    return kin + float(potential_at(model, x[0], x[1]) - potential_at(model, x0[0], x0[1]))


def gaussian_excess(model, protocol, rtol: float = 1e-11, hbar: float = HBAR) -> float:
    """Excitation of the linearised (Gaussian) dynamics about the classical path.

    Classical excess plus the fluctuation energy of the initial ground-state
    Gaussian carried by the variational equations q'' = -V(t) q in
    mass-weighted coordinates.  Exact for quadratic potentials; the Coulomb
    anharmonicity enters only through the classical part.
    """
    driven = model.with_rotation(protocol.theta_dot)
    m = model.ions.masses
    w = 1.0 / np.sqrt(np.outer(m, m))
    x0 = driven.equilibrium(0.0)

    def rhs(t, y):
        s, phi = y[:2], y[4:].reshape(4, 4)
        a = np.zeros((4, 4))
        a[:2, 2:] = np.eye(2)
        a[2:, :2] = -_hessian(driven, s, t) * w
        return np.concatenate([y[2:4], -_gradient(driven, s, t) / m, (a @ phi).ravel()])

    y0 = np.concatenate([x0, [0.0, 0.0], np.eye(4).ravel()])
    sol = solve_ivp(rhs, (0.0, protocol.t_f), y0, method="DOP853", rtol=rtol,
                    atol=1e-14 * max(1.0, float(np.abs(x0).max())))
    if sol.status != 0:
        raise ResolutionError(f"variational equations failed: {sol.message}")
    y = sol.y[:, -1]
    x, v, phi = y[:2], y[2:4], y[4:].reshape(4, 4)
    if not x[1] > x[0]:
        raise ResolutionError("classical reference trajectory lost the ion ordering")
    v0 = _hessian(model, x0, 0.0) * w
    om2, u = np.linalg.eigh(v0)
    if np.any(om2 <= 0):
        raise ValueError("initial configuration is not a minimum")
    om = np.sqrt(om2)
    cov = np.zeros((4, 4))
    cov[:2, :2] = 0.5 * hbar * (u / om) @ u.T
    cov[2:, 2:] = 0.5 * hbar * (u * om) @ u.T
    cov = phi @ cov @ phi.T
    fluct = 0.5 * np.trace(cov[2:, 2:]) + 0.5 * np.trace(v0 @ cov[:2, :2]) - 0.5 * hbar * om.sum()
    kin = 0.5 * float(np.dot(m, v**2))
    return kin + float(potential_at(model, x[0], x[1]) - potential_at(model, x0[0], x0[1])) + float(fluct)


def make_grid(model, sim: SimConfig) -> Grid2D:
    k_scale = abs(model.k) if isinstance(model, RigidHarmonic) else None
    sig = []
    for i, mass in enumerate(model.ions.masses):
        if k_scale is not None:
            omega = math.sqrt(k_scale / mass)
        else:
            h = _hessian(model, model.equilibrium(0.0), 0.0)
            omega = math.sqrt(max(h[i, i], 1e-300) / mass)
        sig.append(math.sqrt(HBAR / (2.0 * mass * omega)))
    w1, w2 = sim.half_width * sig[0], sim.half_width * sig[1]
    return Grid2D(sim.n1, sim.n2, -w1, w1, -w2, w2)


def _clamp_distance(model, sim: SimConfig) -> float:
    x0 = model.equilibrium(0.0)
    return float(x0[1] - x0[0]) * sim.clamp_fraction


# --- observables -----------------------------------------------------------------------------


def _observables(psi: np.ndarray, grid: Grid2D, model, x, p, t, T, eps, hbar=HBAR):
    """Norm, <H>, <s1>, <s2> of the lab state."""
    m = model.ions.masses
    y1, y2 = grid.axes
    rho = np.abs(psi) ** 2 * grid.cell
    norm = rho.sum()
    rho /= norm
    rho_k = np.abs(sfft.fft2(psi)) ** 2
    rho_k /= rho_k.sum()
    k1, k2 = grid.wavenumbers()
    py = hbar * np.array([rho_k.sum(axis=1) @ k1, rho_k.sum(axis=0) @ k2])
    ty = float(np.sum(rho_k * T))
    ymean = np.array([rho.sum(axis=1) @ y1, rho.sum(axis=0) @ y2])
    a1, a2 = _axis_terms(model, x, t, y1, y2)
    W = np.empty(psi.shape)
    _remainder_grid(W, y1, y2, a1, a2, float(x[1] - x[0]), model.cc, eps)
    v_c = float(potential_at(model, x[0], x[1], t))
    e_cl = float(np.sum(p**2 / (2.0 * m))) + v_c
    energy = e_cl + float(np.sum(p * py / m)) + ty + float(_gradient(model, x, t) @ ymean) + float(np.sum(rho * W))
    return float(norm), energy, x + ymean


def _leak_check(psi: np.ndarray, grid: Grid2D, x, eps, sim: SimConfig, t: float):
    rho = np.abs(psi) ** 2 * grid.cell
    e = sim.edge_rows
    edge = rho[:e].sum() + rho[-e:].sum() + rho[e:-e, :e].sum() + rho[e:-e, -e:].sum()
    if edge > sim.leak_tol:
        raise ResolutionError(f"amplitude {edge:.3g} reached the grid edge band at t = {t:.6g} us")
    y1, y2 = grid.axes
    band = np.add.outer(-y1, y2) + (x[1] - x[0]) < eps
    if band.any():
        clamp = rho[band].sum()
        if clamp > sim.leak_tol:
            raise ResolutionError(f"amplitude {clamp:.3g} in the Coulomb clamp band at t = {t:.6g} us")


# --- ground state and propagation ------------------------------------------------------------


def ground_state(model, grid: Grid2D | None = None, sim: SimConfig = SimConfig(), omega_ref: float | None = None):
    """Imaginary-time split-operator relaxation at t = 0; returns (state, energy)."""
    grid = make_grid(model, sim) if grid is None else grid
    x0 = model.equilibrium(0.0)
    p0 = np.zeros(2)
    eps = _clamp_distance(model, sim)
    if omega_ref is None:
        omega_ref = math.sqrt(max(model.k if isinstance(model, RigidHarmonic) else abs(model.kappa), 1e-300) / model.ions.m1)
    dtau = sim.dtau_omega / omega_ref
    y1, y2 = grid.axes
    T = grid.kinetic(model.ions)
    a1, a2 = _axis_terms(model, x0, 0.0, y1, y2)
    W = np.empty((grid.n1, grid.n2))
    _remainder_grid(W, y1, y2, a1, a2, float(x0[1] - x0[0]), model.cc, eps)
    half_v = np.exp(-W * dtau / (2.0 * HBAR))
    kin = np.exp(-T * dtau / HBAR)
    # start from the harmonic product state built on the Hessian diagonal
    h = _hessian(model, x0, 0.0)
    m = model.ions.masses
    widths = [math.sqrt(HBAR / (2.0 * math.sqrt(max(h[i, i], 1e-300) * m[i]))) for i in range(2)]
    psi = np.exp(-np.add.outer(y1**2 / (4 * widths[0] ** 2), y2**2 / (4 * widths[1] ** 2))).astype(complex)
    psi /= math.sqrt(np.sum(np.abs(psi) ** 2) * grid.cell)
    energies = []
    e_old = None
    for _ in range(sim.gs_max_steps):
        psi = half_v * sfft.ifft2(kin * sfft.fft2(half_v * psi))
        psi /= math.sqrt(np.sum(np.abs(psi) ** 2) * grid.cell)
        _, e, _ = _observables(psi, grid, model, x0, p0, 0.0, T, eps)
        energies.append(e)
        if e_old is not None and abs(e - e_old) < sim.gs_tol * abs(e):
            _leak_check(psi, grid, x0, eps, sim, 0.0)
            return Wavefunction2D(psi, grid, x0.copy(), p0, 0.0), e
        e_old = e
    raise ConvergenceError("imaginary-time relaxation did not converge", energies[-20:])


def _mode_frequency_max(model, ref: _Reference, t_f: float, n: int = 401) -> float:
    m = model.ions.masses
    best = 0.0
    for t in np.linspace(0.0, t_f, n):
        x, _ = ref(t)
        h = _hessian(model, x, t) / np.sqrt(np.outer(m, m))
        best = max(best, float(np.linalg.eigvalsh(h).max()))
    return math.sqrt(best) if best > 0 else 0.0


def step_policy(model, ref: _Reference, grid: Grid2D, t_f: float) -> float:
    """dt = min(t_f/4000, 2 pi/(100 Omega_max), hbar pi/(4 T_max))."""
    t_max = float(grid.kinetic(model.ions).max())
    om = _mode_frequency_max(model, ref, t_f)
    cands = [t_f / 4000.0, HBAR * math.pi / (4.0 * t_max)]
    if om > 0:
        cands.append(2.0 * math.pi / (100.0 * om))
    return min(cands)


@dataclass
class Trajectory:
    times: np.ndarray
    norm: np.ndarray
    energy: np.ndarray
    s1_mean: np.ndarray
    s2_mean: np.ndarray
    final: Wavefunction2D
    dt: float
    steps: int
    reference: object = field(repr=False, default=None)


def propagate(model, psi0: Wavefunction2D, protocol: RotationAnsatz, sim: SimConfig = SimConfig(),
              dt: float | None = None, snapshot: Callable | None = None) -> Trajectory:
    """Real-time Strang splitting under the rotating-frame potential of ``protocol``.

    The potential half steps use the mid-step time.  Observables are sampled
    at ``sim.samples`` evenly spaced step boundaries including 0 and t_f; at
    t_f the Hamiltonian is the final lab-frame trap (theta_dot = 0).
    """
    t_f = protocol.t_f
    model = model.with_rotation(protocol.theta_dot)
    grid = psi0.grid
    ref = reference_trajectory(model, t_f, sim.rtol_reference)
    if not np.allclose(ref.x0, psi0.origin, rtol=0.0, atol=1e-9):
        raise ValueError("initial state is not centred on the t=0 equilibrium")
    if sim.n_steps is not None:
        n = int(sim.n_steps)
    else:
        n = int(math.ceil(t_f / (step_policy(model, ref, grid, t_f) if dt is None else dt) - 1e-9))
    n = max(n, 1)
    dt = t_f / n
    eps = _clamp_distance(model, sim)
    y1, y2 = grid.axes
    T = grid.kinetic(model.ions)
    kin = np.exp(-1j * T * dt / HBAR)
    mids = (np.arange(n) + 0.5) * dt
    xm = ref.sol(mids)[:2]
    u = model.springs(mids)
    gm = model.beta
    sample_steps = np.unique(np.round(np.linspace(0, n, max(sim.samples, 2))).astype(int))
    times, norms, energies, s1m, s2m = [], [], [], [], []
    psi = psi0.amplitudes.astype(complex, copy=True)

    def record(step):
        t = step * dt
        x, v = ref(t)
        p = model.ions.masses * v
        t_eval = 0.0 if step == n else t  # final trap is static
        obs_model = model.with_rotation(_zero) if step == n else model
        nm, e, mean = _observables(psi, grid, obs_model, x, p, t_eval, T, eps)
        _leak_check(psi, grid, x, eps, sim, t)
        times.append(t)
        norms.append(nm)
        energies.append(e)
        s1m.append(mean[0])
        s2m.append(mean[1])
        if snapshot is not None:
            snapshot(Wavefunction2D(psi, grid, x, p, t))

    scale = -dt / (2.0 * HBAR)
    next_sample = 0
    last_norm = psi0.norm
    for step in range(n):
        if step == sample_steps[next_sample]:
            record(step)
            next_sample += 1
        x = xm[:, step]
        D = float(x[1] - x[0])
        a1 = 0.5 * u[0][step] * y1**2 + gm * (6 * x[0] ** 2 * y1**2 + 4 * x[0] * y1**3 + y1**4)
        a2 = 0.5 * u[1][step] * y2**2 + gm * (6 * x[1] ** 2 * y2**2 + 4 * x[1] * y2**3 + y2**4)
        _apply_phase(psi, y1, y2, a1, a2, D, model.cc, eps, scale)
        psi = sfft.ifft2(kin * sfft.fft2(psi, overwrite_x=True), overwrite_x=True)
        _apply_phase(psi, y1, y2, a1, a2, D, model.cc, eps, scale)
        if (step + 1) % 1000 == 0:
            nm = float(np.sum(np.abs(psi) ** 2) * grid.cell)
            if abs(nm - last_norm) > sim.norm_tol:
                raise ResolutionError(f"norm drift {nm - last_norm:.3g} over 1000 steps at t = {(step + 1) * dt:.6g} us")
            last_norm = nm
    record(n)
    x, v = ref(t_f)
    final = Wavefunction2D(psi, grid, x, model.ions.masses * v, t_f)
    return Trajectory(np.array(times), np.array(norms), np.array(energies), np.array(s1m),
                      np.array(s2m), final, dt, n, ref)


def excess_energy(traj: Trajectory) -> float:
    """Final minus initial mean energy."""
    return float(traj.energy[-1] - traj.energy[0])


def protocol_excess(ions: IonPair, trap: RigidHarmonicTrap, protocol: RotationAnsatz,
                    sim: SimConfig = SimConfig(), cache: dict | None = None) -> float:
    """Exact excitation energy of a rigid-trap rotation, from the trap ground state."""
    model = RigidHarmonic(trap.k, ions)
    key = (ions, trap.k, sim)
    if cache is not None and key in cache:
        psi0 = cache[key]
    else:
        psi0, _ = ground_state(model, sim=sim, omega_ref=trap.frequency(ions.m1))
        if cache is not None:
            cache[key] = psi0
    sim_run = SimConfig(**{**sim.__dict__, "samples": 2})
    return excess_energy(propagate(model, psi0, protocol, sim_run))


def dump_snapshot(psi: Wavefunction2D, path, hbar: float = HBAR) -> tuple[Path, Path]:
    """Write lab-frame amplitudes as little-endian float64 (re, im) pairs, s1-major.

    A JSON sidecar next to the binary describes the grid in lab coordinates.
    """
    path = Path(path)
    amp = np.ascontiguousarray(psi.lab_amplitudes(hbar))
    pairs = np.empty(amp.shape + (2,), dtype="<f8")
    pairs[..., 0] = amp.real
    pairs[..., 1] = amp.imag
    path.write_bytes(pairs.tobytes(order="C"))
    s1, s2 = psi.lab_axes()
    meta = {
        "t_us": psi.t,
        "n1": psi.grid.n1,
        "n2": psi.grid.n2,
        "s1_first_um": float(s1[0]),
        "s2_first_um": float(s2[0]),
        "ds1_um": psi.grid.ds1,
        "ds2_um": psi.grid.ds2,
        "order": "s1-major",
        "dtype": "<f8 (re, im) pairs",
    }
    side = path.with_suffix(path.suffix + ".json")
    side.write_text(json.dumps(meta, indent=2) + "\n")
    return path, side
