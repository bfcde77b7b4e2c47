"""Mechanics of a two-ion chain on a rotating line.

Ion 1 always sits at the smaller coordinate (s1 < s2).  Spring constants
are in internal units (amu/us^2), positions in um, times in us.  The
Hessian ``v`` is the mass-weighted one, v_ij = d2V/ds_i ds_j / sqrt(m_i m_j).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .units import CC, CODATA2018

__all__ = [
    "CA40",
    "BE9",
    "IonPair",
    "RigidHarmonicTrap",
    "EffectiveSprings",
    "ChainGeometry",
    "ModeDecomposition",
    "EquilibriumError",
    "effective_springs",
    "equilibrium_harmonic",
    "equilibrium_rate_harmonic",
    "harmonic_potential",
    "harmonic_gradient",
    "hessian_harmonic",
    "tilt_angle",
    "unwrap_tilt",
    "mode_frequencies_sq",
    "momentum_shifts",
    "mode_decomposition",
    "separability_drift",
    "magnetic_electric_ratio",
    "equilibrium_numeric",
]

CA40 = 40.0
BE9 = 9.0


class EquilibriumError(ValueError):
    """No (or no meaningful) equilibrium configuration exists."""


@dataclass(frozen=True)
class IonPair:
    m1: float
    m2: float

    def __post_init__(self):
        if not (self.m1 > 0 and self.m2 > 0):
            raise ValueError(f"ion masses must be positive, got {self.m1}, {self.m2}")

    @property
    def masses(self) -> np.ndarray:
        return np.array([self.m1, self.m2])

    @property
    def equal(self) -> bool:
        return self.m1 == self.m2


@dataclass(frozen=True)
class RigidHarmonicTrap:
    """Common external potential k s^2 / 2 along the trap line."""

    k: float

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError(f"spring constant must be positive, got {self.k}")

    @classmethod
    def from_frequency(cls, omega: float, mass: float) -> "RigidHarmonicTrap":
        """Trap giving angular frequency ``omega`` to an ion of mass ``mass``."""
        return cls(mass * omega**2)

    def frequency(self, mass: float) -> float:
        return math.sqrt(self.k / mass)


@dataclass(frozen=True)
class EffectiveSprings:
    u1: float
    u2: float

    @property
    def confining(self) -> bool:
        return bool(np.all(np.asarray(self.u1) > 0) and np.all(np.asarray(self.u2) > 0))


@dataclass(frozen=True)
class ChainGeometry:
    s1_eq: float
    s2_eq: float

    @property
    def d(self):
        return self.s2_eq - self.s1_eq


@dataclass(frozen=True)
class ModeDecomposition:
    mu: float
    omega_plus_sq: float
    omega_minus_sq: float
    hessian: np.ndarray
    p0_plus: float = 0.0
    p0_minus: float = 0.0


def effective_springs(trap: RigidHarmonicTrap, ions: IonPair, theta_dot) -> EffectiveSprings:
    """u_i = k - m_i theta_dot^2 (the centrifugal term softens the trap)."""
    w2 = np.square(theta_dot)
    return EffectiveSprings(trap.k - ions.m1 * w2, trap.k - ions.m2 * w2)


def equilibrium_harmonic(springs: EffectiveSprings, cc: float = CC) -> ChainGeometry:
    """Closed-form equilibrium of u1 s1^2/2 + u2 s2^2/2 + cc/(s2 - s1)."""
    u1 = np.asarray(springs.u1, dtype=float)
    u2 = np.asarray(springs.u2, dtype=float)
    if np.any(u1 <= 0) or np.any(u2 <= 0):
        raise EquilibriumError("equilibrium undefined for non-confining springs (u_i <= 0)")
    tot = u1 + u2
    s1 = -np.cbrt(cc * u2**2 / (u1 * tot**2))
    s2 = np.cbrt(cc * u1**2 / (u2 * tot**2))
    if s1.ndim == 0:
        return ChainGeometry(float(s1), float(s2))
    return ChainGeometry(s1, s2)


def equilibrium_rate_harmonic(trap: RigidHarmonicTrap, ions: IonPair, theta_dot, theta_ddot):
    """Time derivatives (ds1_eq/dt, ds2_eq/dt) by the chain rule through u1, u2."""
    springs = effective_springs(trap, ions, theta_dot)
    geo = equilibrium_harmonic(springs)
    u1, u2 = springs.u1, springs.u2
    du1 = -2.0 * ions.m1 * theta_dot * theta_ddot
    du2 = -2.0 * ions.m2 * theta_dot * theta_ddot
    tot = u1 + u2
    # d ln|s1| = (1/3)(2 du2/u2 - du1/u1 - 2 d(u1+u2)/(u1+u2)), symmetric for s2
    dln1 = (2.0 * du2 / u2 - du1 / u1 - 2.0 * (du1 + du2) / tot) / 3.0
    dln2 = (2.0 * du1 / u1 - du2 / u2 - 2.0 * (du1 + du2) / tot) / 3.0
    return geo.s1_eq * dln1, geo.s2_eq * dln2


def harmonic_potential(springs: EffectiveSprings, s1, s2, cc: float = CC):
    return 0.5 * springs.u1 * s1**2 + 0.5 * springs.u2 * s2**2 + cc / (s2 - s1)


def harmonic_gradient(springs: EffectiveSprings, s1, s2, cc: float = CC):
    f = cc / (s2 - s1) ** 2
    return springs.u1 * s1 + f, springs.u2 * s2 - f


def hessian_harmonic(
    springs: EffectiveSprings, ions: IonPair, geometry: ChainGeometry, cc: float = CC
) -> np.ndarray:
    """Mass-weighted Hessian of the rotating-frame harmonic potential at equilibrium."""
    d = geometry.d
    if not np.all(np.asarray(d) > 0):
        raise EquilibriumError("degenerate geometry: ion separation must be positive")
    c = 2.0 * cc / d**3
    v11 = (c + springs.u1) / ions.m1
    v22 = (c + springs.u2) / ions.m2
    v12 = -c / math.sqrt(ions.m1 * ions.m2)
    return np.array([[v11, v12], [v12, v22]])


def tilt_angle(v) -> float:
    """Angle mu diagonalising v, with tan 2mu = 2 v12 / (v11 - v22).

    Returns the principal value 2mu in (-pi/2, pi/2).  Equal diagonals give
    mu = -pi/4, the equal-ion value.
    """
    v11, v12, v22 = v[0][0], v[0][1], v[1][1]
    diff = v11 - v22
    if diff == 0.0 or abs(diff) <= 1e-15 * (abs(v11) + abs(v22)):
        return -math.pi / 4.0
    return 0.5 * math.atan(2.0 * v12 / diff)


def unwrap_tilt(mus: Sequence[float]) -> np.ndarray:
    """Shift each angle by multiples of pi/2 to stay closest to its predecessor."""
    out = np.array(mus, dtype=float)
    q = math.pi / 2.0
    for i in range(1, out.size):
        out[i] -= q * round((out[i] - out[i - 1]) / q)
    return out


def mode_frequencies_sq(v, mu: float) -> tuple[float, float]:
    v11, v12, v22 = v[0][0], v[0][1], v[1][1]
    c2, s2, sin2 = math.cos(mu) ** 2, math.sin(mu) ** 2, math.sin(2.0 * mu)
    plus = v11 * c2 + v22 * s2 + v12 * sin2
    minus = v11 * s2 + v22 * c2 - v12 * sin2
    return plus, minus


def momentum_shifts(ions: IonPair, mu: float, s1_rate, s2_rate):
    """Momentum shifts p0+, p0- of the normal-mode frame moving with equilibrium."""
    a1 = math.sqrt(ions.m1) * s1_rate
    a2 = math.sqrt(ions.m2) * s2_rate
    c, s = math.cos(mu), math.sin(mu)
    return a1 * c + a2 * s, -a1 * s + a2 * c


def mode_decomposition(v, ions: IonPair, eq_rate=(0.0, 0.0)) -> ModeDecomposition:
    """Tilt angle, squared mode frequencies and momentum shifts.

    ``eq_rate`` holds the time derivatives of the equilibrium positions.
    Squared frequencies may come out negative for inverted potentials.
    """
    v = np.asarray(v, dtype=float)
    if not np.allclose(v, v.T, rtol=1e-14, atol=0.0):
        raise ValueError("hessian must be symmetric")
    mu = tilt_angle(v)
    plus, minus = mode_frequencies_sq(v, mu)
    p_plus, p_minus = momentum_shifts(ions, mu, *eq_rate)
    return ModeDecomposition(mu, plus, minus, v, p_plus, p_minus)


def separability_drift(trap, ions: IonPair, theta_dot_samples) -> list[float]:
    """Tilt angle of the harmonic chain for each rotation speed.

    ``trap`` is one trap or a sequence of traps (one per sample), the latter
    for non-rigid traps where k changes along with the rotation speed.
    Constant output means the dynamical normal modes stay decoupled.
    """
    samples = list(theta_dot_samples)
    traps = list(trap) if isinstance(trap, (list, tuple)) else [trap] * len(samples)
    if len(traps) != len(samples):
        raise ValueError("need one trap per theta_dot sample")
    mus = []
    for tr, w in zip(traps, samples):
        springs = effective_springs(tr, ions, w)
        geo = equilibrium_harmonic(springs)
        mus.append(tilt_angle(hessian_harmonic(springs, ions, geo)))
    return [float(m) for m in unwrap_tilt(mus)]


def magnetic_electric_ratio(r: float, theta_dot: float) -> float:
    """Magnetic-to-Coulomb force ratio r^2 theta_dot^2 / (4 c^2) (SI inputs)."""
    if not r > 0:
        raise ValueError("separation must be positive")
    c = CODATA2018.speed_of_light
    return r**2 * theta_dot**2 / (4.0 * c**2)


def equilibrium_numeric(
    grad: Callable[[np.ndarray], np.ndarray],
    hess: Callable[[np.ndarray], np.ndarray],
    guess,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> np.ndarray:
    """Stationary point of a two-ion potential by safeguarded Newton iteration.

    Newton steps are halved until the gradient norm decreases and the ion
    ordering is kept; if that fails the step falls back to plain gradient
    descent scaled by the Hessian diagonal.  Converges when the step is below
    ``tol`` relative to the positions.
    """
    s = np.array(guess, dtype=float)
    g = np.asarray(grad(s), dtype=float)
    for _ in range(max_iter):
        h = np.asarray(hess(s), dtype=float)
        try:
            step = -np.linalg.solve(h, g)
        except np.linalg.LinAlgError:
            step = -g / np.abs(np.diag(h)).max()
        if np.abs(step).max() <= tol * max(np.abs(s).max(), 1.0):
            return s
        gnorm = np.linalg.norm(g)
        lam = 1.0
        for _ in range(60):
            trial = s + lam * step
            if trial[1] > trial[0]:
                gt = np.asarray(grad(trial), dtype=float)
                if np.linalg.norm(gt) < gnorm:
                    break
                if lam * np.abs(step).max() <= tol * np.abs(s).max():
                    raise EquilibriumError(f"equilibrium search stalled (|grad| = {gnorm:.3g})")
            lam *= 0.5
        else:
            step = -g / np.abs(np.diag(h)).max()
            lam = 1.0
            trial = s + step
            gt = np.asarray(grad(trial), dtype=float)
        s, g = trial, gt
        if lam * np.abs(step).max() <= tol * max(np.abs(s).max(), 1.0):
            return s
    raise EquilibriumError(f"equilibrium search did not converge (|grad| = {np.linalg.norm(g):.3g})")
