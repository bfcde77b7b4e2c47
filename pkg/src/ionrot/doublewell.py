"""Separable rotation of two different ions in a tilted double well.

External potential per ion: gamma(t) s + u_i(t) s^2/2 + beta s^4 with
u_i = kappa - m_i theta_dot^2 and a common curvature kappa < 0.  Choosing the
ion separation d from the decoupling constraint and the linear force gamma
from force balance keeps the mass-weighted Hessian diagonal equal
(v11 = v22), so the tilt angle stays at -pi/4 and the two dynamical normal
modes evolve independently.  In terms of h_i = u_i/2:

    R  = d^3 [24 beta Cc - 12 beta^2 d^5 - 12 beta d^3 (h1 + h2) + d (h1 - h2)^2]
    A  = -sign(m1 - m2) sqrt(R)
    0  = A (m1-m2)(h1-h2) + d^2 [6 A beta (m1+m2) + (m1-m2)(h1-h2)^2]
         + 24 beta Cc d (m1-m2) + 12 beta^2 d^6 (m1-m2)
    s0 = (A + d^2 (h1 - h2)) / (12 beta d^3)

and gamma follows from the force balance on either ion.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq, least_squares

from .ansatz import RotationAnsatz
from .chain import IonPair, unwrap_tilt, tilt_angle, momentum_shifts
from .optimize import nelder_mead
from .sta import DesignResult, ModeDrive, mode_excess, solve_auxiliary, _objective
from .units import CC, HBAR, to_internal

__all__ = [
    "DoubleWellConfig",
    "SeparableGeometry",
    "InfeasibleConfigurationError",
    "DegenerateConstraintError",
    "InconsistentGeometryError",
    "solve_separation",
    "doublewell_residuals",
    "geometry_residuals",
    "certify",
    "geometry_series",
    "mode_drives_doublewell",
    "doublewell_excess",
    "design_doublewell",
    "DEFAULT_CURVATURE_SI",
    "DEFAULT_BETA_SI",
    "BRANCHES",
]

log = logging.getLogger(__name__)

DEFAULT_CURVATURE_SI = -4.7e-12  # N/m
DEFAULT_BETA_SI = 0.52e-3  # N/m^3

# "split": each ion in its own well (s1 < 0 < s2), the widest admissible root;
# "compact": both ions on one side, the narrowest root
BRANCHES = ("split", "compact")


class InfeasibleConfigurationError(ValueError):
    pass


class DegenerateConstraintError(ValueError):
    pass


class InconsistentGeometryError(RuntimeError):
    pass


@dataclass(frozen=True)
class DoubleWellConfig:
    """Common curvature kappa = m_i omega_i^2 and quartic beta, internal units."""

    ions: IonPair
    kappa: float
    beta: float
    cc: float = CC
    branch: str = "split"

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("the quartic coefficient must be positive")
        if self.branch not in BRANCHES:
            raise ValueError(f"branch must be one of {BRANCHES}, got {self.branch!r}")

    @classmethod
    def from_si(cls, ions: IonPair, curvature: float = DEFAULT_CURVATURE_SI,
                beta: float = DEFAULT_BETA_SI, branch: str = "split") -> "DoubleWellConfig":
        """``curvature`` in N/m, ``beta`` in N/m^3."""
        return cls(ions, to_internal(curvature, "spring-constant"),
                   to_internal(beta, "quartic-coefficient"), CC, branch)

    def springs(self, theta_dot):
        w2 = np.square(theta_dot)
        return self.kappa - self.ions.m1 * w2, self.kappa - self.ions.m2 * w2

    def harmonic_guess(self) -> float:
        a1, a2 = abs(self.kappa), abs(self.kappa)
        return (self.cc * (a1 + a2) / (a1 * a2)) ** (1.0 / 3.0)


@dataclass(frozen=True)
class SeparableGeometry:
    """Decoupled equilibrium; ``positions`` pins (s1, s2) once certified."""

    d: float
    s0: float
    A: float
    gamma: float
    positions: tuple | None = None

    @property
    def s1(self) -> float:
        return self.positions[0] if self.positions else self.s0 - 0.5 * self.d

    @property
    def s2(self) -> float:
        return self.positions[1] if self.positions else self.s0 + 0.5 * self.d


def _radicand(cfg: DoubleWellConfig, d, h1, h2):
    b = cfg.beta
    return d**3 * (24 * b * cfg.cc - 12 * b**2 * d**5 - 12 * b * d**3 * (h1 + h2) + d * (h1 - h2) ** 2)


def _branch(cfg: DoubleWellConfig) -> float:
    return -1.0 if cfg.ions.m1 > cfg.ions.m2 else 1.0


def _constraint(d, cfg: DoubleWellConfig, h1, h2):
    r = _radicand(cfg, d, h1, h2)
    if r < 0:
        return math.nan
    A = _branch(cfg) * math.sqrt(r)
    m1, m2, b = cfg.ions.m1, cfg.ions.m2, cfg.beta
    dm, dh = m1 - m2, h1 - h2
    return (A * dm * dh + d**2 * (6 * A * b * (m1 + m2) + dm * dh**2)
            + 24 * b * cfg.cc * d * dm + 12 * b**2 * d**6 * dm)


def _geometry_from_d(cfg: DoubleWellConfig, d, h1, h2) -> SeparableGeometry:
    A = _branch(cfg) * math.sqrt(_radicand(cfg, d, h1, h2))
    s0 = (A + d**2 * (h1 - h2)) / (12 * cfg.beta * d**3)
    s1 = s0 - 0.5 * d
    # force balance on ion 1: gamma + u1 s1 + 4 beta s1^3 + Cc/d^2 = 0
    gamma = -math.fsum([2 * h1 * s1, 4 * cfg.beta * s1**3, cfg.cc / d**2])
    return SeparableGeometry(d, s0, A, gamma)


def _residual_vector(cfg: DoubleWellConfig, u1, u2, s0, d, gamma):
    b, cc, m1, m2 = cfg.beta, cfg.cc, cfg.ions.m1, cfg.ions.m2
    s1, s2 = s0 - 0.5 * d, s0 + 0.5 * d
    f1 = math.fsum([gamma, u1 * s1, 4 * b * s1**3, cc / d**2])
    f2 = math.fsum([gamma, u2 * s2, 4 * b * s2**3, -cc / d**2])
    c = 2 * cc / d**3
    # m2 m1 (v11 - v22) in force/length units
    dec = math.fsum([m2 * u1, m2 * 12 * b * s1**2, m2 * c, -m1 * u2, -m1 * 12 * b * s2**2, -m1 * c])
    return np.array([f1, f2, dec])


def _polish(cfg: DoubleWellConfig, u1, u2, geo: SeparableGeometry, iters: int = 3) -> SeparableGeometry:
    """Newton refinement of (s0, d, gamma) on force balance and v11 = v22."""
    b, cc, m1, m2 = cfg.beta, cfg.cc, cfg.ions.m1, cfg.ions.m2
    s0, d, g = geo.s0, geo.d, geo.gamma
    for _ in range(iters):
        r = _residual_vector(cfg, u1, u2, s0, d, g)
        s1, s2 = s0 - 0.5 * d, s0 + 0.5 * d
        k1 = u1 + 12 * b * s1**2
        k2 = u2 + 12 * b * s2**2
        fc = 2 * cc / d**3
        J = np.array(
            [
                [k1, -0.5 * k1 - fc, 1.0],
                [k2, 0.5 * k2 + fc, 1.0],
                [24 * b * (m2 * s1 - m1 * s2), -12 * b * (m2 * s1 + m1 * s2) - 3 * fc / d * (m2 - m1), 0.0],
            ]
        )
        step = np.linalg.solve(J, -r)
        s0, d, g = s0 + step[0], d + step[1], g + step[2]
    return SeparableGeometry(d, s0, geo.A, g)


def _roots(f, lo: float, hi: float, n: int = 4001) -> list[float]:
    grid = np.geomspace(lo, hi, n)
    vals = np.array([f(x) for x in grid])
    ok = np.isfinite(vals[:-1]) & np.isfinite(vals[1:]) & (vals[:-1] * vals[1:] < 0)
    return [brentq(f, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15, maxiter=200) for i in np.flatnonzero(ok)]


def solve_separation(cfg: DoubleWellConfig, theta_dot: float = 0.0, d_guess: float | None = None,
                     window: float = 0.05) -> SeparableGeometry:
    """Decoupled equilibrium geometry at rotation speed ``theta_dot``.

    With a warm start the root is sought within +-``window`` of it (branch
    continuity along a protocol).  Without one, the roots in
    [0.1, 100] x the harmonic-magnitude separation are collected and the
    configured branch picks one.  Points with a negative radicand count as
    outside the admissible set.
    """
    if cfg.ions.equal:
        raise DegenerateConstraintError("equal masses make the separability constraint degenerate")
    u1, u2 = (float(x) for x in cfg.springs(theta_dot))
    h1, h2 = 0.5 * u1, 0.5 * u2
    f = lambda d: _constraint(d, cfg, h1, h2)  # noqa: E731
    if d_guess is not None:
        lo, hi = d_guess * (1 - window), d_guess * (1 + window)
        roots = _roots(f, lo, hi, 9)
        if not roots:
            raise InfeasibleConfigurationError(
                f"separable branch lost near d = {d_guess:.6g} um at theta_dot = {theta_dot:.6g} rad/us"
            )
        d = min(roots, key=lambda r: abs(r - d_guess))
        return _polish(cfg, u1, u2, _geometry_from_d(cfg, d, h1, h2))
    guess = cfg.harmonic_guess()
    geos = [_geometry_from_d(cfg, d, h1, h2) for d in _roots(f, 0.1 * guess, 100.0 * guess)]
    if cfg.branch == "split":
        geos = [g for g in geos if g.s1 < 0 < g.s2]
    if not geos:
        raise InfeasibleConfigurationError(
            f"no admissible {cfg.branch} separation at theta_dot = {theta_dot:.6g} rad/us"
        )
    pick = max(geos, key=lambda g: g.d) if cfg.branch == "split" else min(geos, key=lambda g: g.d)
    return _polish(cfg, u1, u2, pick)


def _exact_forces(cfg: DoubleWellConfig, u1, u2, s1, s2, gamma):
    """dV/ds_i at float positions, evaluated in exact rational arithmetic."""
    F = Fraction
    b, cc = F(cfg.beta), F(cfg.cc)
    x1, x2, g = F(s1), F(s2), F(gamma)
    coul = cc / (x2 - x1) ** 2
    f1 = g + F(u1) * x1 + 4 * b * x1**3 + coul
    f2 = g + F(u2) * x2 + 4 * b * x2**3 - coul
    return float(f1), float(f2)


def certify(cfg: DoubleWellConfig, theta_dot: float, geo: SeparableGeometry, span: int = 48) -> SeparableGeometry:
    """Nudge (s1, s2, gamma) by a few ulps to minimise the exact force residual.

    Near |s| ~ 100 um a single ulp of position already moves the force by
    ~1e-10, so the representable equilibrium is picked from the lattice of
    neighbouring doubles.  The decoupling changes only at the 1e-15 level.
    """
    u1, u2 = (float(x) for x in cfg.springs(theta_dot))
    m1, m2, b, cc = cfg.ions.m1, cfg.ions.m2, cfg.beta, cfg.cc
    s1, s2 = geo.s1, geo.s2
    f1, f2 = _exact_forces(cfg, u1, u2, s1, s2, geo.gamma)
    d = s2 - s1
    fc = 2 * cc / d**3
    k1 = u1 + 12 * b * s1**2
    k2 = u2 + 12 * b * s2**2
    h1, h2 = np.spacing(s1), np.spacing(s2)
    # change of f2 - f1 per ulp of s1 and of s2
    a1 = h1 * (-fc - (k1 + fc))
    a2 = h2 * ((k2 + fc) + fc)
    # change of (v11 - v22) / |v12| per ulp
    v = _hessian(cfg, u1, u2, s1, s2, d)
    q = 3 * fc / d
    v12 = abs(v[0, 1])
    e1 = h1 * ((24 * b * s1 + q) / m1 - q / m2) / v12
    e2 = h2 * ((-q) / m1 - (24 * b * s2 - q) / m2) / v12
    dec0 = (v[0, 0] - v[1, 1]) / v12
    steps = np.arange(-span, span + 1)
    delta = (f2 - f1) + a1 * steps[:, None] + a2 * steps[None, :]
    dec = dec0 + e1 * steps[:, None] + e2 * steps[None, :]
    # decoupling only needs to stay inside half its 1e-8 limit; among those
    # lattice points take the smallest force mismatch
    ok = np.abs(dec) <= max(5e-9, 2.0 * np.abs(dec).min())
    score = np.where(ok, np.abs(delta), np.inf)
    i, j = np.unravel_index(np.argmin(score), score.shape)
    n1, n2 = s1 + steps[i] * h1, s2 + steps[j] * h2
    f1, f2 = _exact_forces(cfg, u1, u2, n1, n2, geo.gamma)
    g = geo.gamma - 0.5 * (f1 + f2)
    best = None
    for cand in (g, np.nextafter(g, -np.inf), np.nextafter(g, np.inf)):
        r = _exact_forces(cfg, u1, u2, n1, n2, float(cand))
        if best is None or math.hypot(*r) < best[0]:
            best = (math.hypot(*r), float(cand))
    return replace(geo, d=n2 - n1, s0=0.5 * (n1 + n2), gamma=best[1], positions=(float(n1), float(n2)))


def geometry_residuals(cfg: DoubleWellConfig, theta_dot: float, geo: SeparableGeometry):
    """(|grad V| at the ions, |v11 - v22| / |v12|) of a geometry sample.

    The gradient is evaluated exactly for the stored doubles.
    """
    u1, u2 = (float(x) for x in cfg.springs(theta_dot))
    f1, f2 = _exact_forces(cfg, u1, u2, geo.s1, geo.s2, geo.gamma)
    v = _hessian(cfg, u1, u2, geo.s1, geo.s2, geo.s2 - geo.s1)
    dec = abs(v[0, 0] - v[1, 1]) / abs(v[0, 1])
    return float(math.hypot(f1, f2)), float(dec)


def _hessian(cfg: DoubleWellConfig, u1, u2, s1, s2, d):
    m1, m2 = cfg.ions.m1, cfg.ions.m2
    c = 2 * cfg.cc / d**3
    v11 = (u1 + 12 * cfg.beta * s1**2 + c) / m1
    v22 = (u2 + 12 * cfg.beta * s2**2 + c) / m2
    v12 = -c / math.sqrt(m1 * m2)
    return np.array([[v11, v12], [v12, v22]])


def _central_diff(y, h):
    """Fourth-order central first derivative; y is already padded by 2 on each side."""
    return (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * h)


def _batch_geometry(cfg: DoubleWellConfig, theta_dot, nodes: int = 33, iters: int = 4):
    """(s0, d, gamma) at many speeds: spline over theta_dot^2 nodes, then batched Newton.

    The nodes are solved by warm-started continuation, so branch selection
    is the same as in :func:`solve_separation`.
    """
    w2 = np.square(np.asarray(theta_dot, float))
    grid = np.linspace(0.0, float(w2.max()), nodes) if w2.max() > 0 else np.zeros(1)
    prev = None
    rows = []
    for w in np.sqrt(grid):
        g = solve_separation(cfg, float(w), None if prev is None else prev.d)
        if prev is not None and abs(g.d - prev.d) > 0.05 * prev.d:
            raise InconsistentGeometryError(f"geometry branch jump at theta_dot = {w:.6g} rad/us")
        prev = g
        rows.append((g.s0, g.d, g.gamma))
    rows = np.array(rows)
    if grid.size == 1:
        return tuple(np.full(w2.shape, v) for v in rows[0])
    s0, d, g = (CubicSpline(grid, rows[:, k])(w2) for k in range(3))
    b, cc, m1, m2 = cfg.beta, cfg.cc, cfg.ions.m1, cfg.ions.m2
    u1, u2 = cfg.springs(np.sqrt(w2))
    for _ in range(iters):
        s1, s2 = s0 - 0.5 * d, s0 + 0.5 * d
        fc = 2 * cc / d**3
        k1 = u1 + 12 * b * s1**2
        k2 = u2 + 12 * b * s2**2
        r = np.stack([g + u1 * s1 + 4 * b * s1**3 + cc / d**2,
                      g + u2 * s2 + 4 * b * s2**3 - cc / d**2,
                      m2 * (u1 + 12 * b * s1**2 + fc) - m1 * (u2 + 12 * b * s2**2 + fc)], axis=-1)
        J = np.zeros(w2.shape + (3, 3))
        J[:, 0] = np.stack([k1, -0.5 * k1 - fc, np.ones_like(k1)], axis=-1)
        J[:, 1] = np.stack([k2, 0.5 * k2 + fc, np.ones_like(k2)], axis=-1)
        J[:, 2] = np.stack([24 * b * (m2 * s1 - m1 * s2),
                            -12 * b * (m2 * s1 + m1 * s2) - 3 * fc / d * (m2 - m1), np.zeros_like(k1)], axis=-1)
        step = np.linalg.solve(J, -r[..., None])[..., 0]
        s0, d, g = s0 + step[:, 0], d + step[:, 1], g + step[:, 2]
    if not np.all(np.abs(step[:, 1]) <= 1e-9 * d):
        raise InconsistentGeometryError("batched geometry refinement did not converge")
    return s0, d, g


def _float_residuals(cfg: DoubleWellConfig, theta_dot, s1, s2, gamma):
    u1, u2 = cfg.springs(theta_dot)
    b, cc = cfg.beta, cfg.cc
    coul = cc / (s2 - s1) ** 2
    f1 = gamma + u1 * s1 + 4 * b * s1**3 + coul
    f2 = gamma + u2 * s2 + 4 * b * s2**3 - coul
    v11, v22, v12 = _hessian_parts(cfg, u1, u2, s1, s2, s2 - s1)
    return np.hypot(f1, f2), np.abs(v11 - v22) / np.abs(v12)


def _hessian_parts(cfg: DoubleWellConfig, u1, u2, s1, s2, d):
    m1, m2 = cfg.ions.m1, cfg.ions.m2
    c = 2 * cfg.cc / d**3
    return (u1 + 12 * cfg.beta * s1**2 + c) / m1, (u2 + 12 * cfg.beta * s2**2 + c) / m2, -c / np.sqrt(m1 * m2)


def geometry_series(cfg: DoubleWellConfig, ansatz: RotationAnsatz, n: int = 2001, check: bool = True,
                    certified: bool = False, fast: bool = False):
    """Geometry along the protocol on n evenly spaced samples with time derivatives.

    The ansatz speed is odd about both end points, so the geometry (a
    function of theta_dot^2) is even there; the series is padded by
    reflection for the end-point derivatives.  ``certified`` replaces each
    sample by its lattice-certified version (see :func:`certify`).  ``fast``
    solves all samples in one batch and reports float residuals; it is
    meant for the optimizer's inner loop.
    """
    t = np.linspace(0.0, ansatz.t_f, n)
    h = t[1] - t[0]
    td = ansatz.theta_dot(t)
    out = {"t": t, "theta_dot": td}
    if fast:
        s0, d, gamma = _batch_geometry(cfg, td)
        out.update(d=d, s0=s0, gamma=gamma, A=np.full(n, np.nan))
        out["grad_norm"], out["decoupling"] = _float_residuals(cfg, td, s0 - 0.5 * d, s0 + 0.5 * d, gamma)
    else:
        geos = []
        prev = None
        for w in td:
            g = solve_separation(cfg, float(w), None if prev is None else prev.d)
            if prev is not None and (abs(g.d - prev.d) > 0.05 * prev.d or abs(g.gamma - prev.gamma) > 0.05 * max(abs(prev.gamma), 1e-300)):
                raise InconsistentGeometryError(f"geometry branch jump at theta_dot = {w:.6g} rad/us")
            prev = g
            geos.append(certify(cfg, float(w), g) if certified else g)
        out.update(d=np.array([g.d for g in geos]), s0=np.array([g.s0 for g in geos]),
                   gamma=np.array([g.gamma for g in geos]), A=np.array([g.A for g in geos]))
        res = np.array([geometry_residuals(cfg, float(w), g) for w, g in zip(td, geos)])
        out["grad_norm"], out["decoupling"] = res[:, 0], res[:, 1]
    if check and out["decoupling"].max() > 1e-6:
        raise InconsistentGeometryError(f"decoupling violated: max |v11-v22|/|v12| = {out['decoupling'].max():.3g}")
    for key in ("d", "s0"):
        y = out[key]
        padded = np.concatenate([y[2:0:-1], y, y[-2:-4:-1]])
        out[key + "_dot"] = _central_diff(padded, h)
    u1, u2 = cfg.springs(td)
    s1, s2 = out["s0"] - 0.5 * out["d"], out["s0"] + 0.5 * out["d"]
    v11, v22, v12 = _hessian_parts(cfg, u1, u2, s1, s2, out["d"])
    mean, half = 0.5 * (v11 + v22), np.hypot(0.5 * (v11 - v22), v12)
    out["omega_plus_sq"], out["omega_minus_sq"] = mean + half, mean - half
    out["mu"] = unwrap_tilt([tilt_angle([[a, c], [c, b_]]) for a, b_, c in zip(v11, v22, v12)])
    s1d = out["s0_dot"] - 0.5 * out["d_dot"]
    s2d = out["s0_dot"] + 0.5 * out["d_dot"]
    p_plus, p_minus = momentum_shifts(cfg.ions, -math.pi / 4, s1d, s2d)
    out["p0_plus"], out["p0_minus"] = p_plus, p_minus
    for key in ("p0_plus", "p0_minus"):
        y = out[key]
        padded = np.concatenate([-y[2:0:-1], y, -y[-2:-4:-1]])  # odd about the ends
        out[key + "_dot"] = _central_diff(padded, h)
    return out


def mode_drives_doublewell(series) -> tuple[ModeDrive, ModeDrive]:
    """Spline-interpolated drives of the (+, -) modes from a geometry series."""
    t = series["t"]
    drives = []
    for tag in ("plus", "minus"):
        w = CubicSpline(t, series[f"omega_{tag}_sq"])
        f = CubicSpline(t, series[f"p0_{tag}_dot"])
        drives.append(ModeDrive(w, f, float(series[f"omega_{tag}_sq"][0])))
    return drives[0], drives[1]


def doublewell_excess(cfg: DoubleWellConfig, ansatz: RotationAnsatz, n: int = 2001, fast: bool = False):
    """Final excess energies of the two modes and the initial energy E0 = E''_0+ + E''_0-."""
    series = geometry_series(cfg, ansatz, n, fast=fast)
    plus, minus = mode_drives_doublewell(series)
    excess = []
    for drive in (plus, minus):
        if drive.omega0_sq <= 0:
            raise InfeasibleConfigurationError("initial normal mode is not confined")
        st = solve_auxiliary(drive, ansatz.t_f).final
        excess.append(float(mode_excess(st, drive.omega_sq(ansatz.t_f), drive.p0_dot(ansatz.t_f), drive.omega0_sq)))
    e0 = 0.5 * HBAR * (math.sqrt(plus.omega0_sq) + math.sqrt(minus.omega0_sq))
    return tuple(excess), e0, series


def _excess_residuals(state, omega_sq, p0_dot, omega0_sq, hbar=HBAR):
    """Components whose squares add up to mode_excess (Omega^2 - Omega0^2 taken by modulus)."""
    c = hbar / (4.0 * math.sqrt(omega0_sq))
    b, bd, a, ad = state.b, state.b_dot, state.alpha, state.alpha_dot
    return [
        math.sqrt(c) * bd,
        math.sqrt(c * omega0_sq) * (b - 1.0 / b),
        math.sqrt(c * abs(omega_sq - omega0_sq)) * b,
        ad / math.sqrt(2.0),
        math.sqrt(0.5 * omega_sq) * (a - p0_dot / omega_sq),
    ]


def doublewell_residuals(cfg: DoubleWellConfig, ansatz: RotationAnsatz, n: int = 2001,
                         fast: bool = False) -> np.ndarray:
    """Residual vector with sum of squares equal to the summed final mode excess."""
    series = geometry_series(cfg, ansatz, n, fast=fast)
    out = []
    for drive in mode_drives_doublewell(series):
        st = solve_auxiliary(drive, ansatz.t_f).final
        out += _excess_residuals(st, drive.omega_sq(ansatz.t_f), drive.p0_dot(ansatz.t_f), drive.omega0_sq)
    return np.array(out)


def design_doublewell(cfg: DoubleWellConfig, t_f: float, theta_f: float, n_free: int,
                      restarts: int = 0, seed: int = 0, max_iter: int = 300, step: float = 1e-2,
                      fatol: float = 1e-12, n: int = 2001):
    """Minimise Delta E / E0 of the decoupled modes; returns (DesignResult, series).

    The result's energy unit is E0, so ``objective_quanta`` is Delta E / E0.
    The zero set is a valley of width ~1e-6 in the coefficients while the
    objective spans many decades, so the Nelder-Mead result is polished by a
    Levenberg-Marquardt solve on the per-mode residual components.  The
    search uses the batched geometry; the returned series is the scalar one.
    """
    if not 0 <= n_free <= 2:
        raise ValueError("the double-well design uses n_free in 0..2")
    _, e0, _ = doublewell_excess(cfg, RotationAnsatz(0.0, t_f), n=5)

    def excess(x):
        try:
            return doublewell_excess(cfg, RotationAnsatz.from_free(theta_f, t_f, x, n_free), n, fast=True)[0]
        except (InfeasibleConfigurationError, InconsistentGeometryError):
            return (np.inf,)

    opt = nelder_mead(_objective(excess, e0), n_free, step, fatol, max_iter, restarts, seed)
    x = opt.x
    if n_free > 0 and np.isfinite(opt.fun):
        scale = 1.0 / math.sqrt(e0)

        def resid(c):
            try:
                return scale * doublewell_residuals(cfg, RotationAnsatz.from_free(theta_f, t_f, c, n_free), n,
                                                    fast=True)
            except (InfeasibleConfigurationError, InconsistentGeometryError):
                return np.full(10, 1e6)

        ls = least_squares(resid, x, method="lm", x_scale=step, xtol=1e-15, ftol=1e-15, gtol=1e-15,
                           max_nfev=100 * (n_free + 1))
        if 2.0 * ls.cost < opt.fun:
            x = ls.x
            opt.trace.append(2.0 * ls.cost)
            opt.nfev += ls.nfev
    ans = RotationAnsatz.from_free(theta_f, t_f, x, n_free)
    finals, e0, series = doublewell_excess(cfg, ans, n)
    result = DesignResult(theta_f, t_f, n_free, ans.coefficients, sum(finals), e0, finals,
                          opt.trace, opt.converged, opt.nfev, "double-well")
    return result, series
