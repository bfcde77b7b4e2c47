"""Adaptive Dormand-Prince 5(4) integration of the Ermakov/Newton pair.

The state is (b, b', alpha, alpha') for one mode:

    b''     = -W(t) b + W0 / b^3
    alpha'' = -W(t) alpha + F(t)

with W the squared mode frequency and F the momentum-shift rate.  W and F
are supplied as cubic splines on a uniform grid so the whole step loop runs
in compiled code.
"""
from __future__ import annotations

import numpy as np
from numba import njit
from scipy.interpolate import CubicSpline

__all__ = ["TabulatedDrive", "integrate_mode", "STATUS_OK", "STATUS_UNDERFLOW", "STATUS_MAXSTEPS"]

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_MAXSTEPS = 2

# Dormand & Prince (1980) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)


class TabulatedDrive:
    """Cubic-spline tables of W(t) and F(t) on a uniform grid over [t0, t1]."""

    def __init__(self, omega_sq, p0_dot, t0: float, t1: float, n: int = 4001):
        t = np.linspace(t0, t1, n)
        w = np.broadcast_to(np.asarray(omega_sq(t), dtype=float), t.shape)
        f = np.broadcast_to(np.asarray(p0_dot(t), dtype=float), t.shape)
        self.t0 = float(t0)
        self.h = float(t[1] - t[0])
        bad = ~(np.isfinite(w) & np.isfinite(f))
        self.finite = not bool(bad.any())
        # first tabulated time where the drive is not finite; callers refuse such tables
        self.first_bad = float(t[np.argmax(bad)]) if bad.any() else None
        if bad.any():
            w, f = np.where(bad, 0.0, w), np.where(bad, 0.0, f)
        self.w_coef = np.ascontiguousarray(CubicSpline(t, w).c)
        self.f_coef = np.ascontiguousarray(CubicSpline(t, f).c)


@njit(cache=True)
def _spline(coef, t0, h, t):
    n = coef.shape[1]
    i = int((t - t0) / h)
    if i < 0:
        i = 0
    elif i > n - 1:
        i = n - 1
    x = t - (t0 + i * h)
    return ((coef[0, i] * x + coef[1, i]) * x + coef[2, i]) * x + coef[3, i]


@njit(cache=True)
def _rhs(t, y, wc, fc, t0, h, w0):
    w = _spline(wc, t0, h, t)
    f = _spline(fc, t0, h, t)
    out = np.empty(4)
    out[0] = y[1]
    out[1] = -w * y[0] + w0 / y[0] ** 3
    out[2] = y[3]
    out[3] = -w * y[2] + f
    return out


@njit(cache=True)
def _dopri5(y0, t_eval, wc, fc, t0, h_tab, w0, rtol, atol, max_steps):
    m = t_eval.size
    out = np.empty((m, 4))
    out[0] = y0
    y = y0.copy()
    t = t_eval[0]
    direction = 1.0 if t_eval[-1] >= t_eval[0] else -1.0
    span = abs(t_eval[-1] - t_eval[0])
    h = direction * max(span * 1e-4, 1e-12)
    k1 = _rhs(t, y, wc, fc, t0, h_tab, w0)
    steps = 0
    for j in range(1, m):
        target = t_eval[j]
        while direction * (target - t) > 0.0:
            if steps >= max_steps:
                return out, 2, t, steps
            last = False
            if direction * (t + h - target) >= 0.0:
                h = target - t
                last = True
            if abs(h) <= 1e-14 * max(abs(t), span):
                return out, 1, t, steps
            k2 = _rhs(t + _C2 * h, y + h * _A21 * k1, wc, fc, t0, h_tab, w0)
            k3 = _rhs(t + _C3 * h, y + h * (_A31 * k1 + _A32 * k2), wc, fc, t0, h_tab, w0)
            k4 = _rhs(t + _C4 * h, y + h * (_A41 * k1 + _A42 * k2 + _A43 * k3), wc, fc, t0, h_tab, w0)
            k5 = _rhs(
                t + _C5 * h,
                y + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4),
                wc, fc, t0, h_tab, w0,
            )
            k6 = _rhs(
                t + h,
                y + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5),
                wc, fc, t0, h_tab, w0,
            )
            yn = y + h * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
            k7 = _rhs(t + h, yn, wc, fc, t0, h_tab, w0)
            err = h * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7)
            acc = 0.0
            for i in range(4):
                sc = atol + rtol * max(abs(y[i]), abs(yn[i]))
                acc += (err[i] / sc) ** 2
            en = np.sqrt(acc / 4.0)
            steps += 1
            if en <= 1.0:
                t = target if last else t + h
                y = yn
                k1 = k7
                fac = 5.0 if en == 0.0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
                h *= fac
            else:
                if en != en:
                    fac = 0.2
                else:
                    fac = max(0.2, 0.9 * en ** -0.2)
                h *= fac
        out[j] = y
    return out, 0, t, steps


def integrate_mode(y0, t_eval, drive: TabulatedDrive, omega0_sq: float,
                   rtol: float = 1e-10, atol: float = 1e-12, max_steps: int = 1_000_000):
    """Integrate one mode; returns (states[len(t_eval), 4], status, t_stop, steps)."""
    t_eval = np.ascontiguousarray(t_eval, dtype=float)
    y0 = np.ascontiguousarray(y0, dtype=float)
    return _dopri5(y0, t_eval, drive.w_coef, drive.f_coef, drive.t0, drive.h,
                   float(omega0_sq), rtol, atol, max_steps)
