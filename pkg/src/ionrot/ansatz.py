"""Rotation-angle protocols built from odd cosine harmonics.

theta(t) = theta_f/2 + sum_j a_j cos((2j+1) x),  x = pi t / t_f,  j = 0..5,
where the first two amplitudes are fixed by the free coefficients c3..c6 so
that theta(0) = 0, theta(t_f) = theta_f and the first two derivatives vanish
at both ends.

Evaluation groups the harmonics per coefficient::

    theta = theta_f/2 - theta_f (9 cos x - cos 3x)/16 + sum_c c * g_c(x)
    g_3 = cos 5x + 2 cos x - 3 cos 3x,   g_4 = cos 7x + 5 cos x - 6 cos 3x, ...

Each g_c and its even derivatives vanish exactly at x = 0, pi in floating
point (the weights are small integers), and the odd derivatives are sine
sums evaluated from the nearer end, so the boundary identities hold to the
last bit for any coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["RotationAnsatz", "HARMONICS"]

HARMONICS = np.array([1, 3, 5, 7, 9, 11], dtype=float)

# rows: base shape (scaled by theta_f), g_3, g_4, g_5, g_6
_WEIGHTS = np.array(
    [
        [-9.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        [2.0, -3.0, 1.0, 0.0, 0.0, 0.0],
        [5.0, -6.0, 0.0, 1.0, 0.0, 0.0],
        [9.0, -10.0, 0.0, 0.0, 1.0, 0.0],
        [14.0, -15.0, 0.0, 0.0, 0.0, 1.0],
    ]
)
_BASE_SCALE = 1.0 / 16.0


@dataclass(frozen=True)
class RotationAnsatz:
    theta_f: float
    t_f: float
    c3: float = 0.0
    c4: float = 0.0
    c5: float = 0.0
    c6: float = 0.0
    _mix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.t_f > 0:
            raise ValueError(f"t_f must be positive, got {self.t_f}")
        mix = np.array([self.theta_f * _BASE_SCALE, self.c3, self.c4, self.c5, self.c6])
        object.__setattr__(self, "_mix", mix)

    @classmethod
    def from_free(cls, theta_f: float, t_f: float, free=(), n_free: int | None = None):
        """Build from the first ``n_free`` coefficients; the rest are pinned to 0."""
        free = [float(c) for c in np.ravel(free)]
        n = len(free) if n_free is None else n_free
        if not 0 <= n <= 4 or len(free) < n:
            raise ValueError(f"n_free must be in 0..4 with {n} values supplied")
        c = free[:n] + [0.0] * (4 - n)
        return cls(theta_f, t_f, *c)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([self.c3, self.c4, self.c5, self.c6])

    @property
    def amplitudes(self) -> np.ndarray:
        """Cosine amplitudes a_1, a_3, c3..c6 of the ungrouped expression."""
        return self._mix @ _WEIGHTS

    def _derivative(self, t, order: int):
        t = np.asarray(t, dtype=float)
        tol = 1e-12 * self.t_f
        if np.any(t < -tol) or np.any(t > self.t_f + tol):
            raise ValueError(f"time outside protocol window [0, {self.t_f}]")
        # odd harmonics make the sum antisymmetric about t_f/2, so the second
        # half is evaluated from the mirrored time; t = t_f then maps to an
        # exact zero and sin(k pi) never enters
        late = t > 0.5 * self.t_f
        tau = np.where(late, (self.t_f - t) / self.t_f, t / self.t_f)
        x = np.multiply.outer(np.pi * tau, HARMONICS)
        # d^n/dx^n cos(kx) cycles through cos, -sin, -cos, sin
        trig = np.cos(x) if order % 2 == 0 else np.sin(x)
        sign = (1.0, -1.0, -1.0, 1.0)[order % 4]
        basis = (trig * HARMONICS**order) @ _WEIGHTS.T
        val = sign * (basis @ self._mix) * (np.pi / self.t_f) ** order
        val = np.where(late, (-1.0) ** (order + 1) * val, val)
        if order == 0:
            val = val + 0.5 * self.theta_f
        return val

    def theta(self, t):
        return self._derivative(t, 0)

    def theta_dot(self, t):
        return self._derivative(t, 1)

    def theta_ddot(self, t):
        return self._derivative(t, 2)

    def theta_dddot(self, t):
        return self._derivative(t, 3)

    def effective_frequency_sq(self, omega0: float, t):
        """omega0^2 - theta_dot^2; negative while the rotation outruns the trap."""
        return omega0**2 - self.theta_dot(t) ** 2

    def max_speed(self, n: int = 2001) -> float:
        t = np.linspace(0.0, self.t_f, n)
        return float(np.abs(self.theta_dot(t)).max())
