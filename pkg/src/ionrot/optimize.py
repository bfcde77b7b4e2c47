"""Nelder-Mead minimisation of protocol coefficients with history and restarts."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

__all__ = ["OptimizationOutcome", "nelder_mead"]

log = logging.getLogger(__name__)


@dataclass
class OptimizationOutcome:
    x: np.ndarray
    fun: float
    trace: list = field(default_factory=list)
    converged: bool = True
    nfev: int = 0


def nelder_mead(fun, n_free: int, step: float, fatol: float, max_iter: int = 2000,
                restarts: int = 0, seed: int = 0, x0=None, spread: float | None = None,
                tiebreak=None, tie_tol: float = 0.0) -> OptimizationOutcome:
    """Minimise ``fun`` over ``n_free`` coefficients starting from zero.

    The initial simplex is x0 plus one vertex per coordinate displaced by
    ``step``.  Standard reflection/expansion/contraction/shrink coefficients
    (1, 2, 0.5, 0.5).  Stops when the objective spread over the simplex is
    below ``fatol`` or after ``max_iter`` iterations.  Each restart begins
    from the best point so far plus a seeded random perturbation of size
    ``step``.  With ``spread`` set, restarts instead perturb the initial
    point with that scale, which samples separate basins.  ``trace`` holds
    the best-so-far objective after every iteration, across restarts.

    When the objective has a family of equivalent minima, ``tiebreak(x)``
    picks among restart results within ``tie_tol`` of the best value.
    """
    if n_free == 0:
        f = float(fun(np.zeros(0)))
        return OptimizationOutcome(np.zeros(0), f, [f], True, 1)

    rng = np.random.default_rng(seed)
    nfev = 0
    trace: list[float] = []
    origin = np.zeros(n_free) if x0 is None else np.asarray(x0, dtype=float)
    best_x = origin.copy()
    best_f = np.inf
    converged = True
    finals = []

    for attempt in range(restarts + 1):
        if attempt == 0:
            start = origin.copy()
        elif spread is None:
            start = best_x + rng.normal(scale=step, size=n_free)
        else:
            start = origin + rng.normal(scale=spread, size=n_free)
        simplex = np.vstack([start, start + step * np.eye(n_free)])

        def record(intermediate_result):
            trace.append(min(best_f, float(intermediate_result.fun)))

        # infeasible vertices score inf; inf - inf in the stopping test is expected
        with np.errstate(invalid="ignore"):
            res = minimize(
                fun,
                start,
                method="Nelder-Mead",
                callback=record,
                options=dict(
                    initial_simplex=simplex,
                    fatol=fatol,
                    xatol=np.inf,
                    maxiter=max_iter,
                    maxfev=20 * max_iter,
                    adaptive=False,
                ),
            )
        nfev += res.nfev
        if not res.success:
            log.warning("Nelder-Mead stopped without converging: %s", res.message)
        finals.append((float(res.fun), np.asarray(res.x, dtype=float), bool(res.success)))
        if res.fun < best_f:
            best_f, best_x = float(res.fun), np.asarray(res.x, dtype=float)
            converged = bool(res.success)
        if trace:
            trace[-1] = min(trace[-1], best_f)
    if tiebreak is not None and np.isfinite(best_f):
        ties = [r for r in finals if r[0] <= best_f + tie_tol]
        best_f, best_x, converged = min(ties, key=lambda r: tiebreak(r[1]))
    return OptimizationOutcome(best_x, best_f, trace, converged, nfev)
