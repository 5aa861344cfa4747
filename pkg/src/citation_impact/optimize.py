"""Box-constrained Levenberg-Marquardt with multi-start.

Steps are computed on the free variables only: a coordinate sitting on a
bound whose gradient pushes it outward is frozen for that iteration, and every
trial point is projected back into the box. Marquardt's diagonal scaling makes
the iteration invariant to per-parameter units, which matters because the
growth-curve baselines mix rates in 1/days with counts in the hundreds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Sequence

import numpy as np


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    residuals: np.ndarray
    jacobian: np.ndarray
    converged: bool
    n_iter: int
    message: str
    cost_history: List[float] = field(default_factory=list)


def project(x, lower, upper):
    return np.minimum(np.maximum(x, lower), upper)


def levenberg_marquardt(
    fun: Callable[[np.ndarray], np.ndarray],
    jac: Callable[[np.ndarray], np.ndarray],
    x0,
    lower,
    upper,
    *,
    max_iter: int = 200,
    ftol: float = 1e-15,
    xtol: float = 1e-12,
    gtol: float = 1e-14,
    damping: float = 1e-3,
) -> LMResult:
    """Minimise ``0.5 * ||fun(x)||^2`` inside ``[lower, upper]``.

    ``cost_history`` lists the objective after every accepted step; it is
    non-increasing by construction.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x = project(np.asarray(x0, dtype=float), lower, upper)
    r = fun(x)
    if not np.all(np.isfinite(r)):
        return LMResult(x, np.inf, r, np.full((r.size, x.size), np.nan), False, 0,
                        "non-finite residuals at start", [])
    J = jac(x)
    cost = 0.5 * float(r @ r)
    history = [cost]
    nu = damping
    message = "max_iter reached"
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = J.T @ r
        at_lower = (x <= lower) & (g > 0)
        at_upper = (x >= upper) & (g < 0)
        free = ~(at_lower | at_upper)
        if not free.any() or np.max(np.abs(g[free])) <= gtol * max(1.0, cost):
            message, converged = "gradient below tolerance", True
            break
        Jf = J[:, free]
        A = Jf.T @ Jf
        d = np.diag(A).copy()
        d[d <= 0] = 1.0
        stepped = False
        while nu < 1e16:
            try:
                step = np.linalg.solve(A + nu * np.diag(d), -g[free])
            except np.linalg.LinAlgError:
                nu *= 10.0
                continue
            x_new = x.copy()
            x_new[free] += step
            x_new = project(x_new, lower, upper)
            r_new = fun(x_new)
            if np.all(np.isfinite(r_new)):
                cost_new = 0.5 * float(r_new @ r_new)
                if cost_new < cost:
                    stepped = True
                    break
            nu *= 4.0
        if not stepped:
            message, converged = "no further decrease possible", True
            break
        dx = np.abs(x_new - x)
        rel_drop = (cost - cost_new) / max(cost, 1e-300)
        x, r, cost = x_new, r_new, cost_new
        J = jac(x)
        history.append(cost)
        nu = max(nu / 5.0, 1e-12)
        if cost <= 1e-30:
            message, converged = "objective vanished", True
            break
        if rel_drop <= ftol:
            message, converged = "relative cost reduction below ftol", True
            break
        if np.all(dx <= xtol * (np.abs(x) + xtol)):
            message, converged = "step below xtol", True
            break
    return LMResult(x, cost, r, J, converged, it, message, history)


def multistart(
    fun,
    jac,
    starts: Sequence[np.ndarray],
    lower,
    upper,
    tie_key: Callable[[np.ndarray], tuple] = lambda x: tuple(x),
    rtol: float = 1e-9,
    **lm_kwargs,
) -> tuple[LMResult, List[LMResult]]:
    """Run LM from every start; return the best run and all runs.

    Converged runs always beat non-converged ones. Runs whose objectives
    agree to ``rtol`` are ordered by ``tie_key`` so the winner never depends
    on floating-point noise in the start order.
    """
    runs = [levenberg_marquardt(fun, jac, s, lower, upper, **lm_kwargs) for s in starts]
    pool = [r for r in runs if r.converged and np.isfinite(r.cost)]
    if not pool:
        pool = [r for r in runs if np.isfinite(r.cost)] or runs
    best_cost = min(r.cost for r in pool)
    tol = rtol * max(best_cost, 0.0) + 1e-24
    near = [r for r in pool if r.cost <= best_cost + tol]
    near.sort(key=lambda r: tie_key(r.x))
    return near[0], runs
