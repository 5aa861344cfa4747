"""Least-squares estimation of citation-curve parameters.

Residuals are taken on ``ln(1 + c/m)``: the full model becomes linear in
``Phi`` there and papers with tens and thousands of citations carry
comparable weight. ``objective="linear"`` fits raw counts instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .baselines import (
    BASELINE_MODELS,
    MU_BOUNDS,
    MU_GRID,
    SIGMA_BOUNDS,
    SIGMA_GRID,
    CurveModel,
    _log_time,
    _safe_x_pdf,
)
from .core import (
    DEFAULT_M,
    CitationHistory,
    GlobalConstants,
    WsbParams,
    normal_pdf,
    observation_grid,
    phi,
    ultimate_impact,
    impact_time,
)
from .exceptions import Degenerate, InsufficientData, NonConvergence
from .optimize import multistart

LAMBDA_BOUNDS = (1e-9, 20.0)


class Wsb(CurveModel):
    """Preferential attachment with lognormal aging."""

    kind = "wsb"
    param_names = ("lam", "mu", "sigma")

    def curve(self, theta, t, m):
        lam, mu, sigma = theta
        return m * np.expm1(lam * phi((_log_time(t) - mu) / sigma))

    def log_value(self, theta, t, m):
        lam, mu, sigma = theta
        return lam * phi((_log_time(t) - mu) / sigma)

    def log_grad(self, theta, t, m):
        lam, mu, sigma = theta
        x = (_log_time(t) - mu) / sigma
        return np.column_stack(
            [phi(x), -lam * normal_pdf(x) / sigma, -lam * _safe_x_pdf(x) / sigma]
        )

    def grad(self, theta, t, m):
        lam, mu, sigma = theta
        x = (_log_time(t) - mu) / sigma
        scale = m * np.exp(lam * phi(x))
        return self.log_grad(theta, t, m) * scale[:, None]

    def bounds(self, m):
        return (np.array([LAMBDA_BOUNDS[0], MU_BOUNDS[0], SIGMA_BOUNDS[0]]),
                np.array([LAMBDA_BOUNDS[1], MU_BOUNDS[1], SIGMA_BOUNDS[1]]))

    def starts(self, t, c, m, time_scales=None, mu_grid=MU_GRID, sigma_grid=SIGMA_GRID):
        # fitness from the final count through the lifetime-total formula
        lam0 = float(np.clip(np.log1p(max(c[-1], 1.0) / m), *LAMBDA_BOUNDS))
        return [np.array([lam0, mu, s]) for mu in mu_grid for s in sigma_grid]

    def tie_key(self, theta):
        return (theta[0], theta[2], theta[1])

    def saturation(self, theta, m):
        return ultimate_impact(theta[0], m)


MODELS = {"wsb": Wsb(), **BASELINE_MODELS}
MODEL_KINDS = tuple(MODELS)


def get_model(kind: str) -> CurveModel:
    try:
        return MODELS[kind]
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}") from None


@dataclass
class FitResult:
    model_kind: str
    params: np.ndarray
    param_names: tuple
    covariance: np.ndarray
    residual_norm: float
    n_obs: int
    converged: bool
    objective_space: str = "log"
    m: float = DEFAULT_M
    residuals: Optional[np.ndarray] = None
    cost_history: List[float] = field(default_factory=list)
    message: str = ""

    @property
    def model(self) -> CurveModel:
        return get_model(self.model_kind)

    @property
    def wsb(self) -> WsbParams:
        if self.model_kind != "wsb":
            raise AttributeError("wsb parameters only exist for wsb fits")
        return WsbParams.from_array(self.params)

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0, None))

    def predict(self, t) -> np.ndarray:
        return self.model.curve(self.params, np.asarray(t, dtype=float), self.m)

    def log_predict_std(self, t) -> np.ndarray:
        """Delta-method standard deviation of ``ln(m + c(t))``."""
        grad = self.model.log_grad(self.params, np.atleast_1d(np.asarray(t, dtype=float)), self.m)
        var = np.einsum("ij,jk,ik->i", grad, self.covariance, grad)
        return np.sqrt(np.clip(var, 0, None))

    def summary(self) -> dict:
        out = dict(zip(self.param_names, (float(v) for v in self.params)))
        if self.model_kind == "wsb":
            out["c_inf"] = ultimate_impact(self.params[0], self.m)
            out["t_star"] = impact_time(self.params[1])
        out.update(residual_norm=self.residual_norm, n_obs=self.n_obs, converged=self.converged)
        return out


def _check_observations(t, c):
    t = np.asarray(t, dtype=float).ravel()
    c = np.asarray(c, dtype=float).ravel()
    if t.shape != c.shape:
        raise ValueError("times and counts must have equal length")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(c))):
        raise ValueError("observations must be finite")
    if np.any(t <= 0):
        raise ValueError("observation times must be positive")
    if np.any(c < 0):
        raise ValueError("counts must be non-negative")
    order = np.argsort(t, kind="stable")
    t, c = t[order], c[order]
    if t.size and np.all(c == 0):
        raise Degenerate("all cumulative counts are zero")
    if np.unique(t[c > 0]).size < 3:
        raise InsufficientData(
            f"need at least 3 distinct observation times with citations, got {np.unique(t[c > 0]).size}"
        )
    return t, c


def cumulative_noise_structure(f, m: float, objective: str = "log") -> np.ndarray:
    """Unit-scale covariance of observation errors along a cumulative series.

    Citations arrive with intensity proportional to ``c + m``, so counts at
    later ages inherit every earlier fluctuation. For fitted values ``f`` at
    increasing ages this gives ``cov = f_i (m + f_j) / m`` (``i <= j``) on raw
    counts, and ``1/m - 1/(m + f_i)`` on ``ln(m + c)``.
    """
    f = np.clip(np.asarray(f, dtype=float), 0, None)
    lo = np.minimum.outer(f, f)
    if objective == "log":
        return 1.0 / m - 1.0 / (m + lo)
    hi = np.maximum.outer(f, f)
    return lo * (m + hi) / m


def parameter_covariance(model, theta, t, m, J, residuals, *, objective="log",
                         method="cumulative"):
    """Gauss-Newton parameter covariance.

    ``method="iid"`` is the textbook ``s^2 (J'J)^-1`` with
    ``s^2 = RSS / (n - p)``. ``method="cumulative"`` keeps the same
    least-squares estimator but assumes random-walk errors shaped by
    :func:`cumulative_noise_structure`, giving the sandwich
    ``s^2 A Omega A'`` with ``A = (J'J)^-1 J'``; the scale ``s^2`` is again
    fitted from the residuals, via ``E[RSS] = s^2 tr((I - H) Omega)``.
    ``method="poisson"`` uses the same sandwich with ``s^2 = 1``, the exact
    scale when counts follow the model's own birth process.
    """
    n, p = J.shape
    if not np.all(np.isfinite(J)):
        return np.full((p, p), np.nan)
    rss = float(residuals @ residuals)
    JtJ_inv = np.linalg.pinv(J.T @ J, rcond=1e-12, hermitian=True)
    if method == "iid":
        cov = rss / max(n - p, 1) * JtJ_inv
    elif method in ("cumulative", "poisson"):
        omega = cumulative_noise_structure(model.curve(theta, t, m), m, objective)
        A = JtJ_inv @ J.T
        resid_maker = np.eye(n) - J @ A
        denom = float(np.trace(resid_maker @ omega))
        if method == "poisson":
            cov = A @ omega @ A.T
        elif denom <= 0:
            cov = rss / max(n - p, 1) * JtJ_inv
        else:
            cov = rss / denom * (A @ omega @ A.T)
    else:
        raise ValueError(f"unknown covariance method {method!r}")
    return 0.5 * (cov + cov.T)


def fit_curve(
    kind: str,
    t,
    c,
    m: float = DEFAULT_M,
    *,
    objective: str = "log",
    max_iter: int = 200,
    covariance: str = "cumulative",
    starts=None,
    bounds_override=None,
    **grids,
) -> FitResult:
    """Fit one model to cumulative counts ``c`` observed at ages ``t`` (days).

    ``covariance`` selects how residual noise is modelled when turning the
    Gauss-Newton normal matrix into a parameter covariance; see
    :func:`parameter_covariance`. ``bounds_override`` maps parameter names
    to replacement ``(low, high)`` boxes; names the model lacks are ignored.
    """
    model = get_model(kind)
    t, c = _check_observations(t, c)
    if objective == "log":
        y = np.log1p(c / m)

        def fun(theta):
            return y - model.log_value(theta, t, m)

        def jac(theta):
            return -model.log_grad(theta, t, m)
    elif objective == "linear":
        def fun(theta):
            return c - model.curve(theta, t, m)

        def jac(theta):
            return -model.grad(theta, t, m)
    else:
        raise ValueError(f"unknown objective {objective!r}")

    lower, upper = model.bounds(m)
    for name, (lo, hi) in (bounds_override or {}).items():
        if name in model.param_names:
            j = model.param_names.index(name)
            lower[j], upper[j] = lo, hi
    if starts is None:
        starts = model.starts(t, c, m, **grids)
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        best, _ = multistart(fun, jac, starts, lower, upper, tie_key=model.tie_key,
                             max_iter=max_iter)
    n, p = t.size, best.x.size
    rss = float(best.residuals @ best.residuals)
    cov = parameter_covariance(model, best.x, t, m, best.jacobian, best.residuals,
                               objective=objective, method=covariance)
    result = FitResult(
        model_kind=kind,
        params=best.x.copy(),
        param_names=model.param_names,
        covariance=cov,
        residual_norm=float(np.sqrt(rss)),
        n_obs=int(n),
        converged=bool(best.converged and np.isfinite(rss)),
        objective_space=objective,
        m=float(m),
        residuals=best.residuals,
        cost_history=list(best.cost_history),
        message=best.message,
    )
    if not result.converged:
        raise NonConvergence(f"{kind} fit did not converge: {best.message}", result=result)
    return result


def fit_wsb(h: CitationHistory, g: GlobalConstants = GlobalConstants(), *, grid: str = "auto",
            **kwargs) -> FitResult:
    """Estimate fitness, immediacy and longevity from a citation history."""
    t, c = observation_grid(h, grid=grid)
    return fit_curve("wsb", t, c, g.m, **kwargs)


def fit_baseline(kind: str, h: CitationHistory, g: GlobalConstants = GlobalConstants(), *,
                 grid: str = "auto", **kwargs) -> FitResult:
    """Fit one of the competing models (lognormal, logistic, bass, gompertz)."""
    if kind not in BASELINE_MODELS:
        raise ValueError(f"{kind!r} is not a baseline model")
    t, c = observation_grid(h, grid=grid)
    return fit_curve(kind, t, c, g.m, **kwargs)


def fit_model(kind: str, h: CitationHistory, g: GlobalConstants = GlobalConstants(), **kwargs):
    if kind == "wsb":
        return fit_wsb(h, g, **kwargs)
    return fit_baseline(kind, h, g, **kwargs)


class CitationCurveRegressor(RegressorMixin, BaseEstimator):
    """Estimator wrapper: ``X`` holds ages in days, ``y`` cumulative citations.

    Parameters
    ----------
    kind : {"wsb", "lognormal", "logistic", "bass", "gompertz"}, default="wsb"
        Curve family to fit.
    m : float, default=30
        Average reference-list length of the citing corpus.
    objective : {"log", "linear"}, default="log"
        Residual space.
    max_iter : int, default=200
        Iteration cap of each optimizer start.
    covariance : {"cumulative", "poisson", "iid"}, default="cumulative"
        Error model behind the parameter covariance.

    Attributes
    ----------
    params_ : ndarray
        Fitted parameter vector, ordered as ``result_.param_names``.
    covariance_ : ndarray
        Gauss-Newton parameter covariance.
    result_ : FitResult
    """

    def __init__(self, kind="wsb", m=DEFAULT_M, objective="log", max_iter=200,
                 covariance="cumulative"):
        self.kind = kind
        self.m = m
        self.objective = objective
        self.max_iter = max_iter
        self.covariance = covariance

    @staticmethod
    def _times(X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 2:
            if X.shape[1] != 1:
                raise ValueError("X must have a single column of ages")
            X = X[:, 0]
        elif X.ndim != 1:
            raise ValueError("X must be 1-D or a single column")
        return X

    def fit(self, X, y):
        GlobalConstants(self.m)  # validates m
        result = fit_curve(self.kind, self._times(X), y, self.m, objective=self.objective,
                           max_iter=self.max_iter, covariance=self.covariance)
        self.result_ = result
        self.params_ = result.params
        self.covariance_ = result.covariance
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        return self.result_.predict(self._times(X))

    def predict_log_std(self, X):
        """Delta-method spread of ``ln(m + c)``."""
        check_is_fitted(self, "result_")
        return self.result_.log_predict_std(self._times(X))
