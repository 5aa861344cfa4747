"""Train-on-prefix forecasting with log-space uncertainty envelopes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .core import DAYS_PER_YEAR, DEFAULT_M, CitationHistory, GlobalConstants
from .exceptions import CitationImpactError, NonConvergence, UndefinedSigma
from .fitting import FitResult, fit_model

# |numerator| below this counts as an exact hit when the spread is zero
_EXACT = 1e-9


@dataclass(frozen=True, eq=False)
class PredictionEnvelope:
    train_horizon: float  # years
    eval_times: np.ndarray  # days
    most_likely: np.ndarray
    band_low: np.ndarray
    band_high: np.ndarray
    sigma_log: np.ndarray
    m: float = DEFAULT_M
    model_kind: str = "wsb"
    fit: Optional[FitResult] = None

    def index_of(self, t_days: float) -> int:
        hit = np.flatnonzero(np.isclose(self.eval_times, t_days, rtol=1e-12, atol=1e-9))
        if hit.size == 0:
            raise ValueError(f"age {t_days} days is not among the evaluation times")
        return int(hit[0])

    @property
    def width(self) -> np.ndarray:
        return self.band_high - self.band_low


@dataclass(frozen=True)
class ZScoreReport:
    paper_id: str
    z_at_horizon: float
    horizon: float  # years
    within_2: bool
    signed_error: float = float("nan")  # true - most likely, in citations


def envelope_from_fit(fit: FitResult, eval_times, train_horizon: float) -> PredictionEnvelope:
    """Most-likely path and z = 1 band implied by a fitted curve."""
    t = np.atleast_1d(np.asarray(eval_times, dtype=float))
    ml = fit.predict(t)
    s = fit.log_predict_std(t)
    centre = np.log(fit.m + ml)
    low = np.exp(centre - s) - fit.m
    # an unconstrained prefix can give a spread beyond float range; the band is then unbounded
    with np.errstate(over="ignore"):
        high = np.exp(centre + s) - fit.m
    return PredictionEnvelope(
        train_horizon=train_horizon, eval_times=t, most_likely=ml, band_low=low,
        band_high=high, sigma_log=s, m=fit.m, model_kind=fit.model_kind, fit=fit,
    )


def predict(h_train: CitationHistory, g: GlobalConstants = GlobalConstants(), eval_times=None,
            *, model: str = "wsb", **fit_kwargs) -> PredictionEnvelope:
    """Fit ``model`` on a truncated history and project it to ``eval_times`` (days).

    ``eval_times`` defaults to yearly ages 1..30.
    """
    if eval_times is None:
        eval_times = np.arange(1, 31) * DAYS_PER_YEAR
    fit = fit_model(model, h_train, g, **fit_kwargs)
    if not fit.converged:
        raise NonConvergence("prefix fit did not converge", result=fit)
    return envelope_from_fit(fit, eval_times, h_train.horizon / DAYS_PER_YEAR)


def z_score(env: PredictionEnvelope, h_full: CitationHistory, horizon: float) -> ZScoreReport:
    """Standardised log-space deviation of the realised count at ``horizon`` years."""
    t = horizon * DAYS_PER_YEAR
    if h_full.horizon + 1e-9 < t:
        raise ValueError("history does not extend to the requested horizon")
    i = env.index_of(t)
    c_true = float(h_full.cumulative_at(t))
    num = math.log(env.m + c_true) - math.log(env.m + env.most_likely[i])
    s = float(env.sigma_log[i])
    if s == 0:
        if abs(num) > _EXACT:
            raise UndefinedSigma(f"{h_full.paper_id}: zero predictive spread with nonzero error")
        z = 0.0
    else:
        z = num / s
    return ZScoreReport(h_full.paper_id, z, horizon, abs(z) <= 2, c_true - float(env.most_likely[i]))


@dataclass(frozen=True, eq=False)
class CohortAccuracy:
    abs_z: np.ndarray
    z_grid: np.ndarray
    survival: np.ndarray  # P(|z| > z_grid)
    frac_within_1: float
    frac_within_2: float
    n_excluded: int = 0

    @property
    def n(self) -> int:
        return int(self.abs_z.size)

    def survival_at(self, z: float) -> float:
        return float(np.mean(self.abs_z > z))


def cohort_accuracy(reports: Sequence[ZScoreReport], z_grid=None, n_excluded: int = 0) -> CohortAccuracy:
    """Empirical complementary CDF of ``|z|`` over a cohort."""
    if len(reports) == 0:
        raise ValueError("cohort is empty")
    a = np.abs(np.array([r.z_at_horizon for r in reports], dtype=float))
    if z_grid is None:
        z_grid = np.linspace(0.0, 10.0, 101)
    z_grid = np.asarray(z_grid, dtype=float)
    surv = (a[None, :] > z_grid[:, None]).mean(axis=1)
    return CohortAccuracy(a, z_grid, surv, float(np.mean(a <= 1)), float(np.mean(a <= 2)),
                          n_excluded)


@dataclass
class CohortForecast:
    reports: list
    envelopes: dict
    excluded: list

    def accuracy(self, z_grid=None) -> CohortAccuracy:
        return cohort_accuracy(self.reports, z_grid, len(self.excluded))


def forecast_cohort(histories: Iterable[CitationHistory], g: GlobalConstants = GlobalConstants(), *,
                    model: str = "wsb", train_years: float = 10, horizon_years: float = 30,
                    eval_times=None, **fit_kwargs) -> CohortForecast:
    """Predict each paper from its first ``train_years`` and score it at ``horizon_years``.

    Papers whose prefix cannot be fitted are listed in ``excluded`` as
    ``(paper_id, reason)`` pairs instead of entering the statistics.
    """
    if eval_times is None:
        eval_times = np.arange(1, int(horizon_years) + 1) * DAYS_PER_YEAR
    eval_times = np.union1d(eval_times, [horizon_years * DAYS_PER_YEAR])
    reports, envelopes, excluded = [], {}, []
    for h in histories:
        try:
            env = predict(h.truncate(train_years * DAYS_PER_YEAR), g, eval_times, model=model,
                          **fit_kwargs)
            rep = z_score(env, h, horizon_years)
        except CitationImpactError as exc:
            excluded.append((h.paper_id, type(exc).__name__))
            continue
        reports.append(rep)
        envelopes[h.paper_id] = env
    return CohortForecast(reports, envelopes, excluded)


class CitationForecaster(BaseEstimator):
    """Estimator facade over :func:`predict`.

    ``fit`` takes a :class:`CitationHistory` and trains on its first
    ``train_years``; ``predict`` returns the most likely cumulative count at
    the given ages (days) and ``predict_envelope`` the full envelope.
    """

    def __init__(self, model="wsb", m=DEFAULT_M, train_years=10.0, covariance="cumulative"):
        self.model = model
        self.m = m
        self.train_years = train_years
        self.covariance = covariance

    def fit(self, history: CitationHistory, y=None):
        h = history.truncate(self.train_years * DAYS_PER_YEAR)
        self.fit_ = fit_model(self.model, h, GlobalConstants(self.m), covariance=self.covariance)
        self.train_horizon_ = h.horizon / DAYS_PER_YEAR
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        return self.fit_.predict(np.ravel(np.asarray(X, dtype=float)))

    def predict_envelope(self, X) -> PredictionEnvelope:
        check_is_fitted(self, "fit_")
        return envelope_from_fit(self.fit_, np.ravel(np.asarray(X, dtype=float)), self.train_horizon_)
