"""Journal-level summaries, cohort diagnostics and goodness of fit."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    DAYS_PER_YEAR,
    CitationHistory,
    GlobalConstants,
    impact_time,
    observation_grid,
    phi,
    ultimate_impact,
)
from .exceptions import CitationImpactError, DegenerateSpan, EmptySelection, TooFewPapers
from .fitting import FitResult, fit_curve, fit_wsb

MIN_JOURNAL_PAPERS = 10
MIN_SELECTION = 20


@dataclass(frozen=True)
class JournalProfile:
    journal_id: str
    cohort_year: Optional[int]
    Lambda: float
    M: float
    Sigma: float
    C_infinity: float
    T_star: float  # days
    predicted_IF: float
    n_papers: int


@dataclass(frozen=True)
class IfWindow:
    """Log-age edges (log-days) of the impact-factor census window."""

    M1: float = math.log(3 * DAYS_PER_YEAR)
    M2: float = math.log(1 * DAYS_PER_YEAR)

    def __post_init__(self):
        if not self.M1 > self.M2:
            raise ValueError("M1 must exceed M2")


def impact_factor_from(Lambda, M, Sigma, window: IfWindow = IfWindow(),
                       g: GlobalConstants = GlobalConstants()):
    """Half the model citations a paper gains between ages ``e^M2`` and ``e^M1``."""
    a = Lambda * phi((window.M1 - M) / Sigma)
    b = Lambda * phi((window.M2 - M) / Sigma)
    # e^a - e^b without cancellation
    out = 0.5 * g.m * np.exp(b) * np.expm1(a - b)
    return out if np.ndim(out) else float(out)


def impact_factor(profile: JournalProfile, window: IfWindow = IfWindow(),
                  g: GlobalConstants = GlobalConstants()) -> float:
    return impact_factor_from(profile.Lambda, profile.M, profile.Sigma, window, g)


def mean_cumulative_curve(histories: Sequence[CitationHistory], n_years: Optional[int] = None):
    """Average cumulative count at each common year boundary."""
    if n_years is None:
        n_years = int(min(math.floor(h.horizon / DAYS_PER_YEAR + 1e-9) for h in histories))
    t = np.arange(1, n_years + 1) * DAYS_PER_YEAR
    curves = np.array([h.cumulative_at(t) for h in histories], dtype=float)
    return t, curves.mean(axis=0)


def aggregate_journal(
    histories: Sequence[CitationHistory],
    g: GlobalConstants = GlobalConstants(),
    *,
    fits: Optional[Sequence[FitResult]] = None,
    journal_id: str = "",
    cohort_year: Optional[int] = None,
    window: IfWindow = IfWindow(),
    n_years: Optional[int] = None,
) -> JournalProfile:
    """Journal parameters from a fit of the cohort-mean cumulative curve.

    Only papers with a converged per-paper fit take part; ``fits`` may be
    supplied to avoid refitting.
    """
    if fits is None:
        fits = []
        for h in histories:
            try:
                fits.append(fit_wsb(h, g))
            except CitationImpactError:
                fits.append(None)
    if len(fits) != len(histories):
        raise ValueError("fits and histories must align")
    members = [h for h, f in zip(histories, fits) if f is not None and f.converged]
    if len(members) < MIN_JOURNAL_PAPERS:
        raise TooFewPapers(f"{journal_id or 'journal'}: {len(members)} converged fits, "
                           f"need {MIN_JOURNAL_PAPERS}")
    t, mean_c = mean_cumulative_curve(members, n_years)
    agg = fit_curve("wsb", t, mean_c, g.m)
    lam, mu, sigma = (float(v) for v in agg.params)
    profile = JournalProfile(journal_id, cohort_year, lam, mu, sigma, ultimate_impact(lam, g.m),
                             impact_time(mu), float("nan"), len(members))
    return JournalProfile(**{**profile.__dict__,
                             "predicted_IF": impact_factor(profile, window, g)})


@dataclass(frozen=True)
class FixedLambda:
    """Select papers whose fitness lies in ``[lam0 - tol, lam0 + tol]``."""

    lam0: float
    tol: float

    def mask(self, histories, lambdas):
        if lambdas is None:
            raise ValueError("fixed-fitness selection needs per-paper fitness values")
        lam = np.asarray(lambdas, dtype=float)
        return np.abs(lam - self.lam0) <= self.tol


@dataclass(frozen=True)
class FixedEarly:
    """Select papers whose count at ``year`` lies in ``[low, high]``."""

    low: float
    high: float
    year: float = 2.0

    def mask(self, histories, lambdas=None):
        c = np.array([h.cumulative_at(self.year * DAYS_PER_YEAR) for h in histories])
        return (c >= self.low) & (c <= self.high)


def cohort_convergence(histories: Sequence[CitationHistory], selector, times,
                       lambdas=None, min_papers: int = MIN_SELECTION):
    """Coefficient of variation of cumulative citations across a selected cohort.

    ``times`` are ages in years. Returns ``(cv, selected_indices)``.
    """
    mask = selector.mask(histories, lambdas)
    idx = np.flatnonzero(mask)
    if idx.size < min_papers:
        raise EmptySelection(f"selector matched {idx.size} papers, need {min_papers}")
    t = np.asarray(times, dtype=float) * DAYS_PER_YEAR
    c = np.array([histories[i].cumulative_at(t) for i in idx], dtype=float)
    mean = c.mean(axis=0)
    sd = c.std(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        cv = np.where(mean > 0, sd / mean, np.nan)
    return cv, idx


def param_distribution(fits: Sequence[FitResult], which: str = "lam", bins=20, range=None):
    """Normalised histogram of one fitted parameter; probabilities sum to 1."""
    names = {"lambda": "lam", "lam": "lam", "mu": "mu", "sigma": "sigma"}
    if which not in names:
        raise ValueError(f"unknown parameter {which!r}")
    col = ("lam", "mu", "sigma").index(names[which])
    vals = np.array([f.params[col] for f in fits if f is not None and f.converged
                     and f.model_kind == "wsb"])
    if vals.size == 0:
        raise ValueError("no converged wsb fits")
    counts, edges = np.histogram(vals, bins=bins, range=range)
    return counts / counts.sum(), edges


def histogram_mean(probs, edges) -> float:
    centres = 0.5 * (edges[:-1] + edges[1:])
    return float(np.sum(probs * centres))


def weighted_ks(h: CitationHistory, fitted: FitResult, g: Optional[GlobalConstants] = None,
                grid: str = "yearly") -> float:
    """Variance-weighted maximum gap between empirical and model cumulative shares.

    Both curves are normalised by their value at the last observation time;
    points where the model share is 0 or 1 carry no weight and are skipped.
    """
    t, c = observation_grid(h, grid=grid)
    if np.unique(t).size < 2:
        raise DegenerateSpan("need at least two observation times")
    if c[-1] <= 0:
        raise DegenerateSpan("no citations in the observation span")
    model = fitted.predict(t)
    if not model[-1] > 0:
        raise DegenerateSpan("model predicts no citations in the observation span")
    f_emp = c / c[-1]
    f_mod = model / model[-1]
    denom = f_mod * (1.0 - f_mod)
    ok = denom > 1e-12
    if not ok.any():
        return 0.0
    return float(np.max(np.abs(f_emp[ok] - f_mod[ok]) / np.sqrt(denom[ok])))
