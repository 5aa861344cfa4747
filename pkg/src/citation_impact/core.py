"""Closed-form pieces of the citation model.

Time is measured in days since publication throughout the package. The
cumulative citation curve is

    c(t) = m * (exp(lam * Phi((ln t - mu) / sigma)) - 1)

with ``Phi`` the standard normal CDF, ``lam`` the relative fitness, ``mu`` the
immediacy (log-days) and ``sigma`` the longevity.
"""

from __future__ import annotations

import datetime as _dt
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special

DAYS_PER_YEAR = 365.25
DEFAULT_M = 30.0
MAX_OBSERVATIONS = 512

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class GlobalConstants:
    """Corpus-wide constants.

    Only ``m`` enters any computation; ``beta`` and ``A`` are kept as
    metadata because a single history identifies only their combination
    with the fitness.
    """

    m: float = DEFAULT_M
    beta: Optional[float] = None
    A: Optional[float] = None

    def __post_init__(self):
        if not (np.isfinite(self.m) and self.m > 0):
            raise ValueError(f"m must be a positive finite number, got {self.m!r}")


@dataclass(frozen=True)
class WsbParams:
    """Per-paper parameter triple (fitness, immediacy, longevity)."""

    lam: float
    mu: float
    sigma: float

    def __post_init__(self):
        if not np.isfinite([self.lam, self.mu, self.sigma]).all():
            raise ValueError(f"parameters must be finite: {self}")
        if self.lam < 0:
            raise ValueError(f"lam must be non-negative, got {self.lam!r}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.lam, self.mu, self.sigma], dtype=float)

    @classmethod
    def from_array(cls, theta) -> "WsbParams":
        lam, mu, sigma = (float(v) for v in theta)
        return cls(lam, mu, sigma)


def _as_float_array(values, name):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return arr


@dataclass(frozen=True, eq=False)
class CitationHistory:
    """Citation record of one paper.

    Exactly one of ``events`` (citation ages in days) or ``yearly_counts``
    (citations received in each year after publication) is set.
    ``horizon`` is the end of the observation window in days; for yearly
    data it is always ``len(yearly_counts)`` years.
    """

    paper_id: str
    events: Optional[np.ndarray] = None
    yearly_counts: Optional[np.ndarray] = None
    publication_time: Optional[_dt.date] = None
    horizon: Optional[float] = None
    tags: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.events is None) == (self.yearly_counts is None):
            raise ValueError("exactly one of events or yearly_counts must be given")
        if self.events is not None:
            ev = _as_float_array(self.events, "events")
            if ev.size and not np.isfinite(ev).all():
                raise ValueError("event times must be finite")
            if ev.size and ev[0] < 0:
                raise ValueError("event times must be non-negative")
            if np.any(np.diff(ev) < 0):
                raise ValueError("event times must be sorted ascending")
            horizon = self.horizon
            if horizon is None:
                horizon = float(ev[-1]) if ev.size else 0.0
            if ev.size and horizon < ev[-1]:
                raise ValueError("horizon precedes the last citation")
            ev.setflags(write=False)
            object.__setattr__(self, "events", ev)
            object.__setattr__(self, "horizon", float(horizon))
        else:
            counts = np.asarray(self.yearly_counts)
            if counts.ndim != 1:
                raise ValueError("yearly_counts must be one-dimensional")
            if counts.size and not np.all(np.equal(np.mod(counts, 1), 0)):
                raise ValueError("yearly counts must be integers")
            counts = counts.astype(np.int64)
            if np.any(counts < 0):
                raise ValueError("yearly counts must be non-negative")
            counts.setflags(write=False)
            object.__setattr__(self, "yearly_counts", counts)
            object.__setattr__(self, "horizon", counts.size * DAYS_PER_YEAR)

    @property
    def is_yearly(self) -> bool:
        return self.yearly_counts is not None

    @property
    def total(self) -> int:
        if self.is_yearly:
            return int(self.yearly_counts.sum())
        return int(self.events.size)

    def as_events(self, anchor: str = "midpoint") -> np.ndarray:
        """Citation ages in days, placing yearly counts at ``anchor``."""
        if not self.is_yearly:
            return self.events
        if anchor == "midpoint":
            offset = 0.5
        elif anchor == "end":
            offset = 1.0
        else:
            raise ValueError(f"unknown anchor {anchor!r}")
        years = np.arange(self.yearly_counts.size, dtype=float)
        return np.repeat((years + offset) * DAYS_PER_YEAR, self.yearly_counts)

    def cumulative_at(self, t, anchor: str = "midpoint") -> np.ndarray:
        """Cumulative citations received up to and including age ``t``."""
        t = np.asarray(t, dtype=float)
        if self.is_yearly:
            # year boundaries are exact regardless of the anchor
            k = t / DAYS_PER_YEAR
            on_boundary = np.isclose(k, np.round(k), rtol=0, atol=1e-9)
            cum = np.concatenate([[0], np.cumsum(self.yearly_counts)])
            idx = np.clip(np.round(k).astype(np.int64), 0, self.yearly_counts.size)
            exact = cum[idx]
            ev = self.as_events(anchor)
            inexact = np.searchsorted(ev, t, side="right")
            return np.where(on_boundary, exact, inexact)
        return np.searchsorted(self.events, t, side="right")

    def to_yearly(self, n_years: Optional[int] = None) -> "CitationHistory":
        """Bin into yearly counts; the last partial year is dropped."""
        if self.is_yearly:
            if n_years is None or n_years == self.yearly_counts.size:
                return self
            return self.truncate(n_years * DAYS_PER_YEAR)
        if n_years is None:
            n_years = int(math.floor(self.horizon / DAYS_PER_YEAR + 1e-9))
        edges = np.arange(n_years + 1) * DAYS_PER_YEAR
        cum = np.searchsorted(self.events, edges, side="right")
        # a citation exactly at age 0 belongs to the first year
        cum[0] = 0
        return CitationHistory(
            self.paper_id,
            yearly_counts=np.diff(cum),
            publication_time=self.publication_time,
            tags=dict(self.tags),
        )

    def truncate(self, t_days: float) -> "CitationHistory":
        """History as it would have been observed at age ``t_days``."""
        if self.is_yearly:
            n = int(math.floor(t_days / DAYS_PER_YEAR + 1e-9))
            return CitationHistory(
                self.paper_id,
                yearly_counts=self.yearly_counts[:n],
                publication_time=self.publication_time,
                tags=dict(self.tags),
            )
        t_days = min(float(t_days), self.horizon)
        n = np.searchsorted(self.events, t_days, side="right")
        return CitationHistory(
            self.paper_id,
            events=self.events[:n],
            publication_time=self.publication_time,
            horizon=t_days,
            tags=dict(self.tags),
        )

    def __eq__(self, other):
        if not isinstance(other, CitationHistory):
            return NotImplemented
        same_data = (
            self.is_yearly == other.is_yearly
            and np.array_equal(
                self.yearly_counts if self.is_yearly else self.events,
                other.yearly_counts if other.is_yearly else other.events,
            )
        )
        return (
            same_data
            and self.paper_id == other.paper_id
            and self.publication_time == other.publication_time
            and self.horizon == other.horizon
            and self.tags == other.tags
        )

    __hash__ = None


def observation_grid(
    h: CitationHistory, grid: str = "auto", max_points: int = MAX_OBSERVATIONS
):
    """Observation times and cumulative counts used for fitting.

    ``grid="auto"`` uses year boundaries for yearly data and every distinct
    event time for event data (thinned uniformly in log-time to at most
    ``max_points``). ``grid="yearly"`` forces year boundaries. Observations
    at age 0 are dropped since ``ln t`` is undefined there.
    """
    if grid not in ("auto", "yearly", "events"):
        raise ValueError(f"unknown grid {grid!r}")
    if h.is_yearly or grid == "yearly":
        n_years = int(math.floor(h.horizon / DAYS_PER_YEAR + 1e-9))
        t = np.arange(1, n_years + 1) * DAYS_PER_YEAR
        if h.is_yearly:
            c = np.cumsum(h.yearly_counts[:n_years]).astype(float)
        else:
            c = np.searchsorted(h.events, t, side="right").astype(float)
        return t, c
    ev = h.events
    t, idx = np.unique(ev, return_index=True)
    # cumulative count including every tie at that time
    c = np.searchsorted(ev, t, side="right").astype(float)
    keep = t > 0
    t, c = t[keep], c[keep]
    if t.size > max_points:
        targets = np.exp(np.linspace(np.log(t[0]), np.log(t[-1]), max_points))
        pick = np.unique(np.clip(np.searchsorted(t, targets), 0, t.size - 1))
        t, c = t[pick], c[pick]
    return t, c


def phi(x):
    """Standard normal CDF evaluated through ``erfc`` (accurate in both tails)."""
    x = np.asarray(x, dtype=float)
    out = 0.5 * special.erfc(-x / _SQRT2)
    return out if out.ndim else float(out)


def normal_pdf(x):
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / _SQRT2PI
    return out if out.ndim else float(out)


def aging_density(t, mu: float, sigma: float):
    """Lognormal aging kernel, in 1/days."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise ValueError("aging_density requires t > 0")
    z = (np.log(t) - mu) / sigma
    out = np.exp(-0.5 * z * z) / (_SQRT2PI * sigma * t)
    return out if out.ndim else float(out)


def _rescaled_time(t, mu, sigma):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise ValueError("times must be non-negative")
    with np.errstate(divide="ignore"):
        return (np.log(t) - mu) / sigma


def wsb_curve(lam, mu, sigma, m, t):
    """Vectorised cumulative curve on raw parameters."""
    x = _rescaled_time(t, mu, sigma)
    return m * np.expm1(lam * phi(x))


def cumulative_citations(p: WsbParams, g: GlobalConstants, t):
    """Expected cumulative citations at age ``t`` (days); 0 at t = 0."""
    out = wsb_curve(p.lam, p.mu, p.sigma, g.m, t)
    return out if np.ndim(out) else float(out)


def citation_rate(p: WsbParams, g: GlobalConstants, t):
    """Time derivative of the cumulative curve, in citations per day."""
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise ValueError("citation_rate requires t > 0")
    x = (np.log(t) - p.mu) / p.sigma
    out = g.m * p.lam * np.exp(p.lam * phi(x)) * normal_pdf(x) / (p.sigma * t)
    return out if out.ndim else float(out)


def ultimate_impact(lam, m: float = DEFAULT_M):
    """Total citations over the paper's lifetime, ``m * (e^lam - 1)``."""
    if np.any(np.asarray(lam) < 0):
        raise ValueError("lam must be non-negative")
    out = m * np.expm1(lam)
    return out if np.ndim(out) else float(out)


def impact_time(mu):
    """Age (days) at which the paper reaches the geometric mean of its final count."""
    out = np.exp(mu)
    return out if np.ndim(out) else float(out)


def rescale_points(t, c, p: WsbParams, g: GlobalConstants):
    """Map raw ``(t, c)`` observations onto the universal coordinates."""
    if p.lam == 0:
        raise ValueError("rescaling is undefined for lam = 0")
    t = np.asarray(t, dtype=float)
    c = np.asarray(c, dtype=float)
    if np.any(~(t > 0)):
        raise ValueError("rescaling needs strictly positive times")
    t_tilde = (np.log(t) - p.mu) / p.sigma
    c_tilde = np.log1p(c / g.m) / p.lam
    return t_tilde, c_tilde


def rescale(h: CitationHistory, p: WsbParams, g: GlobalConstants):
    """Rescaled ``(t_tilde, c_tilde)`` arrays for every observation of ``h``."""
    t, c = observation_grid(h)
    return rescale_points(t, c, p, g)


def collapse_dispersion(points: Sequence) -> float:
    """RMS distance of rescaled points from ``Phi``.

    ``points`` is an iterable of ``(t_tilde, c_tilde)`` array pairs, one per
    paper; all points are pooled.
    """
    sq = []
    for t_tilde, c_tilde in points:
        sq.append((np.asarray(c_tilde) - phi(np.asarray(t_tilde))) ** 2)
    if not sq:
        raise ValueError("no points to measure")
    pooled = np.concatenate([np.atleast_1d(s) for s in sq])
    return float(np.sqrt(pooled.mean()))
