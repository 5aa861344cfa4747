"""Synthetic citation histories drawn from the mechanistic model.

A paper with ``c`` citations at age ``t`` is cited at rate
``lam * (c + m) * P(t)``, ``P`` being the lognormal aging density. The
additive ``m`` lets an uncited paper receive its first citation and makes the
expected trajectory equal the closed-form cumulative curve.

Two exact samplers are provided. ``"inversion"`` (default) works in the
time-changed coordinate ``u = Phi((ln t - mu) / sigma)``, where the process is
a pure birth process with per-unit rate ``lam * (c + m)``; inter-event gaps in
``u`` are exponential and are mapped back through the normal quantile.
``"thinning"`` is Ogata's thinning in real time against the unimodal aging
envelope. Both are exact; thinning is slower and mostly serves as a
cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import special

from .core import (
    DAYS_PER_YEAR,
    CitationHistory,
    GlobalConstants,
    WsbParams,
    aging_density,
    phi,
    wsb_curve,
)


@dataclass(frozen=True)
class GeneratorSpec:
    params: WsbParams
    globals: GlobalConstants = field(default_factory=GlobalConstants)
    horizon: float = 30 * DAYS_PER_YEAR
    mode: str = "stochastic"
    seed: Optional[int] = None
    method: str = "inversion"

    def __post_init__(self):
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValueError(f"horizon must be positive and finite, got {self.horizon!r}")
        if self.mode not in ("deterministic", "stochastic"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "stochastic" and self.seed is None:
            raise ValueError("stochastic generation requires a seed")
        if self.method not in ("inversion", "thinning"):
            raise ValueError(f"unknown method {self.method!r}")


def deterministic_yearly_counts(p: WsbParams, g: GlobalConstants, n_years: int) -> np.ndarray:
    """Integer yearly increments of the closed-form curve.

    Rounding the cumulative curve at each boundary and differencing carries
    the remainder forward, so the counts always sum to the rounded total.
    """
    edges = np.arange(n_years + 1) * DAYS_PER_YEAR
    cum = wsb_curve(p.lam, p.mu, p.sigma, g.m, edges)
    rounded = np.floor(cum + 0.5).astype(np.int64)
    return np.diff(rounded)


# refuse draws whose expected size alone would exhaust memory
MAX_EXPECTED_EVENTS = 1e8


def _check_rate(p: WsbParams, g: GlobalConstants):
    if not (math.isfinite(p.lam * g.m) and math.isfinite(p.mu) and math.isfinite(p.sigma)):
        raise ValueError("non-finite citation intensity")
    with np.errstate(over="ignore"):
        total = g.m * np.expm1(p.lam)
    if not np.isfinite(total):
        raise ValueError("non-finite citation intensity")
    if total > MAX_EXPECTED_EVENTS:
        raise ValueError(f"expected {total:.3g} citations exceeds {MAX_EXPECTED_EVENTS:.0e}")


def sample_events_inversion(p: WsbParams, g: GlobalConstants, horizon: float, rng) -> np.ndarray:
    _check_rate(p, g)
    if p.lam == 0:
        return np.empty(0)
    u_end = float(phi((math.log(horizon) - p.mu) / p.sigma))
    # expected count by u_end, used only to size the first batch
    expected = g.m * math.expm1(p.lam * u_end)
    chunk = int(expected + 5 * math.sqrt(expected + g.m) + 16)
    u_parts = []
    u_last, k0 = 0.0, 0
    while True:
        k = np.arange(k0, k0 + chunk, dtype=float)
        gaps = rng.standard_exponential(chunk) / (p.lam * (k + g.m))
        u = u_last + np.cumsum(gaps)
        inside = u < u_end
        if not inside.all():
            u_parts.append(u[inside])
            break
        u_parts.append(u)
        u_last, k0 = float(u[-1]), k0 + chunk
        chunk *= 2
    u = np.concatenate(u_parts)
    x = np.where(u < 0.5, special.ndtri(u), -special.ndtri(1.0 - u))
    t = np.exp(p.mu + p.sigma * x)
    # float round-off at u -> u_end; keeps the horizon contract
    return np.minimum(t, horizon)


def sample_events_thinning(p: WsbParams, g: GlobalConstants, horizon: float, rng) -> np.ndarray:
    _check_rate(p, g)
    if p.lam == 0:
        return np.empty(0)
    mode = math.exp(p.mu - p.sigma**2)
    peak = aging_density(mode, p.mu, p.sigma)
    events = []
    t, c = 0.0, 0
    while True:
        # aging density is unimodal: its sup on [t, inf) is at max(t, mode)
        bound = p.lam * (c + g.m) * (peak if t < mode else aging_density(t, p.mu, p.sigma))
        t = t + rng.standard_exponential() / bound
        if t > horizon:
            break
        rate = p.lam * (c + g.m) * aging_density(t, p.mu, p.sigma)
        if rng.random() * bound < rate:
            events.append(t)
            c += 1
    return np.asarray(events, dtype=float)


def generate(spec: GeneratorSpec, paper_id: str = "paper-0", **history_kwargs) -> CitationHistory:
    """Draw one citation history.

    Deterministic mode returns yearly counts covering ``floor(horizon)``
    whole years; stochastic mode returns event times up to ``horizon``.
    """
    p, g = spec.params, spec.globals
    if spec.mode == "deterministic":
        n_years = max(1, int(math.floor(spec.horizon / DAYS_PER_YEAR + 1e-9)))
        counts = deterministic_yearly_counts(p, g, n_years)
        return CitationHistory(paper_id, yearly_counts=counts, **history_kwargs)
    rng = np.random.default_rng(spec.seed)
    sampler = sample_events_inversion if spec.method == "inversion" else sample_events_thinning
    events = sampler(p, g, spec.horizon, rng)
    return CitationHistory(paper_id, events=events, horizon=spec.horizon, **history_kwargs)


ParamSampler = Union[Callable[[np.random.Generator], WsbParams], Sequence[WsbParams]]


def _child_seed(master: int, index: int, stream: int) -> int:
    ss = np.random.SeedSequence(entropy=master, spawn_key=(stream, index))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def generate_cohort(
    n: int,
    param_sampler: ParamSampler,
    *,
    globals: GlobalConstants = GlobalConstants(),
    horizon: float = 30 * DAYS_PER_YEAR,
    mode: str = "stochastic",
    seed: int = 0,
    method: str = "inversion",
    id_prefix: str = "paper",
    return_params: bool = False,
):
    """``n`` independent histories.

    ``param_sampler`` is either a callable taking a numpy ``Generator`` and
    returning :class:`WsbParams`, or a sequence of ``n`` parameter triples.
    Each paper's parameter draw and event stream use seeds derived from
    ``seed`` and the paper index only, so results do not depend on the order
    of evaluation.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not callable(param_sampler) and len(param_sampler) != n:
        raise ValueError("param_sampler sequence must have n entries")
    histories, params = [], []
    for i in range(n):
        if callable(param_sampler):
            p = param_sampler(np.random.default_rng(_child_seed(seed, i, 0)))
        else:
            p = param_sampler[i]
        spec = GeneratorSpec(
            p, globals, horizon=horizon, mode=mode, seed=_child_seed(seed, i, 1), method=method
        )
        histories.append(generate(spec, paper_id=f"{id_prefix}-{i:05d}"))
        params.append(p)
    if return_params:
        return histories, params
    return histories


def uniform_sampler(lam=(0.5, 4.0), mu=(np.log(365.0), np.log(2000.0)), sigma=(0.6, 1.6)):
    """Independent uniform draws of each parameter over the given ranges."""

    def draw(rng):
        return WsbParams(
            float(rng.uniform(*lam)), float(rng.uniform(*mu)), float(rng.uniform(*sigma))
        )

    return draw
