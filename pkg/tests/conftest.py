"""Shared synthetic cohorts.

The forecast cohort is expensive to score, so fits are cached per
``(model, train_years)`` for the whole session and reused by the forecast
and acceptance suites.
"""

import math
import warnings

import numpy as np
import pytest

from citation_impact.core import DAYS_PER_YEAR, GlobalConstants
from citation_impact.forecast import forecast_cohort
from citation_impact.generator import generate_cohort, uniform_sampler

COHORT_SEED = 2014
COHORT_SIZE = 1000
MU_RANGE = (math.log(365.0), math.log(2500.0))
SIGMA_RANGE = (0.6, 1.6)
COHORT_SAMPLER = uniform_sampler(lam=(0.5, 3.5), mu=MU_RANGE, sigma=SIGMA_RANGE)
# the generator's counts are exactly Poisson-driven, so the noise scale is known
FORECAST_OPTIONS = dict(covariance="poisson")


def build_forecast_cohort(size=COHORT_SIZE, seed=COHORT_SEED):
    """Stochastic histories with at least 10 citations in their first 5 years, binned yearly."""
    found, batch = [], 0
    while len(found) < size:
        hs = generate_cohort(size, COHORT_SAMPLER, seed=seed, id_prefix=f"paper-b{batch}")
        found += [h.to_yearly() for h in hs if h.cumulative_at(5 * DAYS_PER_YEAR) >= 10]
        batch += 1
        seed += 1
    return found[:size]


class ForecastCache:
    def __init__(self, histories):
        self.histories = histories
        self._store = {}

    def get(self, model, train_years):
        key = (model, train_years)
        if key not in self._store:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                self._store[key] = forecast_cohort(self.histories, GlobalConstants(), model=model,
                                                   train_years=train_years, horizon_years=30,
                                                   **FORECAST_OPTIONS)
        return self._store[key]


@pytest.fixture(scope="session")
def forecast_histories():
    return build_forecast_cohort()


@pytest.fixture(scope="session")
def forecasts(forecast_histories):
    return ForecastCache(forecast_histories)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record a pass/fail line for the end-of-run acceptance summary."""

    def record(number, ok, detail):
        _CRITERIA[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(_CRITERIA[number])
        assert ok, _CRITERIA[number]

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
