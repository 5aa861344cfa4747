import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from citation_impact.core import (
    DAYS_PER_YEAR,
    CitationHistory,
    GlobalConstants,
    WsbParams,
    cumulative_citations,
    wsb_curve,
)
from citation_impact.exceptions import InsufficientData, UndefinedSigma
from citation_impact.fitting import fit_curve
from citation_impact.forecast import (
    CitationForecaster,
    PredictionEnvelope,
    ZScoreReport,
    cohort_accuracy,
    envelope_from_fit,
    forecast_cohort,
    predict,
    z_score,
)
from citation_impact.generator import generate_cohort

from conftest import COHORT_SAMPLER

G = GlobalConstants()
YEARS = np.arange(1, 31) * DAYS_PER_YEAR
TRUE = np.array([2.87, 7.38, 1.2])


def manual_envelope(most_likely, sigma_log, t_years=1.0):
    t = np.array([t_years * DAYS_PER_YEAR])
    ml, s = np.array([most_likely], float), np.array([sigma_log], float)
    return PredictionEnvelope(1.0, t, ml, np.exp(np.log(30 + ml) - s) - 30,
                              np.exp(np.log(30 + ml) + s) - 30, s)


class TestZScore:
    def test_exact_hit(self):
        env = manual_envelope(12.0, 0.2)
        h = CitationHistory("a", yearly_counts=[12])
        rep = z_score(env, h, 1.0)
        assert rep.z_at_horizon == 0.0 and rep.within_2 and rep.signed_error == 0.0

    def test_band_edge_is_one(self):
        # m + most_likely = 40, band_high = 40 * 1.5 - 30 = 30
        env = manual_envelope(10.0, math.log(1.5))
        assert env.band_high[0] == pytest.approx(30.0)
        rep = z_score(env, CitationHistory("a", yearly_counts=[30]), 1.0)
        assert rep.z_at_horizon == pytest.approx(1.0, abs=1e-12)
        assert rep.signed_error == pytest.approx(20.0)

    def test_zero_spread(self):
        with pytest.raises(UndefinedSigma):
            z_score(manual_envelope(10.0, 0.0), CitationHistory("a", yearly_counts=[11]), 1.0)
        assert z_score(manual_envelope(10.0, 0.0), CitationHistory("a", yearly_counts=[10]), 1.0).z_at_horizon == 0

    def test_horizon_checks(self):
        env = manual_envelope(10.0, 0.1)
        with pytest.raises(ValueError):
            z_score(env, CitationHistory("a", yearly_counts=[3]), 2.0)
        with pytest.raises(ValueError):
            z_score(env, CitationHistory("a", yearly_counts=[3, 4]), 2.0)

    @given(st.floats(0, 500), st.floats(0.01, 2), st.integers(0, 2000))
    def test_within_2_matches_z(self, ml, s, count):
        rep = z_score(manual_envelope(ml, s), CitationHistory("a", yearly_counts=[count]), 1.0)
        assert rep.within_2 == (abs(rep.z_at_horizon) <= 2)
        expected = (math.log(30 + count) - math.log(30 + ml)) / s
        assert rep.z_at_horizon == pytest.approx(expected, rel=1e-12, abs=1e-12)


class TestEnvelope:
    def test_noiseless_prefix_exact(self):
        fit = fit_curve("wsb", YEARS[:10], wsb_curve(*TRUE, 30, YEARS[:10]))
        env = envelope_from_fit(fit, YEARS, 10.0)
        np.testing.assert_allclose(env.most_likely, wsb_curve(*TRUE, 30, YEARS), rtol=1e-6)

    def test_deterministic_history_small_z(self):
        h = CitationHistory("a", yearly_counts=np.diff(np.floor(wsb_curve(*TRUE, 30,
                                                                         np.arange(31) * DAYS_PER_YEAR) + 0.5)))
        env = predict(h.truncate(10 * DAYS_PER_YEAR), G, YEARS)
        s = env.sigma_log[-1]
        assert abs(math.log(30 + h.total) - math.log(30 + env.most_likely[-1])) < 0.01
        assert np.isfinite(s)

    def test_band_ordering_and_growth(self):
        hs = generate_cohort(40, [WsbParams(*TRUE)] * 40, seed=5)
        for h in hs:
            env = predict(h.truncate(10 * DAYS_PER_YEAR), G, YEARS)
            assert np.all(env.band_low <= env.most_likely) and np.all(env.most_likely <= env.band_high)
            future = env.eval_times > 10 * DAYS_PER_YEAR
            assert np.all(np.diff(env.width[future]) >= -1e-9 * env.width[future][:-1])

    def test_index_of(self):
        env = manual_envelope(1.0, 0.1, 3.0)
        assert env.index_of(3 * DAYS_PER_YEAR) == 0
        with pytest.raises(ValueError):
            env.index_of(2 * DAYS_PER_YEAR)

    def test_default_eval_times(self):
        h = generate_cohort(1, [WsbParams(*TRUE)], seed=2)[0].truncate(8 * DAYS_PER_YEAR)
        env = predict(h, G)
        np.testing.assert_allclose(env.eval_times, YEARS)
        assert env.train_horizon == pytest.approx(8.0)

    def test_propagates_fit_errors(self):
        with pytest.raises(InsufficientData):
            predict(CitationHistory("a", yearly_counts=[1, 2]), G)

    def test_longer_training_narrows(self):
        hs = generate_cohort(30, [WsbParams(*TRUE)] * 30, seed=8)
        s5 = [predict(h.truncate(5 * DAYS_PER_YEAR), G, YEARS).sigma_log[-1] for h in hs]
        s10 = [predict(h.truncate(10 * DAYS_PER_YEAR), G, YEARS).sigma_log[-1] for h in hs]
        assert np.mean(s10) < np.mean(s5)
        assert np.mean(np.array(s10) < np.array(s5)) >= 0.9


class TestCohortAccuracy:
    @staticmethod
    def reports(zs):
        return [ZScoreReport(str(i), z, 30.0, abs(z) <= 2) for i, z in enumerate(zs)]

    def test_all_zero(self):
        acc = cohort_accuracy(self.reports([0.0] * 5), z_grid=[0.0, 0.5, 2.0])
        np.testing.assert_array_equal(acc.survival, [0, 0, 0])
        assert acc.frac_within_1 == 1.0 and acc.frac_within_2 == 1.0

    def test_mixture(self):
        acc = cohort_accuracy(self.reports([1.0, -3.0, 3.0, -1.0]))
        assert acc.survival_at(2.0) == 0.5
        assert acc.frac_within_1 == 0.5 and acc.frac_within_2 == 0.5
        assert acc.n == 4

    def test_survival_non_increasing(self):
        acc = cohort_accuracy(self.reports(np.random.default_rng(0).normal(size=300)))
        assert np.all(np.diff(acc.survival) <= 0)

    def test_empty(self):
        with pytest.raises(ValueError):
            cohort_accuracy([])


class TestCohortForecast:
    def test_excludes_unfittable(self):
        hs = generate_cohort(5, [WsbParams(*TRUE)] * 5, seed=1)
        hs.append(CitationHistory("empty", events=[], horizon=30 * DAYS_PER_YEAR))
        cf = forecast_cohort(hs, G, train_years=10)
        assert len(cf.reports) == 5
        assert cf.excluded == [("empty", "InsufficientData")]
        assert cf.accuracy().n_excluded == 1

    @pytest.mark.parametrize("covariance", ["poisson", "cumulative"])
    @pytest.mark.parametrize("train", [5, 10])
    def test_band_covers_true_curve(self, covariance, train):
        # the z = 1 band at the end of training should hold the generating curve
        # about as often as a one-sigma interval does
        hs, ps = generate_cohort(400, COHORT_SAMPLER, seed=2014, return_params=True)
        t = train * DAYS_PER_YEAR
        hits = []
        for h, p in zip(hs, ps):
            if h.cumulative_at(5 * DAYS_PER_YEAR) < 10:
                continue
            env = predict(h.to_yearly().truncate(t), G, [t], covariance=covariance)
            truth = cumulative_citations(p, G, t)
            hits.append(abs(math.log(30 + truth) - math.log(30 + env.most_likely[0])) <= env.sigma_log[0])
        assert len(hits) > 250
        assert 0.45 <= np.mean(hits) <= 0.85

    def test_width_shrinks_with_training(self, forecasts):
        s5 = forecasts.get("wsb", 5)
        s10 = forecasts.get("wsb", 10)
        common = sorted(set(s5.envelopes) & set(s10.envelopes))
        a = np.array([s5.envelopes[k].sigma_log[-1] for k in common])
        b = np.array([s10.envelopes[k].sigma_log[-1] for k in common])
        assert np.mean(b) <= np.mean(a)

    @pytest.mark.parametrize("model", ["logistic", "bass", "gompertz"])
    def test_wsb_survival_dominates(self, forecasts, model):
        grid = np.arange(1.0, 8.01, 0.25)
        wsb = forecasts.get("wsb", 5).accuracy(grid)
        other = forecasts.get(model, 5).accuracy(grid)
        assert np.all(wsb.survival < other.survival)

    @pytest.mark.parametrize("model", ["logistic", "bass", "gompertz"])
    @pytest.mark.parametrize("train", [5, 10])
    def test_baselines_underestimate(self, forecasts, model, train):
        signed = [r.signed_error for r in forecasts.get(model, train).reports]
        assert np.median(signed) > 0


class TestEstimator:
    def test_fit_predict(self):
        h = generate_cohort(1, [WsbParams(*TRUE)], seed=3)[0]
        est = CitationForecaster(train_years=10).fit(h)
        env = est.predict_envelope(YEARS)
        np.testing.assert_allclose(est.predict(YEARS), env.most_likely)
        assert est.train_horizon_ == pytest.approx(10.0)
        assert clone(est).get_params()["train_years"] == 10
