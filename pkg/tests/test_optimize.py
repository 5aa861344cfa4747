import numpy as np
import pytest
from scipy import optimize

from citation_impact.optimize import levenberg_marquardt, multistart, project


def rosenbrock(x):
    return np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]])


def rosenbrock_jac(x):
    return np.array([[-20 * x[0], 10.0], [-1.0, 0.0]])


def test_project():
    np.testing.assert_array_equal(project(np.array([-1.0, 0.5, 3.0]), 0.0, 1.0), [0.0, 0.5, 1.0])


def test_unconstrained_minimum():
    r = levenberg_marquardt(rosenbrock, rosenbrock_jac, [-1.2, 1.0], [-5, -5], [5, 5])
    assert r.converged
    np.testing.assert_allclose(r.x, [1.0, 1.0], atol=1e-8)


def test_cost_history_monotone():
    r = levenberg_marquardt(rosenbrock, rosenbrock_jac, [-1.2, 1.0], [-5, -5], [5, 5])
    assert len(r.cost_history) > 2
    assert np.all(np.diff(r.cost_history) <= 0)
    assert r.cost == r.cost_history[-1]


def test_active_bound_matches_reference():
    lo, hi = np.array([-2.0, -2.0]), np.array([0.5, 2.0])
    r = levenberg_marquardt(rosenbrock, rosenbrock_jac, [-1.2, 1.0], lo, hi)
    ref = optimize.least_squares(rosenbrock, [-1.2, 1.0], jac=rosenbrock_jac, bounds=(lo, hi),
                                 xtol=1e-15, ftol=1e-15, gtol=1e-15)
    assert r.x[0] == pytest.approx(0.5)
    np.testing.assert_allclose(r.x, ref.x, atol=1e-7)
    assert r.cost == pytest.approx(ref.cost, rel=1e-8)


def test_exponential_fit_matches_reference():
    t = np.linspace(0, 4, 30)
    y = 3.0 * np.exp(-0.7 * t) + 0.05 * np.sin(7 * t)

    def fun(x):
        return x[0] * np.exp(-x[1] * t) - y

    def jac(x):
        e = np.exp(-x[1] * t)
        return np.column_stack([e, -x[0] * t * e])

    r = levenberg_marquardt(fun, jac, [1.0, 0.1], [0, 0], [10, 10])
    ref = optimize.least_squares(fun, [1.0, 0.1], jac=jac, bounds=([0, 0], [10, 10]),
                                 xtol=1e-15, ftol=1e-15, gtol=1e-15)
    np.testing.assert_allclose(r.x, ref.x, rtol=1e-6)


def test_non_finite_start():
    r = levenberg_marquardt(lambda x: np.array([np.nan]), lambda x: np.ones((1, 1)), [0.0], [-1], [1])
    assert not r.converged


def test_multistart_picks_global_and_breaks_ties():
    # two equal minima at x = -1 and x = +1
    fun = lambda x: np.array([x[0] ** 2 - 1.0])
    jac = lambda x: np.array([[2 * x[0]]])
    best, runs = multistart(fun, jac, [np.array([2.0]), np.array([-2.0])], [-3], [3])
    assert len(runs) == 2
    assert best.x[0] == pytest.approx(-1.0)
    best_rev, _ = multistart(fun, jac, [np.array([-2.0]), np.array([2.0])], [-3], [3])
    np.testing.assert_array_equal(best.x, best_rev.x)
