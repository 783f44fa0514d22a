"""
Tests for the L-BFGS solver and the finite-difference oracle
"""
import numpy as np
import pytest
from pydantic import ValidationError

from src.errors import InputFormatError, SolverFailure
from src.solver.lbfgs import SolveConfig, Termination, finite_difference_gradient, minimize


def spd_quadratic(dimension=10, seed=0):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(dimension, dimension)))
    hessian = q @ np.diag(np.linspace(1.0, 20.0, dimension)) @ q.T
    target = rng.normal(size=dimension)

    def objective(x):
        d = x - target
        return 0.5 * float(d @ hessian @ d), hessian @ d

    return objective, target


def rosenbrock(x):
    a, b = x
    energy = (1 - a) ** 2 + 100 * (b - a * a) ** 2
    gradient = np.array([-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)])
    return energy, gradient


def assert_non_increasing(trace):
    assert all(later <= earlier for earlier, later in zip(trace, trace[1:]))


def test_quadratic_reaches_gradient_tolerance():
    objective, target = spd_quadratic()
    report = minimize(objective, np.zeros(10))
    assert report.termination == Termination.GRADIENT
    assert report.gradient_norm < 1e-8
    assert report.iterations <= 100
    np.testing.assert_allclose(report.x, target, atol=1e-8)
    assert_non_increasing(report.energy_trace)
    assert len(report.energy_trace) == report.iterations + 1


def test_rosenbrock_minimum():
    report = minimize(rosenbrock, np.array([-1.2, 1.0]), SolveConfig(max_iterations=500))
    np.testing.assert_allclose(report.x, [1.0, 1.0], atol=1e-5)
    assert_non_increasing(report.energy_trace)
    assert report.evaluations >= report.iterations


def test_start_at_minimum_stops_immediately():
    objective, target = spd_quadratic(4)
    report = minimize(objective, target)
    assert report.iterations == 0
    assert report.termination == Termination.GRADIENT
    assert report.energy == 0.0


def test_iteration_cap():
    report = minimize(rosenbrock, np.array([-1.2, 1.0]), SolveConfig(max_iterations=2))
    assert report.termination == Termination.ITERATION_CAP
    assert report.iterations == 2
    assert report.summary()["termination"] == "iteration-cap"


def test_non_finite_trials_shorten_the_step():
    def barrier(x):
        if x[0] >= 1.6:
            return np.inf, np.zeros(1)
        return float((x[0] - 1.5) ** 2), np.array([2.0 * (x[0] - 1.5)])

    # the first unit step lands at x = 2, outside the finite region
    report = minimize(barrier, np.array([1.0]))
    assert report.x[0] == pytest.approx(1.5, abs=1e-6)
    assert np.isfinite(report.energy_trace).all()
    assert_non_increasing(report.energy_trace)


def test_non_finite_start_is_a_solver_failure():
    with pytest.raises(SolverFailure):
        minimize(lambda x: (np.nan, np.zeros_like(x)), np.zeros(3))


def test_only_non_finite_trials_is_a_solver_failure():
    def isolated(x):
        if x[0] == 1.0:
            return 1.0, np.array([2.0])
        return np.nan, np.array([np.nan])

    with pytest.raises(SolverFailure) as info:
        minimize(isolated, np.array([1.0]))
    assert info.value.last_iterate.tolist() == [1.0]
    assert info.value.last_energy == 1.0


def test_gradient_shape_is_checked():
    with pytest.raises(InputFormatError):
        minimize(lambda x: (0.0, np.zeros(len(x) + 1)), np.zeros(3))


def test_solve_config_validation():
    with pytest.raises(ValidationError):
        SolveConfig(c1=0.9, c2=0.1)
    with pytest.raises(ValidationError):
        SolveConfig(max_iterations=0)
    assert SolveConfig().max_iterations == 100


def test_finite_difference_gradient():
    objective, _ = spd_quadratic(5, seed=2)
    x = np.linspace(-1.0, 1.0, 5)
    np.testing.assert_allclose(finite_difference_gradient(objective, x), objective(x)[1],
                               rtol=1e-6, atol=1e-8)
    assert finite_difference_gradient(lambda v: float(v @ v), np.ones(2)) == pytest.approx(
        [2.0, 2.0])
    with pytest.raises(InputFormatError):
        finite_difference_gradient(objective, x, h=0.0)


def test_translated_start_gives_translated_result():
    objective, _ = spd_quadratic()
    shift = np.arange(10.0) - 5.0
    report = minimize(objective, np.zeros(10))
    moved = minimize(lambda x: objective(x - shift), shift)
    assert moved.iterations == report.iterations
    assert moved.termination == report.termination
    np.testing.assert_allclose(moved.x, report.x + shift, atol=1e-8)
    assert moved.energy == pytest.approx(report.energy, abs=1e-12)
