"""Reference measures and the quadrature policy."""

import numpy as np
import pytest

from bridgelab.measure import Quadrature, QuadratureError, ReferenceMeasure


def test_lebesgue_default_density_is_one():
    m = ReferenceMeasure.lebesgue()
    assert np.all(m.density(np.array([-1.0, 0.0, 3.0])) == 1.0)


def test_finite_weights_must_be_positive():
    with pytest.raises(ValueError):
        ReferenceMeasure.finite([1.0, 0.0, 2.0])
    m = ReferenceMeasure.finite([0.5, 1.5])
    assert m.n_states == 2


def test_empty_support_rejected():
    with pytest.raises(ValueError):
        ReferenceMeasure.lebesgue(support=(2.0, 2.0))


def test_bad_tolerances_rejected():
    with pytest.raises(ValueError):
        Quadrature(abs_tol=0.0)
    with pytest.raises(ValueError):
        Quadrature(window=-1.0)
    with pytest.raises(ValueError):
        Quadrature(scheme="magic")


def test_adaptive_matches_closed_form():
    q = Quadrature()
    val = q.integrate(lambda x: np.exp(-x * x / 2) / np.sqrt(2 * np.pi), -10, 10)
    assert val == pytest.approx(1.0, abs=1e-12)


def test_fixed_grid_scheme():
    q = Quadrature(scheme="fixed", fixed_points=4096)
    val = q.integrate(lambda x: x * x, 0.0, 1.0)
    assert val == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_breakpoints_direct_quadrature_through_a_jump():
    q = Quadrature()
    step = lambda x: np.where(np.asarray(x) < 0, 0.25, 1.0)
    val = q.integrate(step, -1.0, 1.0, points=(0.0,))
    assert val == pytest.approx(1.25, abs=1e-10)


def test_nonconvergence_raises_with_estimate():
    q = Quadrature(max_subdivisions=2)
    # highly oscillatory integrand defeats a 2-interval budget
    with pytest.raises(QuadratureError) as err:
        q.integrate(lambda x: np.sin(1000.0 * x * x), 0.0, 30.0)
    assert err.value.estimate is not None


def test_truncated_window_clips_to_support():
    q = Quadrature(window=10.0)
    lo, hi = q.truncated((0.0, np.inf), [2.0], 0.5)
    assert lo == 0.0 and hi == pytest.approx(7.0)
    lo, hi = q.truncated((-np.inf, np.inf), [1.0, -1.0], 1.0)
    assert (lo, hi) == (-11.0, 11.0)
