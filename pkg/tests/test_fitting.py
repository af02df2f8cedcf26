import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridpump.fitting import FitResult, fit_exp_decay


def test_synthetic_recovery():
    rng = np.random.default_rng(2020)
    t = np.linspace(0, 40e-3, 41)
    y = np.exp(-100.0 * t) + rng.normal(0, 0.01, t.size)
    fit = fit_exp_decay(t, y)
    assert fit.converged
    assert fit.gamma == pytest.approx(100.0, rel=0.05)
    assert fit.lifetime == pytest.approx(1 / fit.gamma)


@given(st.floats(-0.5, 0.5), st.floats(0.2, 2.0), st.floats(20.0, 2000.0))
@settings(max_examples=40, deadline=None)
def test_noise_free_recovery(a, b, gamma):
    t = np.linspace(0, 5 / gamma, 25)
    fit = fit_exp_decay(t + 1e-3, a + b * np.exp(-gamma * (t + 1e-3)))
    assert fit.gamma == pytest.approx(gamma, rel=1e-5)
    assert fit.a == pytest.approx(a, abs=1e-6)
    assert fit.b == pytest.approx(b, rel=1e-5)


def test_fixed_baseline():
    t = np.linspace(0, 0.05, 20)
    fit = fit_exp_decay(t, 0.8 * np.exp(-60 * t), baseline=0.0)
    assert fit.baseline_fixed and fit.a == 0.0 and fit.a_err == 0.0
    assert fit.gamma == pytest.approx(60.0, rel=1e-6)


def test_constant_data_is_indeterminate():
    fit = fit_exp_decay(np.linspace(0, 1, 10), np.full(10, 0.3))
    assert fit.indeterminate and not fit.converged
    assert np.isnan(fit.gamma)


def test_two_points_rejected():
    with pytest.raises(ValueError):
        fit_exp_decay([0.0, 1.0], [1.0, 0.5])


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        fit_exp_decay([0.0, 1.0, 2.0, 3.0], [1.0, 0.5, 0.2])


def test_weighted_fit_uses_sigma():
    t = np.linspace(0, 0.04, 30)
    y = np.exp(-100 * t)
    fit = fit_exp_decay(t, y, sigma=np.full(t.size, 0.01))
    assert fit.gamma == pytest.approx(100.0, rel=1e-6)


def test_result_serializes_lifetime():
    r = FitResult(0.0, 1.0, 50.0, 0.0, 0.1, 5.0, 0.0, True)
    d = r.to_dict()
    assert d["lifetime"] == pytest.approx(0.02)
    assert d["lifetime_err"] == pytest.approx(5.0 / 2500.0)
    assert FitResult(0.0, 1.0, -1.0, 0, 0, 0, 0, False).lifetime == float("inf")
