import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blowup_lab.law import invert_J, law_params, s_of_t
from blowup_lab.profile import compute_betas
from blowup_lab.rates import RateError, fit_rate
from conftest import ground_state

SIGMA = 0.25


@pytest.fixture(scope="module")
def law_trace():
    p = law_params(compute_betas(ground_state(1, SIGMA), SIGMA), SIGMA, 0.0)
    t = -np.logspace(-5, -11, 40)
    return t, np.array([invert_J(s_of_t(x, p), p) for x in t])


@pytest.mark.parametrize("T", [0.0, None])
def test_law_trace_exponent(law_trace, T):
    fit = fit_rate(*law_trace, SIGMA, "A", T=T)
    assert fit.exponent == pytest.approx(1 / (1 + SIGMA), abs=0.05)
    assert fit.log_exponent == pytest.approx(1 / (2 + 2 * SIGMA))
    assert abs(fit.T) < 1e-11
    assert fit.decades > 4


def test_model_a_beats_model_b(law_trace):
    a = fit_rate(*law_trace, SIGMA, "A")
    b = fit_rate(*law_trace, SIGMA, "B")
    assert a.rms < b.rms
    assert abs(a.drift) < abs(b.drift)


@pytest.mark.parametrize("T", [0.0, None])
def test_pseudo_conformal_trace(T):
    t = -np.logspace(0, -4, 30)
    fit = fit_rate(t, np.abs(t), 0.0, "B", T=T)
    assert fit.exponent == pytest.approx(1.0, abs=0.01)
    assert fit.prefactor == pytest.approx(1.0, rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(e=st.floats(0.5, 1.2), T=st.floats(-1e-3, 1e-3), c=st.floats(0.1, 10.0))
def test_recovers_power_and_time(e, T, c):
    t = T - np.logspace(-1, -5, 30)
    fit = fit_rate(t, c * (T - t) ** e, SIGMA, "B", T=None)
    assert fit.exponent == pytest.approx(e, abs=1e-6)
    assert fit.T == pytest.approx(T, abs=1e-9)


def test_insufficient_concentration():
    t = np.linspace(-1.0, -0.5, 10)
    with pytest.raises(RateError, match="insufficient concentration"):
        fit_rate(t, np.abs(t), 0.0, "B")


def test_rejects_bad_input():
    t = -np.logspace(0, -3, 10)
    with pytest.raises(ValueError):
        fit_rate(t[::-1], np.abs(t), 0.0)
    with pytest.raises(ValueError):
        fit_rate(t, -np.abs(t), 0.0)
    with pytest.raises(ValueError):
        fit_rate(t, np.abs(t), 0.0, model="C")
    with pytest.raises(RateError):
        fit_rate(t, np.abs(t), 0.0, "B", T=-0.5)


def test_simulated_exponent(blowup_run):
    fit = blowup_run.fit
    assert fit is not None
    assert fit.decades >= 1.0
    assert fit.exponent == pytest.approx(1 / (1 + SIGMA), abs=0.15)
    assert fit.T < 0
    assert math.isfinite(fit.rms) and fit.rms < 0.01
