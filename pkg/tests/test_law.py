import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.special import lambertw

from blowup_lab.law import (
    LawError,
    LawParams,
    J_closed,
    b_app,
    b_of_lambda,
    choose_initial,
    eval_F,
    eval_J,
    invert_J,
    lambert_w,
    law_params,
    law_rhs,
    ode_residual,
    rate_exponent,
    s_of_t,
    t_app,
    t_closed,
    t_of_lambda,
    wm1_shift,
    wprop_check,
)
from blowup_lab.profile import compute_betas, profile_energy
from conftest import ground_state, profile

SIGMA = 0.25


@pytest.fixture(scope="module")
def betas():
    return compute_betas(ground_state(1, SIGMA), SIGMA)


@pytest.fixture(scope="module")
def law(betas):
    return law_params(betas, SIGMA, 0.0)


def drift_shrinks(values):
    d = np.abs(np.diff(values))
    return d[-1] < d[0]


# ---------------------------------------------------------------- Lambert W

def test_lambert_special_values():
    assert lambert_w(0, 0.0) == 0.0
    assert lambert_w(-1, -math.exp(-1)) == -1.0
    w = 0.5
    for _ in range(200):
        w = math.exp(-w)
    assert lambert_w(0, 1.0) == pytest.approx(w, abs=1e-15)


@pytest.mark.parametrize("branch", [0, -1])
def test_lambert_residual_random(branch):
    rng = np.random.default_rng(11 + branch)
    near = -math.exp(-1) * (1 - rng.random(5000) ** 4)
    far = np.exp(rng.uniform(-30, 23, 5000)) if branch == 0 else -np.exp(-rng.uniform(1, 28, 5000))
    for z in np.concatenate([near, far]):
        w = lambert_w(branch, z)
        assert abs(w * math.exp(w) - z) <= 1e-14 * abs(z)
        assert (w >= -1) if branch == 0 else (w <= -1)


@pytest.mark.parametrize("branch", [0, -1])
def test_lambert_against_scipy(branch):
    # scipy loses digits within ~1e-6 of the branch point, so compare away from it
    zs = np.concatenate([-math.exp(-1) * (1 - np.logspace(-6, 0, 50))[:-1],
                         np.logspace(-5, 8, 50) if branch == 0 else -np.logspace(-12, -0.44, 50)])
    for z in zs:
        w = lambert_w(branch, z)
        assert w == pytest.approx(lambertw(z, branch).real, rel=1e-12, abs=2e-15 / abs(1 + w))


@pytest.mark.parametrize("branch,z", [(0, -0.5), (-1, 0.0), (-1, 0.3), (-1, -0.4), (0, math.nan)])
def test_lambert_domain(branch, z):
    with pytest.raises(LawError, match="outside branch domain"):
        lambert_w(branch, z)


@pytest.mark.parametrize("u", [1e-6, 0.1, 1.0, 20.0, 600.0])
def test_shift_matches_lambert(u):
    w = lambert_w(-1, -math.exp(-u - 1))
    assert wm1_shift(u) == pytest.approx(-w - 1, rel=1e-12)


def test_wprop_cases():
    assert wprop_check([1.0], 0.5).holds
    tiny = wprop_check([1e-6], 0.1)
    assert tiny.holds
    assert abs(wm1_shift(1e-6) - math.sqrt(2e-6)) < 1e-6
    rep = wprop_check(np.logspace(-3, 3, 100), 0.1)
    assert rep.holds
    assert rep.lower_margin > 0 and rep.upper_margin > 0


def test_wprop_rejects_eps():
    with pytest.raises(LawError):
        wprop_check([1.0], 1.0)


# ---------------------------------------------------------------- J and inverses

def test_j_endpoint_and_monotone(law):
    assert eval_J(law.lambda0, law) == 0.0
    lams = law.lambda0 / 2.0 ** np.arange(1, 12)
    js = [eval_J(x, law) for x in lams]
    assert np.all(np.diff(js) > 0)


@pytest.mark.parametrize("lam", [1e-3, 1e-6, 1e-9, 1e-12])
def test_j_matches_closed_form(law, lam):
    assert eval_J(lam, law) == pytest.approx(J_closed(lam, law), rel=1e-10)


def test_japp_ratio(law):
    a, k = law.alpha, law.kappa
    cs, ratios = [], []
    for lam in (1e-4, 1e-6, 1e-8):
        L = abs(math.log(lam))
        r = (1 / eval_J(lam, law)) / (a / 2 * math.sqrt(k) * lam ** (a / 2) * math.sqrt(L))
        ratios.append(r)
        cs.append(abs(r - 1) * L)
    assert max(cs) < 1.0
    assert max(cs) / min(cs) < 3.0
    assert drift_shrinks(ratios)


def test_law_domain_violation(betas):
    # a large negative E0 drives the F radicand negative
    with pytest.raises(LawError, match="law domain violated"):
        law_params(betas, SIGMA, E0=-1e5)
    with pytest.raises(LawError, match="law domain violated"):
        LawParams(SIGMA, 1.5, 1.0, 1.0, -30.0, 0.0, lambda0=0.5)


def test_invert_round_trip(law):
    for lam in np.logspace(-10, -2.5, 10):
        assert invert_J(eval_J(lam, law), law) == pytest.approx(lam, rel=1e-9)
    for s in (1.0, 1e3, 1e6):
        assert eval_J(invert_J(s, law), law) == pytest.approx(s, rel=1e-10)


def test_invert_rejects(law):
    with pytest.raises(LawError, match="s out of range"):
        invert_J(-1.0, law)


def test_lambda_app_scalings(law):
    a, k = law.alpha, law.kappa
    ss = np.logspace(3, 6, 4)
    lam = np.array([invert_J(s, law) for s in ss])
    r1 = lam / (ss ** (-2 / a) * np.log(ss) ** (-1 / a))
    assert 0.05 < r1.min() and r1.max() < 1.0
    assert drift_shrinks(r1)
    r2 = lam**a * np.abs(np.log(lam)) * ss**2 * a * a * k / 4
    assert np.all(np.abs(r2[2:] - 1) < 0.1)
    bs = np.array([b_app(s, law) for s in ss]) * ss
    assert 1.0 < bs.min() and bs.max() < 2.0
    assert drift_shrinks(bs)


def test_b_app_solves_law(law):
    assert ode_residual(law, 1e3, 1e4, n=40) < 1e-6


def test_independent_ode_integration(law):
    s0 = 1e3
    lam0 = invert_J(s0, law)
    y0 = [math.log(lam0), b_of_lambda(lam0, law)]

    def rhs(s, y):
        lam = math.exp(y[0])
        d = law_rhs(s, [lam, y[1]], law)
        return [d[0] / lam, d[1]]

    ss = np.linspace(s0, 10 * s0, 25)
    sol = solve_ivp(rhs, (s0, 10 * s0), y0, method="DOP853", rtol=1e-12, atol=1e-15, t_eval=ss)
    for s, ll, bb in zip(ss, sol.y[0], sol.y[1]):
        lam = invert_J(s, law)
        assert math.exp(ll) == pytest.approx(lam, rel=1e-6)
        assert bb == pytest.approx(b_of_lambda(lam, law), rel=1e-6)


# ---------------------------------------------------------------- F and initial data

def test_f_equals_j_without_energy(law):
    for lam in (1e-3, 1e-6):
        assert eval_F(lam, law) == eval_J(lam, law)


def test_f_minus_j_bound(betas):
    p = law_params(betas, SIGMA, 1.0)
    a = p.alpha
    ratios = []
    for lam in 1e-3 / 2.0 ** np.arange(0, 20, 4):
        ratios.append(abs(eval_F(lam, p) - eval_J(lam, p)) / (lam ** (-a / 4) + lam ** (2 - 1.5 * a)))
    assert max(ratios) < 0.01


def test_initial_deviation_envelope(betas):
    p = law_params(betas, SIGMA, 1.0)
    for s1 in (1e3, 1e4, 1e5):
        d = choose_initial(s1, p)
        assert eval_F(d.lambda1, p) == pytest.approx(s1, rel=1e-10)
        ls = math.log(s1)
        dev = abs(s1 / eval_J(d.lambda1, p) - 1) + abs(d.b1 / b_app(s1, p) - 1)
        assert dev <= 0.01 * (s1**-0.5 * math.sqrt(ls) + s1 ** (2 - 4 / p.alpha) * math.sqrt(ls))


@pytest.mark.parametrize("E0", [-1.0, 0.0, 1.0])
def test_energy_matching(betas, E0):
    p = law_params(betas, SIGMA, E0)
    prof = profile(1, SIGMA)
    d = choose_initial(1e3, p, prof)
    assert abs(profile_energy(prof, d.lambda1, d.b1) - E0) < 1e-8
    assert d.b1 == pytest.approx(d.b1_leading, rel=1e-4)


def test_energy_matching_fails_when_unbracketed(betas):
    p = law_params(betas, SIGMA, 0.0)
    prof = profile(1, SIGMA)
    bad = LawParams(p.sigma, p.alpha, p.beta1, p.beta2, p.beta1_prime, p.C0, p.lambda0, E0=1e9)
    with pytest.raises(LawError, match="energy matching failed"):
        choose_initial(1e3, bad, prof)


# ---------------------------------------------------------------- time

@pytest.mark.parametrize("lam", [1e-3, 1e-6, 1e-9])
def test_t_matches_closed_form(law, lam):
    assert t_of_lambda(lam, law) == pytest.approx(t_closed(lam, law), rel=1e-10)


def test_t_app_monotone_negative(law):
    ts = [t_app(s, law) for s in np.logspace(1, 6, 8)]
    assert all(t < 0 for t in ts)
    assert np.all(np.diff(ts) > 0)


def test_s_of_t_round_trip(law):
    for s in (10.0, 1e3, 1e5):
        assert s_of_t(t_app(s, law), law) == pytest.approx(s, rel=1e-8)


def test_s_of_t_rejects(law):
    with pytest.raises(LawError):
        s_of_t(0.5, law)


def test_t_app_scaling(law):
    a = law.alpha
    ss = np.logspace(3, 6, 4)
    r = np.array([abs(t_app(s, law)) * s ** ((4 - a) / a) * math.log(s) ** (2 / a) for s in ss])
    assert 0.005 < r.min() and r.max() < 0.05
    assert drift_shrinks(r)


def test_composed_rate(law):
    e1, e2 = rate_exponent(SIGMA)
    ts = [-1e-5, -1e-7, -1e-9, -1e-11]
    r = np.array([invert_J(s_of_t(t, law), law) / (abs(t) ** e1 * abs(math.log(-t)) ** e2) for t in ts])
    assert 1.0 < r.min() and r.max() < 10.0
    assert drift_shrinks(r)


@given(st.fractions(min_value=Fraction(1, 1000), max_value=1))
def test_exponent_identity(sigma):
    alpha = 2 - 2 * sigma
    assert Fraction(2) / (4 - alpha) == 1 / (1 + sigma)
