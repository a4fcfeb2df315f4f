import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from blowup_lab.linops import FredholmError
from blowup_lab.profile import (
    ProfileError,
    assemble_profile,
    beta_identity_gap,
    compute_betas,
    eesti_terms,
    moments,
    profile_energy,
    s000_residuals,
    solvability,
    solve_S000,
    theta,
)
from blowup_lab.radial import RadialField, norms
from conftest import ground_state, pair, profile


def q1(r):
    return 3**0.25 * np.sqrt(2 * np.exp(-2 * r) / (1 + np.exp(-4 * r)))


def test_beta1_against_closed_form_quadrature():
    s = 0.25
    # algebraic endpoint weight handles r^{-2 sigma} exactly
    A = 2 * (quad(lambda r: q1(r) ** 2, 0, 1, weight="alg", wvar=(-2 * s, 0), epsabs=1e-14)[0]
             + quad(lambda r: r ** (-2 * s) * q1(r) ** 2, 1, np.inf, epsabs=1e-14, epsrel=1e-13)[0])
    B = 2 * quad(lambda r: r**2 * q1(r) ** 2, 0, np.inf, epsabs=1e-14, epsrel=1e-13, limit=400)[0]
    b = compute_betas(ground_state(1, s), s)
    assert b.beta1 == pytest.approx(4 * s * A / B, abs=1e-8)
    assert b.A == pytest.approx(A, rel=1e-9)


@pytest.mark.parametrize("dim,sigma", [(1, 0.1), (1, 0.2), (1, 0.25), (2, 0.3), (2, 0.4)])
def test_beta_identity(dim, sigma):
    b = compute_betas(ground_state(dim), sigma)
    assert b.beta1 > 0
    assert abs(beta_identity_gap(b, sigma)) < 1e-10


def test_betas_reject_sigma():
    with pytest.raises(ValueError, match="sigma out of range"):
        compute_betas(ground_state(1), 0.3)


@pytest.mark.parametrize("dim,sigma", [(1, 0.25), (2, 0.1), (2, 0.25), (2, 0.4)])
def test_s000_residuals_and_solvability(dim, sigma):
    p = profile(dim, sigma)
    res = s000_residuals(p)
    assert max(res.values()) < 1e-7
    assert res["c_plus"] == 0.0
    p1, p2 = solvability(p)
    assert abs(p1) < 1e-8
    assert abs(p2) < 1e-8
    assert p.alpha == 2 - 2 * sigma


def test_residuals_refine_at_order_two():
    from blowup_lab.ground_state import solve_ground_state
    from blowup_lab.linops import build_pair
    from blowup_lab.radial import RadialGrid

    g = RadialGrid.default(2, 0.5, sigma=0.25)
    coarse = s000_residuals(solve_S000(build_pair(solve_ground_state(2, g, tol=1e-3)), 0.25))
    fine = s000_residuals(profile(2, 0.25))
    for key in ("Lplus_P1", "Lplus_P2", "Lminus_P1", "Lminus_P2"):
        assert math.log2(coarse[key] / fine[key]) >= 2.0, key


def test_perturbed_beta1_breaks_solvability():
    s = 0.25
    b = compute_betas(ground_state(1, s), s)
    bad = type(b)(1.1 * b.beta1, b.beta2, b.beta1_prime, b.A, b.B, b.I)
    with pytest.raises(FredholmError, match="Fredholm condition violated"):
        solve_S000(pair(1, s), s, betas=bad)


def test_origin_normalization(prof1):
    p = solve_S000(prof1.pair, 0.25, normalization="origin")
    assert abs(p.P1_minus.values[0]) < 1e-12
    # the two normalizations differ by a multiple of Q
    d = (p.P1_minus - prof1.P1_minus).values / prof1.Q.values
    assert np.ptp(d[prof1.grid.r < 10]) < 1e-7


def test_real_profile_at_zero_b(prof1):
    P = assemble_profile(prof1, 1e-3, 0.0)
    assert np.all(P.values.imag == 0)


def test_profile_rejects_large_lambda(prof1):
    for lam in (1.0, 2.0, 0.0):
        with pytest.raises(ProfileError, match="profile expansion invalid"):
            assemble_profile(prof1, lam, 0.1)


def test_profile_close_to_q(prof1):
    consts = []
    for lam in (1e-2, 1e-3, 1e-4):
        d = assemble_profile(prof1, lam, lam) - prof1.Q
        h1 = norms(d, 0.25).H1
        consts.append(h1 / (lam**prof1.alpha * abs(math.log(lam))))
    assert max(consts) / min(consts) < 1.5


def test_theta_values(prof2):
    a = prof2.alpha
    assert theta(prof2, math.exp(-1), 0.0) == pytest.approx((prof2.beta1 + prof2.beta2) * math.exp(-a), rel=1e-14)
    lam = 1e-3
    hand = -prof2.beta1 * lam**a * math.log(lam) + prof2.beta2 * lam**a
    assert theta(prof2, lam, 0.3) == pytest.approx(hand, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(x=st.floats(-40.0, math.log(1e-2)))
def test_theta_positive_for_small_lambda(prof2, x):
    assert theta(prof2, math.exp(x), 0.0) > 0


@settings(max_examples=10, deadline=None)
@given(gamma=st.floats(-math.pi, math.pi))
def test_energy_gauge_invariant(prof1, gamma):
    e0 = profile_energy(prof1, 1e-3, 1e-3)
    assert profile_energy(prof1, 1e-3, 1e-3, gamma=gamma) == e0


def test_energy_leading_term_at_zero_b(prof1):
    lam = 1e-4
    a = prof1.alpha
    _, B, _ = moments(prof1.pair.gs, 0.25)
    lead = B * (2 * prof1.beta1 / (2 - a) * lam ** (a - 2) * math.log(lam)
                - prof1.beta1_prime * lam ** (a - 2))
    e = profile_energy(prof1, lam, 0.0)
    assert e < 0
    assert 8 * e / lead == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("dim", [1, 2])
def test_eesti_ratio_stable(dim):
    p = profile(dim, 0.25)
    ratios = [np.divide(*eesti_terms(p, lam, lam)) for lam in (1e-2, 3e-3, 1e-3)]
    assert max(ratios) / min(ratios) < 3.0


def test_eesti_slope_tracks_bound(prof1):
    lams = 1e-3 / 2.0 ** np.arange(4)
    res, bnd = np.array([eesti_terms(prof1, lam, lam) for lam in lams]).T
    s_res = np.polyfit(np.log(lams), np.log(res), 1)[0]
    s_bnd = np.polyfit(np.log(lams), np.log(bnd), 1)[0]
    assert abs(s_res - s_bnd) < 0.15


def test_fields_on_pair_grid(prof1):
    assert isinstance(prof1.P1_plus, RadialField)
    assert prof1.P1_plus.grid is prof1.pair.grid
