import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blowup_lab.ground_state import solve_ground_state
from blowup_lab.linops import (
    FredholmError,
    apply_Lminus,
    apply_Lplus,
    build_pair,
    coercivity_scan,
    dipole_residual,
    identity_residuals,
    lambda_q_form,
    projected_quotient,
    solve_dipole,
    solve_Lminus,
    solve_Lplus,
)
from blowup_lab.radial import RadialField, RadialGrid, inner, residual_norm


def gaussian(g, w=1.0, m=0):
    return RadialField(g, (g.r / w) ** (2 * m) * np.exp(-(g.r / w) ** 2))


@pytest.mark.parametrize("which", ["pair1", "pair2"])
def test_identities_below_tolerance(which, request):
    res = identity_residuals(request.getfixturevalue(which))
    assert set(res) == {"Lminus_Q", "Lplus_LambdaQ", "Lminus_y2Q", "Lplus_rho", "Lminus_xQ"}
    assert max(res.values()) < 1e-5


def test_identities_refine_at_order_two():
    # from half resolution to the default grid; finer grids sit on the roundoff floor
    coarse = identity_residuals(build_pair(solve_ground_state(2, RadialGrid.default(2, 0.5))))
    from conftest import pair

    fine = identity_residuals(pair(2))
    for key in coarse:
        assert math.log2(coarse[key] / fine[key]) >= 2.0, key


def test_dipole_factor(pair1):
    # the identity holds with -2 grad Q; factor 1 leaves an O(1) residual
    assert dipole_residual(pair1, 2.0) < 1e-8
    assert dipole_residual(pair1, 1.0) > 0.1


def test_dipole_solve_recovers_q(pair2):
    g = pair2.grid
    dq = g.derivative_matrix() @ pair2.gs.Q.values
    h = solve_dipole(pair2, RadialField(g, -2 * dq / g.r))
    assert np.max(np.abs(h.values - pair2.gs.Q.values)) < 1e-8


def test_rho_pairing(pair1):
    g = pair1.grid
    b = inner(RadialField(g, g.r**2 * pair1.gs.Q.values), pair1.gs.Q)
    assert inner(pair1.rho, pair1.gs.Q) == pytest.approx(b / 2, rel=1e-8)


def test_rho_decays(pair2):
    g = pair2.grid
    ratio = np.abs(pair2.rho.values) / ((1 + g.r) ** 3 * pair2.gs.Q.values)
    assert np.all(ratio[g.r < 30] < 10.0)


@pytest.mark.parametrize("which", ["pair1", "pair2"])
def test_right_inverse(which, request):
    p = request.getfixturevalue(which)
    g = p.grid
    f = RadialField(g, np.exp(-g.r**2) * (1 + g.r**2))
    x = solve_Lplus(p, f)
    assert residual_norm(apply_Lplus(p, x) - f) < 1e-8 * residual_norm(f)
    fo = f - inner(f, p.gs.Q) / p.gs.mass * p.gs.Q
    y = solve_Lminus(p, fo)
    assert residual_norm(apply_Lminus(p, y) - fo) < 1e-8 * residual_norm(fo)
    assert abs(inner(y, p.gs.Q)) < 1e-10


def test_lminus_origin_normalization(pair1):
    g = pair1.grid
    f = gaussian(g, 0.8, 1)
    f = f - inner(f, pair1.gs.Q) / pair1.gs.mass * pair1.gs.Q
    a = solve_Lminus(pair1, f)
    b = solve_Lminus(pair1, f, orthogonalize=False)
    assert abs(b.values[0]) < 1e-15
    diff = (a - b).values / pair1.gs.Q.values
    assert np.ptp(diff[g.r < 10]) < 1e-8


def test_fredholm_violation(pair1):
    with pytest.raises(FredholmError, match="Fredholm condition violated"):
        solve_Lminus(pair1, pair1.gs.Q)


def test_singular_source(pair2):
    g = pair2.grid
    x = solve_Lplus(pair2, pair2.gs.Q, power=-0.6)
    res = apply_Lplus(pair2, x).values - pair2.gs.Q.values * g.r**-0.6
    assert residual_norm(RadialField(g, res)) < 1e-7


def test_singular_source_converges():
    # solution of L+ f = r^{-1/2} Q compared across resolutions
    vals = []
    for k in (0.5, 1.0):
        gs = solve_ground_state(1, RadialGrid.default(1, k))
        p = build_pair(gs)
        f = solve_Lplus(p, gs.Q, power=-0.5)
        vals.append(f.interpolate(np.array([1e-3, 0.1, 1.0, 3.0])))
    assert np.max(np.abs(vals[0] - vals[1])) < 1e-6


@settings(max_examples=20, deadline=None)
@given(w1=st.floats(0.3, 3.0), w2=st.floats(0.3, 3.0), m=st.integers(0, 2))
def test_symmetry(pair2, w1, w2, m):
    g = pair2.grid
    f, h = gaussian(g, w1, m), gaussian(g, w2)
    for op in (apply_Lplus, apply_Lminus):
        assert inner(op(pair2, f), h) == pytest.approx(inner(f, op(pair2, h)), abs=1e-8)


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_linearity(pair1, a, b):
    g = pair1.grid
    f, h = gaussian(g, 0.7), gaussian(g, 1.9, 1)
    lhs = apply_Lplus(pair1, a * f + b * h).values
    rhs = a * apply_Lplus(pair1, f).values + b * apply_Lplus(pair1, h).values
    assert np.allclose(lhs, rhs, atol=1e-9 * (1 + abs(a) + abs(b)))


def test_coercivity_positive(pair2):
    res = coercivity_scan(pair2, samples=100, seed=7)
    assert res.minimum > 0
    # the span minimum is a lower bound for every sample
    assert 0 < res.span_minimum <= res.minimum + 1e-12


def test_coercivity_stable_across_grids():
    mus = []
    for k in (0.5, 1.0):
        p = build_pair(solve_ground_state(1, RadialGrid.default(1, k)))
        mus.append(coercivity_scan(p, samples=100, seed=7).minimum)
    assert abs(mus[0] - mus[1]) < 0.2 * mus[1]


def test_coercivity_needs_samples(pair1):
    with pytest.raises(ValueError):
        coercivity_scan(pair1, samples=5, seed=0)


def test_iq_boundary_case(pair1):
    u = RadialField(pair1.grid, 1j * pair1.gs.Q.values)
    assert projected_quotient(pair1, u) >= 0


def test_lambda_q_form_vanishes(pair1, pair2):
    assert abs(lambda_q_form(pair1)) < 1e-6
    assert abs(lambda_q_form(pair2)) < 1e-6
