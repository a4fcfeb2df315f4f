import math

import numpy as np
import pytest

from blowup_lab.law import invert_J
from blowup_lab.modulation import h1_norm
from blowup_lab.rates import RateError
from blowup_lab.simulator import STATUS_CEILING, rescaled_profile, rmin_sensitivity
from blowup_lab.study import BlowupConfig, lambda_from_gradient, run_blowup, setup_blowup
from blowup_lab.profile import assemble_profile


def test_run_reaches_ceiling(blowup_run):
    tr = blowup_run.trace
    assert tr.status == STATUS_CEILING
    assert tr.max_mass_drift() < 1e-8
    assert len(blowup_run.states) >= 20


def test_gradient_grows_after_transient(blowup_run):
    g = np.array(blowup_run.trace.gradnorm)
    assert np.all(np.diff(g[len(g) // 10:]) > 0)


def test_states_orthogonal_and_small(blowup_run):
    for st in blowup_run.states:
        assert st.ortho_residual < 1e-10
        assert h1_norm(st.eps) < 1e-2


def test_lambda_tracks_law(blowup_run):
    law = blowup_run.setup.law
    ratios = np.array([st.lam / invert_J(st.s, law) for st in blowup_run.states])
    # at grid step 0.04 the discrete run drifts ahead of the law by ~10%
    # near the ceiling; halving the step roughly halves the drift
    assert np.all(np.abs(ratios - 1) < 0.15)
    assert np.all(np.abs(ratios[:5] - 1) < 1e-3)
    # the gradient proxy agrees with the decomposition at the start
    lam_g = lambda_from_gradient(blowup_run.trace, blowup_run.setup.profile)
    assert lam_g[0] == pytest.approx(blowup_run.states[0].lam, rel=1e-2)


def test_mod_decays(blowup_run):
    m = np.abs(blowup_run.mod[:, :2]).sum(axis=1)
    k = len(m) // 3
    assert m[-k:].mean() < m[:k].mean()


def test_log_correction_improves_fit(blowup_run):
    a, b = blowup_run.fits["A"], blowup_run.fits["B"]
    assert a.rms < b.rms
    assert a.exponent == pytest.approx(0.8, abs=0.15)


def test_short_run_is_rejected(prof1):
    with pytest.raises(RateError, match="insufficient concentration"):
        run_blowup(BlowupConfig(grad_ceiling=2.0, snapshots=8), prof1)


def test_rmin_sensitivity_below_tolerance(prof1):
    cfg = BlowupConfig(grad_ceiling=30.0)
    su = setup_blowup(cfg, prof1)
    P = assemble_profile(prof1, su.lambda1, su.b1)
    from dataclasses import replace

    sim = replace(su.sim, t_end=su.sim.t_start + 2 * su.lambda1**2, snapshot_times=())
    rep = rmin_sensitivity(sim, lambda g: rescaled_profile(P, g, su.lambda1, su.b1))
    assert rep["gradnorm"] < sim.tol
    assert rep["energy"] < sim.tol
    assert rep["mass"] < 1e-8
    assert all(math.isfinite(v) for v in rep.values())
