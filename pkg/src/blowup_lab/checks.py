"""Per-module verification checks behind ``blowup-lab verify``.

Each ``check_*`` function takes its config section and a seed and returns
a list of :class:`Check`.  Nothing here depends on wall time, so a report
built from the same config and seed is reproducible to the byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .config import (
    DecomposeCheckConfig,
    GroundStateConfig,
    LawConfig,
    LinopsConfig,
    ProfileConfig,
    ValidationConfig,
)
from .ground_state import energy_crit, gn_check, solve_ground_state
from .law import (
    choose_initial,
    eval_J,
    invert_J,
    lambert_w,
    law_params,
    ode_residual,
    s_of_t,
    t_app,
    wprop_check,
)
from .linops import build_pair, coercivity_scan, identity_residuals, project, random_fields
from .modulation import ModulationState, decompose, eval_H, h1_norm, push_forward, sandwich_norm
from .profile import (
    assemble_profile,
    beta_identity_gap,
    compute_betas,
    eesti_terms,
    profile_energy,
    s000_residuals,
    solvability,
    solve_S000,
)
from .radial import RadialGrid
from .simulator import SimConfig, Stepper, l2_distance, pseudo_conformal, run, uniform_grid


@dataclass(frozen=True)
class Check:
    name: str
    paper_ref: str       # the mathematical statement being tested
    value: float
    bound: float
    relation: str        # how value compares to bound when the check passes
    passed: bool

    def to_dict(self) -> dict:
        return {"name": self.name, "paper_ref": self.paper_ref, "value": _num(self.value),
                "bound": _num(self.bound), "relation": self.relation, "pass": self.passed}


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def below(name, ref, value, bound) -> Check:
    value = float(value)
    return Check(name, ref, value, float(bound), "<", bool(value < bound))


def above(name, ref, value, bound) -> Check:
    value = float(value)
    return Check(name, ref, value, float(bound), ">", bool(value > bound))


def default_ground_state(dim, sigma=None, resolution=1.0, tol=1e-6):
    return solve_ground_state(dim, RadialGrid.default(dim, resolution, sigma=sigma), tol=tol)


def default_profile(dim, sigma):
    return solve_S000(build_pair(default_ground_state(dim, sigma)), sigma)


# ------------------------------------------------------------------ ground state

def check_ground_state(cfg: GroundStateConfig, seed: int = 0) -> list[Check]:
    gs = default_ground_state(cfg.dim, resolution=cfg.resolution, tol=cfg.tol)
    out = []
    if cfg.dim == 1:
        r = gs.grid.r
        exact = 3**0.25 * np.sqrt(2 * np.exp(-2 * r) / (1 + np.exp(-4 * r)))
        out.append(below("closed_form_max_error", "Q(x) = 3^(1/4) sech^(1/2)(2x) for N = 1",
                         np.max(np.abs(gs.Q.values - exact)), cfg.tol))
    out.append(below("pde_residual", "-Q'' - (N-1)/r Q' + Q - Q^(1+4/N) = 0",
                     gs.residual, cfg.tol))
    out.append(below("energy_crit", "E_crit(Q) = 0", abs(energy_crit(gs.Q)), cfg.e_crit_tol))
    out.append(below("gn_ratio", "Q attains the sharp Gagliardo-Nirenberg constant",
                     abs(gn_check(gs.Q, gs) - 1), cfg.gn_tol))
    return out


# ------------------------------------------------------------------ linearized operators

def check_linops(cfg: LinopsConfig, seed: int = 0) -> list[Check]:
    refs = {
        "Lminus_Q": "L- Q = 0",
        "Lplus_LambdaQ": "L+ (Lambda Q) = -2 Q",
        "Lminus_y2Q": "L- (|y|^2 Q) = -4 Lambda Q",
        "Lplus_rho": "L+ rho = |y|^2 Q",
        "Lminus_xQ": "L- (x Q) = -grad Q",
    }
    coarse = build_pair(default_ground_state(cfg.dim, resolution=cfg.coarse_resolution))
    fine = build_pair(default_ground_state(cfg.dim))
    rc, rf = identity_residuals(coarse), identity_residuals(fine)
    out = [below(k, refs[k], rf[k], cfg.identity_tol) for k in refs]
    ratio = 1.0 / cfg.coarse_resolution
    for k in refs:
        order = math.log(rc[k] / rf[k]) / math.log(ratio)
        out.append(Check(f"{k}_order", refs[k] + " (refinement order)", order, cfg.min_order,
                         ">=", bool(order >= cfg.min_order)))
    mu_f = coercivity_scan(fine, cfg.samples, seed).minimum
    mu_c = coercivity_scan(coarse, cfg.samples, seed).minimum
    ref = "coercivity of (L+, L-) on the orthogonal complement"
    out.append(above("coercivity_minimum", ref, mu_f, 0.0))
    out.append(below("coercivity_grid_spread", ref, abs(mu_f - mu_c) / mu_f, cfg.coercivity_spread))
    return out


# ------------------------------------------------------------------ first-order profile

def check_profile(cfg: ProfileConfig, seed: int = 0) -> list[Check]:
    p = default_profile(cfg.dim, cfg.sigma)
    ref = "first-order profile system"
    out = [below(f"residual_{k}", ref, v, cfg.residual_tol) for k, v in s000_residuals(p).items()]
    s1, s2 = solvability(p)
    sref = "solvability: (P1+, Q) = (P2+, Q) = 0"
    out.append(below("solvability_P1", sref, abs(s1), cfg.solvability_tol))
    out.append(below("solvability_P2", sref, abs(s2), cfg.solvability_tol))
    for dim, sigma in cfg.identity_cases:
        betas = compute_betas(default_ground_state(int(dim)), float(sigma))
        gap = beta_identity_gap(betas, float(sigma))
        out.append(below(f"beta_identity_N{int(dim)}_sigma{sigma}",
                         "beta1' = -2 beta1/(2-alpha)^2 + 2 beta2/(2-alpha)", abs(gap),
                         cfg.identity_tol))
    ratios = [np.divide(*eesti_terms(p, lam, lam)) for lam in cfg.eesti_lambdas]
    out.append(below("energy_expansion_ratio_spread",
                     "energy expansion remainder / bound is stable in lambda",
                     max(ratios) / min(ratios), cfg.eesti_spread))
    return out


# ------------------------------------------------------------------ blow-up law

def _lambert_worst(branch: int, n: int, rng) -> float:
    near = -math.exp(-1) * (1 - rng.random(n) ** 4)
    far = np.exp(rng.uniform(-30, 23, n)) if branch == 0 else -np.exp(-rng.uniform(1, 28, n))
    worst = 0.0
    for z in np.concatenate([near, far]):
        w = lambert_w(branch, z)
        worst = max(worst, abs(w * math.exp(w) - z) / abs(z))
    return worst


def check_law(cfg: LawConfig, seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    out = []
    for br in (0, -1):
        out.append(below(f"lambert_residual_branch{br}", "W e^W = z",
                         _lambert_worst(br, cfg.lambert_samples, rng), cfg.lambert_tol))
    rep = wprop_check(np.logspace(-3, 3, cfg.wprop_samples), cfg.wprop_eps)
    wref = "(1-eps)u - 2/eps < -W_{-1}(-e^{-u-1}) - 1 - sqrt(2u) < u"
    out.append(above("wprop_lower_margin", wref, rep.lower_margin, 0.0))
    out.append(above("wprop_upper_margin", wref, rep.upper_margin, 0.0))

    pr = default_profile(cfg.dim, cfg.sigma)
    betas = compute_betas(pr.pair.gs, cfg.sigma)
    p = law_params(betas, cfg.sigma, cfg.E0, cfg.lambda0)
    out.append(below("law_ode_residual", "lambda_s = -lambda b, b_s = -b^2 + theta",
                     ode_residual(p, cfg.s0, 10 * cfg.s0), cfg.ode_tol))

    a, k = p.alpha, p.kappa
    cs = []
    for lam in cfg.japp_lambdas:
        L = abs(math.log(lam))
        r = (1 / eval_J(lam, p)) / (a / 2 * math.sqrt(k) * lam ** (a / 2) * math.sqrt(L))
        cs.append(abs(r - 1) * L)
    out.append(below("japp_constant_spread", "1/J(lambda) ~ (alpha/2) sqrt(kappa) "
                     "lambda^(alpha/2) |log lambda|^(1/2) within C/|log lambda|",
                     max(cs) / min(cs), cfg.japp_spread))

    worst = max(abs(invert_J(eval_J(lam, p), p) / lam - 1) for lam in np.logspace(-10, -2.5, 10))
    out.append(below("J_roundtrip", "J^-1(J(lambda)) = lambda", worst, cfg.roundtrip_tol))
    worst = max(abs(s_of_t(t_app(s, p), p) / s - 1) for s in (10.0, 1e3, 1e5))
    out.append(below("t_app_roundtrip", "s(t_app(s)) = s", worst, cfg.roundtrip_tol))
    ts = np.array([abs(t_app(s, p)) * s ** ((4 - a) / a) * math.log(s) ** (2 / a)
                   for s in np.logspace(3, 6, 4)])
    d = np.abs(np.diff(ts))
    out.append(below("t_app_scaling_drift", "|t_app(s)| ~ s^(-(4-alpha)/alpha) log(s)^(-2/alpha)",
                     d[-1] / d[0], 1.0))

    for E0 in cfg.energy_levels:
        q = law_params(betas, cfg.sigma, float(E0), cfg.lambda0)
        ini = choose_initial(1e3, q, pr)
        out.append(below(f"energy_matching_E0_{E0:g}", "E(P_{lambda1,b1}) = E0",
                         abs(profile_energy(pr, ini.lambda1, ini.b1) - E0), cfg.energy_tol))
    sig = Fraction(cfg.sigma).limit_denominator(10**6)
    gap = Fraction(2) / (4 - (2 - 2 * sig)) - 1 / (1 + sig)
    out.append(Check("exponent_identity", "2/(4-alpha) = 1/(1+sigma)", float(gap), 0.0, "==",
                     gap == 0))
    return out


# ------------------------------------------------------------------ simulator

def check_simulate(cfg: ValidationConfig, seed: int = 0) -> list[Check]:
    Q = default_ground_state(1).Q
    g = uniform_grid(1, cfg.r_max, cfg.nodes)
    sc = SimConfig(g, 0.0, -1, cfg.t0, cfg.t1, dt=cfg.dt, adaptive=False, record_every=100)
    st = Stepper(sc)
    tr = run(sc, pseudo_conformal(Q, g, cfg.t0), st)
    ref = "explicit pseudo-conformal solution S(t) for sigma = 0"
    out = [
        below("explicit_solution_error", ref,
              l2_distance(st, tr.final, pseudo_conformal(Q, g, cfg.t1)), cfg.error_tol),
        below("mass_drift", "mass conservation", tr.max_mass_drift(), cfg.mass_tol),
        below("energy_drift", "energy conservation", tr.max_energy_drift(), cfg.energy_tol),
    ]
    h = uniform_grid(1, cfg.r_max, cfg.order_nodes)
    u0 = pseudo_conformal(Q, h, cfg.t0)

    def final(dt):
        c = SimConfig(h, 0.0, -1, cfg.t0, cfg.t1, dt=dt, adaptive=False)
        return run(c, u0).final

    dts = sorted(cfg.order_dts, reverse=True)
    ref_u = final(dts[-1] / cfg.order_reference_ratio)
    sh = Stepper(SimConfig(h, 0.0, -1, cfg.t0, cfg.t1, dt=dts[-1]))
    errs = [l2_distance(sh, final(dt), ref_u) for dt in dts]
    for i in range(len(dts) - 1):
        order = math.log(errs[i] / errs[i + 1]) / math.log(dts[i] / dts[i + 1])
        out.append(below(f"dt_order_{dts[i]:g}_{dts[i + 1]:g}", "second order in dt",
                         abs(order - 2), cfg.order_tol))
    return out


# ------------------------------------------------------------------ modulation

def check_decompose(cfg: DecomposeCheckConfig, seed: int = 0) -> list[Check]:
    pr = default_profile(cfg.dim, cfg.sigma)
    p = law_params(compute_betas(pr.pair.gs, cfg.sigma), cfg.sigma, 0.0)
    lo, hi = cfg.lambda_range
    phys = RadialGrid.mapped(cfg.dim, r_min=1e-6, r_max=50 * hi, step=0.03, scale=(lo * hi) ** 0.5)
    rng = np.random.default_rng(seed)
    worst_par = worst_orth = 0.0
    for _ in range(cfg.samples):
        lam = math.exp(rng.uniform(math.log(lo), math.log(hi)))
        b = rng.uniform(-cfg.b_range, cfg.b_range)
        gamma = rng.uniform(-math.pi, math.pi)
        u = push_forward(assemble_profile(pr, lam, b), phys, lam, b, gamma)
        guess = (lam * math.exp(rng.uniform(-0.05, 0.05)), b + rng.uniform(-0.01, 0.01),
                 gamma + rng.uniform(-0.05, 0.05))
        st = decompose(u, guess, pr, delta=cfg.delta)
        worst_par = max(worst_par, abs(st.lam / lam - 1), abs(st.b - b), abs(st.gamma - gamma))
        worst_orth = max(worst_orth, st.ortho_residual)
    out = [
        below("parameter_recovery", "unique modulation parameters in the tube", worst_par,
              cfg.param_tol),
        below("orthogonality", "(eps, i Lambda P) = (eps, |y|^2 P) = (eps, i rho) = 0",
              worst_orth, cfg.ortho_tol),
    ]
    lam, b = 1e-3, 2e-3
    P = assemble_profile(pr, lam, b)
    href = "H(s, eps) energy-type functional"
    h0 = eval_H(ModulationState(lam, b, 0.0, 0.0, 0.0, 0 * P, P), p)
    out.append(Check("H_at_zero", href + ": H(s, 0) = 0", h0, 0.0, "==", h0 == 0))

    def states(n, scale, sd):
        res = []
        for f in random_fields(pr.grid, n, sd):
            e = project(pr.pair, f)
            res.append(ModulationState(lam, b, 0.0, 0.0, 0.0, e * (scale / h1_norm(e)), P))
        return res

    worst = 0.0
    for s in states(10, cfg.h_eps, seed):
        s2 = ModulationState(lam, b, 0.0, 0.0, 0.0, 2 * s.eps, P)
        worst = max(worst, abs(eval_H(s2, p) / eval_H(s, p) - 4))
    out.append(below("H_quadratic_scaling", href + ": H(2 eps)/H(eps) = 4", worst,
                     cfg.h_ratio_tol))
    ratios = [eval_H(s, p) / sandwich_norm(s) for s in states(cfg.sandwich_samples, 1e-3, seed + 1)]
    c1, c2 = min(ratios), max(ratios)
    sref = "c1 (|eps|_H1^2 + b^2 |y eps|^2) <= H <= c2 (...)"
    out.append(above("sandwich_c1", sref, c1, 0.0))
    out.append(Check("sandwich_c2", sref, c2, c1, ">=", bool(c2 >= c1)))
    return out


RUNNERS = {
    "ground-state": check_ground_state,
    "linops": check_linops,
    "profile": check_profile,
    "law": check_law,
    "simulate": check_simulate,
    "decompose": check_decompose,
}

__all__ = ["Check", "below", "above", "default_ground_state", "default_profile", "RUNNERS", "check_ground_state", "check_linops",
           "check_profile", "check_law", "check_simulate", "check_decompose"]
