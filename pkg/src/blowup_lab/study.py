"""Profile-driven blow-up run: initial data, simulation, decomposition, rate fit."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ground_state import solve_ground_state
from .law import LawParams, choose_initial, invert_J, law_params, t_app
from .linops import build_pair
from .modulation import ModulationState, decompose_trace, mod_residual
from .profile import ProfileOrder1, assemble_profile, compute_betas, solve_S000
from .radial import RadialGrid
from .rates import RateError, RateFit, fit_rate
from .simulator import SimConfig, SimTrace, rescaled_profile, run


@dataclass(frozen=True)
class BlowupConfig:
    dim: int = 1
    sigma: float = 0.25
    E0: float = 0.0
    s1: float = 10.0                 # rescaled time of the initial data
    grid_step: float = 0.04          # mapped-grid step; geometric ratio exp(step) near 0
    r_min_factor: float = 1e-4       # r_min = factor * lambda1
    r_max_factor: float = 60.0       # r_max = factor * lambda1
    tol: float = 1e-6                # simulator local error
    grad_ceiling: float = 30.0
    snapshots: int = 40
    delta: float = 0.5               # decomposition tube radius
    model: str = "A"


@dataclass
class BlowupSetup:
    profile: ProfileOrder1
    law: LawParams
    lambda1: float
    b1: float
    sim: SimConfig
    u0: object

    def initial_on(self, grid: RadialGrid):
        """The initial data sampled on another grid."""
        P = assemble_profile(self.profile, self.lambda1, self.b1)
        return rescaled_profile(P, grid, self.lambda1, self.b1)


@dataclass
class BlowupResult:
    setup: BlowupSetup
    trace: SimTrace
    states: list[ModulationState]
    fits: dict[str, RateFit]      # "A" with the log correction, "B" pure power
    mod: np.ndarray
    model: str = "A"

    @property
    def fit(self) -> RateFit:
        return self.fits[self.model]


def build_profile(dim: int, sigma: float) -> ProfileOrder1:
    gs = solve_ground_state(dim, RadialGrid.default(dim, sigma=sigma))
    return solve_S000(build_pair(gs), sigma)


def setup_blowup(cfg: BlowupConfig, profile: ProfileOrder1 | None = None) -> BlowupSetup:
    pr = profile if profile is not None else build_profile(cfg.dim, cfg.sigma)
    p = law_params(compute_betas(pr.pair.gs, cfg.sigma), cfg.sigma, cfg.E0)
    d = choose_initial(cfg.s1, p, pr)
    l1 = d.lambda1
    grid = RadialGrid.mapped(cfg.dim, r_min=cfg.r_min_factor * l1,
                             r_max=cfg.r_max_factor * l1, step=cfg.grid_step, scale=l1)
    u0 = rescaled_profile(assemble_profile(pr, l1, d.b1), grid, l1, d.b1)
    # schedule snapshots geometrically in s up to lambda_app = lambda1 / ceiling
    s_max = cfg.s1
    while invert_J(s_max, p) > l1 / cfg.grad_ceiling:
        s_max *= 1.5
    ss = np.geomspace(cfg.s1, s_max, cfg.snapshots)
    times = tuple(t_app(s, p) for s in ss)
    sim = SimConfig(grid, cfg.sigma, -1, times[0], times[-1], dt=1e-3 * l1**2, tol=cfg.tol,
                    grad_ceiling=cfg.grad_ceiling, snapshot_times=times, record_every=10,
                    mass_tol=1e-8)
    return BlowupSetup(pr, p, l1, d.b1, sim, u0)


def run_blowup(cfg: BlowupConfig, profile: ProfileOrder1 | None = None) -> BlowupResult:
    """Simulate, decompose every snapshot and fit the rate with a free blow-up time."""
    su = setup_blowup(cfg, profile)
    tr = run(su.sim, su.u0)
    states = decompose_trace(tr.snapshots, (su.lambda1, su.b1, 0.0), su.profile,
                             s0=cfg.s1, delta=cfg.delta)
    lam = np.array([st.lam for st in states])
    t = np.array([st.t for st in states])
    # the first samples carry the initial transient; fit after lambda has dropped
    keep = lam < lam[0] / 1.5
    if keep.sum() < 4:
        raise RateError("insufficient concentration")
    fits = {m: fit_rate(t[keep], lam[keep], cfg.sigma, m, T=None) for m in ("A", "B")}
    mod = mod_residual(states, su.profile) if len(states) >= 3 else np.empty((0, 3))
    return BlowupResult(su, tr, states, fits, mod, cfg.model)


def lambda_from_gradient(trace: SimTrace, profile: ProfileOrder1) -> np.ndarray:
    """Crude scale estimate ``|grad Q| / |grad u|``."""
    g = profile.grid
    q = profile.Q.values
    gq = math.sqrt(float(g.integrate((g.derivative_matrix() @ q) ** 2)))
    return gq / np.asarray(trace.gradnorm)


__all__ = ["BlowupConfig", "BlowupSetup", "BlowupResult", "build_profile", "setup_blowup",
           "run_blowup", "lambda_from_gradient"]
