"""Ground state Q of -Delta Q + Q - Q^{1+4/N} = 0 by shooting on Q(0)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import kv

from scipy.sparse.linalg import spsolve

from .radial import RadialField, RadialGrid, elliptic_matrix, elliptic_rhs, integrate, residual_norm

# Q(0) > 1 always (Q = 1 is the constant solution); N=1 gives 3^{1/4}.
_BRACKET = (1.001, 20.0)


class ShootingError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class GroundState:
    Q: RadialField
    q0: float
    mass: float
    gn_constant: float
    e_crit: float
    residual: float

    @property
    def grid(self) -> RadialGrid:
        return self.Q.grid

    @property
    def dim(self) -> int:
        return self.Q.grid.dim


def _rhs(dim: int):
    p = 4.0 / dim

    def f(r, y):
        q, dq = y
        return [dq, -(dim - 1) / r * dq + q - np.abs(q) ** p * q]

    return f


def _series_start(a: float, dim: int, r0: float):
    c = (a - a ** (1 + 4 / dim)) / (2 * dim)
    return [a + c * r0**2, 2 * c * r0]


def _events():
    def crossing(r, y):
        return y[0]

    def turning(r, y):
        return y[1]

    crossing.terminal = True
    crossing.direction = -1
    turning.terminal = True
    turning.direction = 1
    return crossing, turning


def _classify(a: float, dim: int, r_end: float, r0: float) -> tuple[int, float]:
    """+1 overshoot (Q crosses zero), -1 undershoot (Q turns up), 0 neither."""
    crossing, turning = _events()
    sol = solve_ivp(_rhs(dim), (r0, r_end), _series_start(a, dim, r0),
                    method="DOP853", rtol=1e-13, atol=1e-300,
                    events=(crossing, turning))
    if sol.t_events[0].size:
        return 1, float(sol.t_events[0][0])
    if sol.t_events[1].size:
        return -1, float(sol.t_events[1][0])
    return 0, r_end


def shoot(dim: int, r_end: float = 60.0, r0: float = 1e-6) -> tuple[float, float]:
    """Bisection on Q(0); returns the bracket midpoint and how far it holds.

    The second value is the radius where the two bracketing trajectories
    separate (first event of the undershooting one).
    """
    lo, hi = _BRACKET
    if _classify(lo, dim, r_end, r0)[0] != -1 or _classify(hi, dim, r_end, r0)[0] != 1:
        raise ShootingError("shooting bracket exhausted")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        kind, _ = _classify(mid, dim, r_end, r0)
        if kind == 1:
            hi = mid
        elif kind == -1:
            lo = mid
        else:
            lo = hi = mid
            break
    _, r_sep = _classify(lo, dim, r_end, r0)
    return 0.5 * (lo + hi), r_sep


def _profile(a: float, dim: int, r: np.ndarray, r0: float, r_sep: float):
    """Shooting trajectory matched to the linear K-Bessel tail.

    The match point is where the nonlinearity is negligible but well before
    the trajectory starts to drift from the true decaying solution.
    """
    r_stop = 0.6 * r_sep
    sol = solve_ivp(_rhs(dim), (r0, r_stop), _series_start(a, dim, r0),
                    method="DOP853", rtol=1e-13, atol=1e-300, dense_output=True)
    s = np.linspace(r0, r_stop, 4000)
    q = sol.sol(s)[0]
    small = np.nonzero(np.abs(q) ** (4.0 / dim) < 1e-9)[0]
    r_match = s[small[0]] if small.size else r_stop
    r_match = min(r_match, r_stop)
    nu = dim / 2.0 - 1.0
    q_match = sol.sol(r_match)[0]
    amp = q_match / (r_match ** (-nu) * kv(nu, r_match))
    out = np.empty_like(r)
    head = r <= r_match
    out[head] = np.where(r[head] < r0, a, sol.sol(np.maximum(r[head], r0))[0])
    tail = ~head
    out[tail] = amp * r[tail] ** (-nu) * kv(nu, r[tail])
    return out


def _polish(grid: RadialGrid, q: np.ndarray, iters: int = 3) -> np.ndarray:
    """Newton steps on the discrete equation; removes interpolation noise."""
    p = 4.0 / grid.dim
    zero = np.zeros_like(q)
    for _ in range(iters):
        # L_+ delta = -(L_- q) with the boundary rows of the elliptic system
        res = elliptic_matrix(grid, 1.0 - np.abs(q) ** p) @ q - elliptic_rhs(grid, zero)
        res[-1] = 0.0  # keep the matched K-Bessel tail value at r_max
        q = q - spsolve(elliptic_matrix(grid, 1.0 - (1.0 + p) * np.abs(q) ** p), res)
    return q


def energy_crit(f: RadialField) -> float:
    """Energy of the critical problem: 0.5 ||grad f||^2 - ||f||_p^p / p, p = 2 + 4/N."""
    g = f.grid
    p = 2.0 + 4.0 / g.dim
    df = g.derivative_matrix() @ f.values
    kin = np.real(g.integrate(np.abs(df) ** 2))
    pot = np.real(g.integrate(np.abs(f.values) ** p))
    return float(0.5 * kin - pot / p)


def gn_ratio_values(g: RadialGrid, values: np.ndarray, mass_q: float) -> float:
    dim = g.dim
    p = 2.0 + 4.0 / dim
    df = g.derivative_matrix() @ values
    grad = float(np.real(g.integrate(np.abs(df) ** 2)))
    mass = float(np.real(g.integrate(np.abs(values) ** 2)))
    lp = float(np.real(g.integrate(np.abs(values) ** p)))
    if mass == 0.0 or grad == 0.0:
        raise ValueError("zero field")
    return lp / ((1 + 2.0 / dim) * (mass / mass_q) ** (2.0 / dim) * grad)


def gn_check(f: RadialField, gs: GroundState) -> float:
    """Ratio of ||f||_p^p to the sharp Gagliardo-Nirenberg bound; in (0, 1]."""
    if not np.any(f.values):
        raise ValueError("zero field")
    return gn_ratio_values(f.grid, f.values, gs.mass)


def pde_residual(Q: RadialField) -> RadialField:
    g = Q.grid
    q = Q.values
    return RadialField(g, -(g.laplacian_matrix() @ q) + q - np.abs(q) ** (4.0 / g.dim) * q)


def solve_ground_state(dim: int, grid: RadialGrid | None = None,
                       tol: float = 1e-6) -> GroundState:
    """Positive radial ground state sampled on ``grid``.

    ``tol`` bounds the relative discrete PDE residual; a ValueError is
    raised if the grid cannot reach it.
    """
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    if tol < 1e-12:
        raise ValueError("tol must be >= 1e-12")
    grid = RadialGrid.default(dim) if grid is None else grid
    if grid.dim != dim:
        raise ValueError("grid dimension mismatch")
    r0 = min(1e-6, 0.5 * grid.r_min)
    a, r_sep = shoot(dim, r0=r0)
    Q = RadialField(grid, _polish(grid, _profile(a, dim, grid.r, r0, r_sep)))
    mass = float(np.real(integrate(Q * Q)))
    res = pde_residual(Q)
    rel = residual_norm(res) / math.sqrt(mass)
    if rel >= tol:
        raise ValueError(f"ground-state residual {rel:.3e} exceeds tol {tol:.1e}; refine the grid")
    # sharp constant in ||v||_p^p <= C ||v||_2^{4/N} ||grad v||_2^2
    gn = (1 + 2.0 / dim) / mass ** (2.0 / dim)
    return GroundState(Q=Q, q0=a, mass=mass, gn_constant=gn,
                       e_crit=energy_crit(Q), residual=rel)
