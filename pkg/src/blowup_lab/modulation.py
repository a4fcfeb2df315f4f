"""Modulated decomposition ``u = lam^{-N/2} (P + eps)(x/lam) exp(-i b |x|^2/(4 lam^2) + i gamma)``.

The parameters are fixed by three orthogonality conditions on ``eps``:
``(eps, i Lambda P) = (eps, |y|^2 P) = (eps, i rho) = 0`` with the real
pairing ``(f, g) = Re int f conj(g)``.  They are solved by damped Newton in
``(log lam, b, gamma)`` with a finite-difference Jacobian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .law import LawParams
from .profile import ProfileOrder1, assemble_profile, theta
from .radial import RadialField, inner, interpolator, scaling_generator


class DecompositionError(RuntimeError):
    pass


TUBE_MESSAGE = "outside decomposition tube"


@dataclass(frozen=True, eq=False)
class ModulationState:
    lam: float
    b: float
    gamma: float
    s: float
    t: float
    eps: RadialField          # remainder on the profile grid
    P: RadialField            # profile at (lam, b)
    orthogonality: tuple = (0.0, 0.0, 0.0)
    iterations: int = 0

    @property
    def ortho_residual(self) -> float:
        return float(sum(abs(x) for x in self.orthogonality))


def _guess_tuple(guess) -> tuple[float, float, float]:
    if isinstance(guess, Mapping):
        return float(guess["lambda"]), float(guess["b"]), float(guess["gamma"])
    lam, b, gamma = guess
    return float(lam), float(b), float(gamma)


def pull_back(u, grid, lam: float, b: float, gamma: float) -> np.ndarray:
    """``lam^{N/2} u(lam y) exp(i b |y|^2/4 - i gamma)`` on ``grid``.

    ``u`` is a RadialField or a callable returned by :func:`interpolator`.
    """
    y = grid.r
    ev = u if callable(u) else u.interpolate
    v = lam ** (grid.dim / 2) * ev(lam * y)
    return v * np.exp(1j * (b * y**2 / 4 - gamma))


def push_forward(v: RadialField, grid, lam: float, b: float, gamma: float) -> RadialField:
    """Inverse of :func:`pull_back`: evaluate on the physical ``grid``."""
    x = grid.r
    amp = lam ** (-grid.dim / 2) * v.interpolate(x / lam)
    return RadialField(grid, amp * np.exp(-1j * b * x**2 / (4 * lam**2) + 1j * gamma))


def h1_norm(f: RadialField) -> float:
    g = f.grid
    d = g.derivative_matrix() @ f.values
    return math.sqrt(max(float(np.real(g.integrate(np.abs(f.values) ** 2 + np.abs(d) ** 2))), 0.0))


class _Decomposer:
    def __init__(self, u: RadialField, profile: ProfileOrder1):
        self.u = interpolator(u.grid, u.values)
        self.pr = profile
        self.grid = profile.grid
        self.irho = RadialField(self.grid, 1j * profile.pair.rho.values)

    def split(self, x) -> tuple[RadialField, RadialField]:
        lam, b, gamma = math.exp(x[0]), x[1], x[2]
        if not (0.0 < lam < 1.0):
            raise DecompositionError(TUBE_MESSAGE)
        P = assemble_profile(self.pr, lam, b)
        v = pull_back(self.u, self.grid, lam, b, gamma)
        return RadialField(self.grid, v - P.values), P

    def conditions(self, x) -> np.ndarray:
        eps, P = self.split(x)
        g = self.grid
        iLP = RadialField(g, 1j * scaling_generator(P).values)
        y2P = RadialField(g, g.r**2 * P.values)
        return np.array([inner(eps, iLP), inner(eps, y2P), inner(eps, self.irho)])

    def jacobian(self, x, h: float = 1e-6) -> np.ndarray:
        J = np.empty((3, 3))
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            J[:, k] = (self.conditions(x + e) - self.conditions(x - e)) / (2 * h)
        return J


def decompose(u: RadialField, guess, profile: ProfileOrder1, delta: float = 0.5,
              tol: float = 1e-12, max_iter: int = 40, s: float = math.nan,
              t: float = math.nan) -> ModulationState:
    """Find ``(lam, b, gamma)`` near ``guess`` satisfying the orthogonality conditions.

    ``guess`` is a mapping with keys lambda/b/gamma or a triple.  The guess
    must satisfy ``|pullback(u) - Q|_{H^1} < delta`` and the final remainder
    must too; otherwise :class:`DecompositionError` is raised.
    """
    lam0, b0, g0 = _guess_tuple(guess)
    if not (0.0 < lam0 < 1.0):
        raise DecompositionError(TUBE_MESSAGE)
    dec = _Decomposer(u, profile)
    Q = profile.Q
    x = np.array([math.log(lam0), b0, g0])
    start = RadialField(dec.grid, pull_back(dec.u, dec.grid, lam0, b0, g0) - Q.values)
    if not h1_norm(start) < delta:
        raise DecompositionError(TUBE_MESSAGE)
    F = dec.conditions(x)
    it = 0
    while np.sum(np.abs(F)) > tol:
        if it >= max_iter:
            raise DecompositionError(TUBE_MESSAGE)
        it += 1
        try:
            dx = np.linalg.solve(dec.jacobian(x), -F)
        except np.linalg.LinAlgError:
            raise DecompositionError(TUBE_MESSAGE) from None
        # backtrack on the l1 size of the conditions
        step = 1.0
        while True:
            try:
                Fn = dec.conditions(x + step * dx)
            except DecompositionError:
                Fn = None
            if Fn is not None and np.sum(np.abs(Fn)) < np.sum(np.abs(F)):
                break
            step *= 0.5
            if step < 1e-4:
                raise DecompositionError(TUBE_MESSAGE)
        x = x + step * dx
        F = Fn
    eps, P = dec.split(x)
    if not h1_norm(eps) < delta:
        raise DecompositionError(TUBE_MESSAGE)
    return ModulationState(math.exp(x[0]), float(x[1]), float(x[2]), s, t, eps, P,
                           tuple(float(f) for f in F), it)


def align_phase(u: RadialField, profile: ProfileOrder1, lam: float, b: float) -> float:
    """Phase ``gamma`` maximizing ``Re (pullback(u), Q)`` at fixed ``lam``, ``b``."""
    g = profile.grid
    v = pull_back(u, g, lam, b, 0.0)
    return float(np.angle(g.integrate(v * profile.Q.values)))


def _log_mean(x: float, y: float) -> float:
    """``(y - x) / log(y / x)``: exact mean of ``1/lam^2`` when ``log lam`` is linear in t."""
    r = y / x
    if abs(r - 1) < 1e-8:
        return 0.5 * (x + y)
    return (y - x) / math.log(r)


def decompose_trace(snapshots: Sequence[tuple[float, RadialField]], guess,
                    profile: ProfileOrder1, s0: float = 0.0, **kw) -> list[ModulationState]:
    """Decompose a time series by continuation; ``s`` integrates ``dt / lam^2``
    with the logarithmic mean between samples.

    ``lam`` and ``b`` are predicted by linear extrapolation in ``t``; the
    phase guess is aligned against Q and then lifted next to the previous
    value, so ``gamma`` comes out unwrapped.
    """
    out: list[ModulationState] = []
    lam, b, gamma = _guess_tuple(guess)
    for t, u in snapshots:
        if out and not t > out[-1].t:
            raise ValueError("snapshot times must increase")
        if len(out) >= 2:
            a, c = out[-2], out[-1]
            w = (t - c.t) / (c.t - a.t)
            lam = c.lam * (c.lam / a.lam) ** w
            b = c.b + w * (c.b - a.b)
        if out:
            prev = out[-1]
            pred = prev.gamma + (t - prev.t) / prev.lam**2
            gamma = align_phase(u, profile, lam, b)
            gamma += 2 * math.pi * round((pred - gamma) / (2 * math.pi))
        st = decompose(u, (lam, b, gamma), profile, t=t, **kw)
        s = s0 if not out else out[-1].s + (t - out[-1].t) * _log_mean(out[-1].lam**-2, st.lam**-2)
        st = ModulationState(st.lam, st.b, st.gamma, s, t, st.eps, st.P,
                             st.orthogonality, st.iterations)
        out.append(st)
        lam, b, gamma = st.lam, st.b, st.gamma
    return out


def mod_residual(trace: Sequence[ModulationState], profile: ProfileOrder1) -> np.ndarray:
    """``(lam_s/lam + b, b_s + b^2 - theta, 1 - gamma_s)`` at interior states.

    Derivatives are second-order finite differences on the (possibly
    nonuniform) ``s`` samples.  ``gamma`` must already be lifted to R (as
    :func:`decompose_trace` does); wrapping it here would be wrong once the
    samples are more than pi apart in ``s``.  Returns shape ``(n - 2, 3)``.
    """
    if len(trace) < 3:
        raise ValueError("need at least 3 states")
    s = np.array([st.s for st in trace], dtype=float)
    if not np.all(np.diff(s) > 0):
        raise ValueError("s must increase strictly along the trace")
    lam = np.array([st.lam for st in trace])
    b = np.array([st.b for st in trace])
    gam = np.array([st.gamma for st in trace])
    dl = np.gradient(np.log(lam), s, edge_order=2)
    db = np.gradient(b, s, edge_order=2)
    dg = np.gradient(gam, s, edge_order=2)
    th = np.array([theta(profile, x, y) for x, y in zip(lam, b)])
    m = np.stack([dl + b, db + b * b - th, 1 - dg], axis=1)
    return m[1:-1]


def eval_H(state: ModulationState, p: LawParams) -> float:
    """Energy-type functional of the remainder.

    ``1/2 |eps|_{H^1}^2 + b^2 | |y| eps |^2 - int (F(P+eps) - F(P) - dF(P) eps)
    + 1/2 lam^a log(lam) int |y|^{-2 sigma} |eps|^2
    + 1/2 lam^a int |y|^{-2 sigma} log|y| |eps|^2`` with ``F(u) = |u|^p / p``.
    """
    eps = state.eps
    g = eps.grid
    e = eps.values
    P = state.P.values
    pw = 2.0 + 4.0 / g.dim
    a2 = np.abs(e) ** 2
    de = g.derivative_matrix() @ e
    h1 = float(np.real(g.integrate(a2 + np.abs(de) ** 2)))
    wy = float(np.real(g.integrate(a2 * g.r**2)))
    aP = np.abs(P)
    diff = (np.abs(P + e) ** pw - aP**pw) / pw - aP ** (pw - 2) * np.real(P * np.conj(e))
    nl = float(np.real(g.integrate(diff)))
    la = state.lam**p.alpha
    ws = float(np.real(g.integrate(a2, power=-2 * p.sigma)))
    wl = float(np.real(g.integrate(a2, power=-2 * p.sigma, log_power=1)))
    return 0.5 * h1 + state.b**2 * wy - nl + 0.5 * la * math.log(state.lam) * ws + 0.5 * la * wl


def sandwich_norm(state: ModulationState) -> float:
    """``|eps|_{H^1}^2 + b^2 | |y| eps |_2^2``."""
    eps = state.eps
    g = eps.grid
    wy = float(np.real(g.integrate(np.abs(eps.values) ** 2 * g.r**2)))
    return h1_norm(eps) ** 2 + state.b**2 * wy


__all__ = [
    "ModulationState", "DecompositionError", "decompose", "decompose_trace",
    "mod_residual", "align_phase", "eval_H", "sandwich_norm", "pull_back", "push_forward", "h1_norm",
]
