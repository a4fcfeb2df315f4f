"""Linearized operators L+ and L- around Q on radial fields."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import splu

from .ground_state import GroundState
from .radial import (
    RadialField,
    elliptic_matrix,
    elliptic_rhs,
    residual_norm,
    scaling_generator,
)

FREDHOLM_TOL = 1e-6


class FredholmError(ValueError):
    pass


def _potentials(gs: GroundState) -> tuple[np.ndarray, np.ndarray]:
    qp = np.abs(gs.Q.values) ** (4.0 / gs.dim)
    return 1.0 - (1.0 + 4.0 / gs.dim) * qp, 1.0 - qp


@dataclass(frozen=True, eq=False)
class LinearizedPair:
    """L+ and L- around a ground state, with cached factorizations and rho."""

    gs: GroundState
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def grid(self):
        return self.gs.grid

    @cached_property
    def potentials(self) -> tuple[np.ndarray, np.ndarray]:
        return _potentials(self.gs)

    def _lu(self, key: str, dim: int | None = None):
        k = (key, dim)
        if k not in self._cache:
            V = self.potentials[0 if key == "plus" else 1]
            if key == "minus_bordered":
                self._cache[k] = splu(self._bordered())
            else:
                self._cache[k] = splu(elliptic_matrix(self.grid, V, dim))
        return self._cache[k]

    def _bordered(self) -> sparse.csc_matrix:
        g = self.grid
        A = elliptic_matrix(g, self.potentials[1])
        q = self.gs.Q.values
        col = q.copy()
        col[0] = col[-1] = 0.0
        row = g.quadrature * q
        return sparse.bmat([[A, col[:, None]], [row[None, :], None]], format="csc")

    @cached_property
    def rho(self) -> RadialField:
        q = self.gs.Q
        return solve_Lplus(self, RadialField(q.grid, q.grid.r**2 * q.values))

    @cached_property
    def lambda_q(self) -> RadialField:
        return scaling_generator(self.gs.Q)


def build_pair(gs: GroundState) -> LinearizedPair:
    return LinearizedPair(gs)


def _apply(f: RadialField, V: np.ndarray, dim: int | None = None) -> RadialField:
    g = f.grid
    return RadialField(g, -(g.laplacian_matrix(dim) @ f.values) + V * f.values)


def apply_Lplus(pair: LinearizedPair, f: RadialField) -> RadialField:
    _same_grid(pair, f)
    return _apply(f, pair.potentials[0])


def apply_Lminus(pair: LinearizedPair, f: RadialField) -> RadialField:
    _same_grid(pair, f)
    return _apply(f, pair.potentials[1])


def _same_grid(pair: LinearizedPair, f: RadialField) -> None:
    if f.grid is not pair.grid:
        raise ValueError("grid mismatch")


def _solve(lu, b: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(b):
        return lu.solve(np.ascontiguousarray(b.real)) + 1j * lu.solve(np.ascontiguousarray(b.imag))
    return lu.solve(b)


def _needs_split(power: float, log_power: int) -> bool:
    return log_power in (0, 1) and power > -2.0 and (power or log_power) and power % 2 != 0


def _singular_split(pair: LinearizedPair, v: np.ndarray, power: float, log_power: int,
                    V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Peel off ``s = v phi`` with ``-Delta phi = r^power (log r)^log_power``.

    Returns ``s`` and the right-hand side for the remainder
    ``f - s``, whose source is two powers more regular at the origin.
    """
    g = pair.grid
    N = g.dim
    q = power + 2.0
    c = q * (q + N - 2.0)
    a1, a0 = (-1.0 / c, (2 * q + N - 2.0) / c**2) if log_power else (0.0, -1.0 / c)
    r = g.r
    L = np.log(r)
    w = g.laplacian_matrix() @ v - V * v
    dv = (g.derivative_matrix() @ v) / r
    s = v * r**q * (a1 * L + a0)
    b = elliptic_rhs(g, a0 * w + 2 * (q * a0 + a1) * dv, q, 0)
    if a1:
        b = b + elliptic_rhs(g, a1 * (w + 2 * q * dv), q, 1)
    return s, b


def solve_Lplus(pair: LinearizedPair, rhs: RadialField, power: float = 0.0,
                log_power: int = 0) -> RadialField:
    """Radial solution of ``L+ f = rhs * r^power * (log r)^log_power``."""
    _same_grid(pair, rhs)
    if _needs_split(power, log_power):
        s, b = _singular_split(pair, rhs.values, power, log_power, pair.potentials[0])
        return RadialField(pair.grid, s + _solve(pair._lu("plus"), b))
    b = elliptic_rhs(pair.grid, rhs.values, power, log_power)
    return RadialField(pair.grid, _solve(pair._lu("plus"), b))


def solve_Lminus(pair: LinearizedPair, rhs: RadialField, orthogonalize: bool = True,
                 power: float = 0.0, log_power: int = 0,
                 tol: float = FREDHOLM_TOL) -> RadialField:
    """Radial solution of ``L- f = rhs * r^power * (log r)^log_power``.

    The source must be orthogonal to Q (relative ``tol``).  With
    ``orthogonalize`` the result satisfies ``(f, Q) = 0``; otherwise the
    kernel component is fixed by ``f(r_min) = 0``, i.e. vanishing at the origin.
    """
    _same_grid(pair, rhs)
    g = pair.grid
    q = pair.gs.Q.values
    src = rhs.values * g.r**power * np.log(g.r) ** log_power
    full = g.integrate(rhs.values * q, power, log_power)
    scale = math.sqrt(max(float(np.real(g.integrate(np.abs(src) ** 2))), 0.0)) * math.sqrt(pair.gs.mass)
    if abs(full) > tol * max(scale, 1e-300):
        raise FredholmError(
            f"Fredholm condition violated: (rhs, Q) = {complex(full).real:.3e}"
            f" exceeds {tol:.1e} * |rhs| |Q|")
    s = np.zeros(g.n)
    if _needs_split(power, log_power):
        s, b = _singular_split(pair, rhs.values, power, log_power, pair.potentials[1])
        b = np.append(b, -g.quadrature @ (s * q))
    else:
        b = np.append(elliptic_rhs(g, rhs.values, power, log_power), 0.0)
    x = _solve(pair._lu("minus_bordered"), b)[:-1]
    if not orthogonalize:
        # s vanishes at the origin, so normalize on the regular part
        x = x - x[0] / q[0] * q
    return RadialField(g, s + x)


def solve_dipole(pair: LinearizedPair, rhs: RadialField) -> RadialField:
    """Radial factor h of ``L-(x h) = x * rhs`` (the l = 1 sector)."""
    _same_grid(pair, rhs)
    g = pair.grid
    b = elliptic_rhs(g, rhs.values, dim=g.dim + 2)
    return RadialField(g, _solve(pair._lu("minus", g.dim + 2), b))


def dipole_residual(pair: LinearizedPair, factor: float = 2.0) -> float:
    """``|| L-(x Q) + factor * grad Q ||_2``; the identity holds with factor 2."""
    g = pair.grid
    q = pair.gs.Q
    lq = _apply(q, pair.potentials[1], g.dim + 2)
    dq = g.derivative_matrix() @ q.values
    # x h(|x|) has L^2 norm || r h ||
    return residual_norm(RadialField(g, g.r * (lq.values + factor * dq / g.r)))


def identity_residuals(pair: LinearizedPair) -> dict[str, float]:
    """L^2 residuals of the five linear identities satisfied by Q."""
    g = pair.grid
    q = pair.gs.Q
    lam = pair.lambda_q
    y2q = RadialField(g, g.r**2 * q.values)
    return {
        "Lminus_Q": residual_norm(apply_Lminus(pair, q)),
        "Lplus_LambdaQ": residual_norm(apply_Lplus(pair, lam) + 2.0 * q),
        "Lminus_y2Q": residual_norm(apply_Lminus(pair, y2q) + 4.0 * lam),
        "Lplus_rho": residual_norm(apply_Lplus(pair, pair.rho) - y2q),
        "Lminus_xQ": dipole_residual(pair),
    }


# ---------------------------------------------------------------- coercivity

def quadratic_forms(pair: LinearizedPair, f: RadialField) -> tuple[float, float]:
    """``<L+ Re f, Re f>`` and ``<L- Im f, Im f>`` in integrated-by-parts form."""
    g = pair.grid
    vp, vm = pair.potentials
    D = g.derivative_matrix()
    re, im = np.real(f.values), np.imag(f.values)
    qp = g.quadrature @ ((D @ re) ** 2 + vp * re**2)
    qm = g.quadrature @ ((D @ im) ** 2 + vm * im**2)
    return float(qp), float(qm)


def h1_norm_sq(f: RadialField) -> float:
    g = f.grid
    d = g.derivative_matrix() @ f.values
    return float(g.quadrature @ (np.abs(f.values) ** 2 + np.abs(d) ** 2))


def _gram_schmidt(v: np.ndarray, basis: list[np.ndarray], w: np.ndarray) -> np.ndarray:
    for e in basis:
        v = v - (w @ (v * e)) / (w @ (e * e)) * e
    return v


def project(pair: LinearizedPair, f: RadialField) -> RadialField:
    """Remove (Re f, Q), (Re f, |y|^2 Q) and (Im f, rho)."""
    g = pair.grid
    q = pair.gs.Q.values
    w = g.quadrature
    b1 = q
    b2 = _gram_schmidt(g.r**2 * q, [b1], w)
    re = _gram_schmidt(np.real(f.values), [b1, b2], w)
    im = _gram_schmidt(np.imag(f.values), [pair.rho.values], w)
    return RadialField(g, re + 1j * im)


def random_fields(grid, samples: int, seed: int, terms: int = 4) -> list[RadialField]:
    """Smooth decaying radial fields: sums of r^{2m} Gaussians, complex weights."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(samples):
        v = np.zeros(grid.n, dtype=complex)
        for _ in range(terms):
            w = math.exp(rng.uniform(math.log(0.3), math.log(4.0)))
            m = int(rng.integers(0, 3))
            c = complex(rng.normal(), rng.normal())
            v += c * (grid.r / w) ** (2 * m) * np.exp(-((grid.r / w) ** 2))
        out.append(RadialField(grid, v))
    return out


@dataclass(frozen=True)
class CoercivityResult:
    minimum: float        # smallest sampled quotient
    span_minimum: float   # generalized eigen-minimum over the span of the samples
    quotients: np.ndarray


def coercivity_scan(pair: LinearizedPair, samples: int = 100, seed: int = 7) -> CoercivityResult:
    if samples < 10:
        raise ValueError("samples must be >= 10")
    fields = [project(pair, f) for f in random_fields(pair.grid, samples, seed)]
    quot = []
    for f in fields:
        qp, qm = quadratic_forms(pair, f)
        quot.append((qp + qm) / h1_norm_sq(f))
    return CoercivityResult(float(min(quot)), _span_minimum(pair, fields), np.array(quot))


def coercivity_check(pair: LinearizedPair, samples: int = 100, seed: int = 7) -> float:
    """Minimal projected quotient ``(<L+ u1,u1> + <L- u2,u2>) / ||u||_{H^1}^2``."""
    return coercivity_scan(pair, samples, seed).minimum


def _span_minimum(pair: LinearizedPair, fields: list[RadialField]) -> float:
    """Smallest generalized eigenvalue of the form over span{Re f_k} and span{Im f_k}."""
    g = pair.grid
    D = g.derivative_matrix()
    w = g.quadrature
    vp, vm = pair.potentials
    best = math.inf
    for part, V in ((np.real, vp), (np.imag, vm)):
        X = np.stack([part(f.values) for f in fields], axis=1)
        DX = D @ X
        A = DX.T @ (w[:, None] * DX) + X.T @ ((w * V)[:, None] * X)
        B = DX.T @ (w[:, None] * DX) + X.T @ (w[:, None] * X)
        # drop near-dependent directions before the generalized solve
        s, U = linalg.eigh(B)
        keep = s > 1e-10 * s[-1]
        T = U[:, keep] / np.sqrt(s[keep])
        best = min(best, float(linalg.eigvalsh(T.T @ A @ T)[0]))
    return best


def projected_quotient(pair: LinearizedPair, f: RadialField) -> float:
    f = project(pair, f)
    qp, qm = quadratic_forms(pair, f)
    return (qp + qm) / h1_norm_sq(f)


def lambda_q_form(pair: LinearizedPair) -> float:
    """``<L+ Lambda Q, Lambda Q>``; vanishes because (Q, Lambda Q) = 0."""
    return quadratic_forms(pair, pair.lambda_q)[0]


__all__ = [
    "LinearizedPair", "FredholmError", "build_pair", "apply_Lplus", "apply_Lminus",
    "solve_Lplus", "solve_Lminus", "solve_dipole", "dipole_residual",
    "identity_residuals", "coercivity_check", "coercivity_scan", "CoercivityResult",
    "project", "projected_quotient", "random_fields", "quadratic_forms",
    "lambda_q_form",
]
