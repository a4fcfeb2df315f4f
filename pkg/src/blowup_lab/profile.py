"""First-order blow-up profile around Q and its energy.

Notation: ``A = || |y|^{-sigma} Q ||^2``, ``B = || |y| Q ||^2`` and
``I = int |y|^{-2 sigma} log|y| Q^2``.  The correction terms solve

    L+ P1+ = -beta1 |y|^2 Q / 4 - |y|^{-2 sigma} Q
    L+ P2+ =  beta2 |y|^2 Q / 4 - |y|^{-2 sigma} log|y| Q
    L- P.- = -alpha P.+

and ``beta1``, ``beta2`` are fixed by the solvability conditions
``(P.+, Q) = 0`` needed for the ``L-`` equations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ground_state import GroundState
from .linops import LinearizedPair, apply_Lminus, apply_Lplus, solve_Lminus, solve_Lplus
from .radial import RadialField, check_sigma, inner, residual_norm


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class Betas:
    beta1: float
    beta2: float
    beta1_prime: float
    A: float
    B: float
    I: float


def moments(gs: GroundState, sigma: float) -> tuple[float, float, float]:
    g = gs.grid
    q2 = gs.Q.values**2
    A = float(g.integrate(q2, power=-2 * sigma))
    B = float(g.integrate(q2 * g.r**2))
    I = float(g.integrate(q2, power=-2 * sigma, log_power=1))
    return A, B, I


def compute_betas(gs: GroundState, sigma: float) -> Betas:
    """Solvability constants of the first-order system.

    ``beta1_prime`` is the coefficient appearing in the energy expansion;
    with these signs ``beta1_prime = -2 beta1/(2-alpha)^2 + 2 beta2/(2-alpha)``.
    """
    check_sigma(sigma, gs.dim)
    A, B, I = moments(gs, sigma)
    beta1 = 4 * sigma * A / B
    beta2 = 4 / B * (0.5 * A - sigma * I)
    beta1_prime = -4 * I / B
    return Betas(beta1, beta2, beta1_prime, A, B, I)


def beta_identity_gap(b: Betas, sigma: float) -> float:
    two_minus_alpha = 2 * sigma
    return b.beta1_prime - (-2 * b.beta1 / two_minus_alpha**2 + 2 * b.beta2 / two_minus_alpha)


@dataclass(frozen=True, eq=False)
class ProfileOrder1:
    pair: LinearizedPair
    sigma: float
    alpha: float
    beta1: float
    beta2: float
    beta1_prime: float
    P1_plus: RadialField
    P2_plus: RadialField
    P1_minus: RadialField
    P2_minus: RadialField
    normalization: str = "orthogonal"

    @property
    def Q(self) -> RadialField:
        return self.pair.gs.Q

    @property
    def grid(self):
        return self.pair.grid


def solve_S000(pair: LinearizedPair, sigma: float, betas: Betas | None = None,
               normalization: str = "orthogonal") -> ProfileOrder1:
    """Solve the first-order system.

    ``normalization`` fixes the free Q-component of ``P.-``: "orthogonal"
    makes it L^2-orthogonal to Q, "origin" makes it vanish at the origin.
    """
    if normalization not in ("orthogonal", "origin"):
        raise ValueError("normalization must be 'orthogonal' or 'origin'")
    gs = pair.gs
    check_sigma(sigma, gs.dim)
    b = compute_betas(gs, sigma) if betas is None else betas
    g = pair.grid
    q = gs.Q
    y2q = RadialField(g, g.r**2 * q.values)
    alpha = 2.0 - 2.0 * sigma
    smooth = solve_Lplus(pair, y2q)  # this is rho
    sing = solve_Lplus(pair, q, power=-2 * sigma)
    sing_log = solve_Lplus(pair, q, power=-2 * sigma, log_power=1)
    p1 = -0.25 * b.beta1 * smooth - sing
    p2 = 0.25 * b.beta2 * smooth - sing_log
    orth = normalization == "orthogonal"
    m1 = solve_Lminus(pair, -alpha * p1, orthogonalize=orth)
    m2 = solve_Lminus(pair, -alpha * p2, orthogonalize=orth)
    return ProfileOrder1(pair, sigma, alpha, b.beta1, b.beta2, b.beta1_prime,
                         p1, p2, m1, m2, normalization)


def s000_residuals(p: ProfileOrder1) -> dict[str, float]:
    """L^2 residuals of the four equations; ``c_plus`` is identically zero here."""
    g = p.grid
    q = p.Q.values
    s = p.sigma
    r = g.r
    e1 = apply_Lplus(p.pair, p.P1_plus).values + 0.25 * p.beta1 * r**2 * q + r ** (-2 * s) * q
    e2 = (apply_Lplus(p.pair, p.P2_plus).values - 0.25 * p.beta2 * r**2 * q
          + r ** (-2 * s) * np.log(r) * q)
    e3 = apply_Lminus(p.pair, p.P1_minus) + p.alpha * p.P1_plus
    e4 = apply_Lminus(p.pair, p.P2_minus) + p.alpha * p.P2_plus
    return {
        "Lplus_P1": residual_norm(RadialField(g, e1)),
        "Lplus_P2": residual_norm(RadialField(g, e2)),
        "Lminus_P1": residual_norm(e3),
        "Lminus_P2": residual_norm(e4),
        "c_plus": 0.0,
    }


def solvability(p: ProfileOrder1) -> tuple[float, float]:
    """``(P1+, Q)`` and ``(P2+, Q)``."""
    return inner(p.P1_plus, p.Q), inner(p.P2_plus, p.Q)


def _check_params(lam: float) -> None:
    if not (0.0 < lam < 1.0):
        raise ProfileError("profile expansion invalid: need 0 < lambda < 1")


def assemble_profile(p: ProfileOrder1, lam: float, b: float) -> RadialField:
    """``Q + lam^a log(lam) (P1+ + i b P1-) + lam^a (P2+ + i b P2-)``."""
    _check_params(lam)
    la = lam**p.alpha
    c1 = la * math.log(lam)
    v = (p.Q.values
         + c1 * (p.P1_plus.values + 1j * b * p.P1_minus.values)
         + la * (p.P2_plus.values + 1j * b * p.P2_minus.values))
    return RadialField(p.grid, v)


def theta(p: ProfileOrder1, lam: float, b: float) -> float:
    _check_params(lam)
    la = lam**p.alpha
    return -p.beta1 * la * math.log(lam) + p.beta2 * la


def energy(u: RadialField, sigma: float) -> float:
    """``1/2 |grad u|^2 - |u|_p^p / p + 1/2 int |x|^{-2 sigma} log|x| |u|^2``."""
    g = u.grid
    pw = 2.0 + 4.0 / g.dim
    du = g.derivative_matrix() @ u.values
    a2 = np.abs(u.values) ** 2
    kin = float(g.integrate(np.abs(du) ** 2))
    pot = float(g.integrate(a2 ** (pw / 2)))
    ext = float(g.integrate(a2, power=-2 * sigma, log_power=1))
    return 0.5 * kin - pot / pw + 0.5 * ext


def rescaled_energy(P: RadialField, lam: float, b: float, sigma: float,
                    Q: RadialField | None = None) -> float:
    """Energy of ``lam^{-N/2} P(x/lam) exp(-i b |x|^2 / (4 lam^2) + i gamma)``.

    Scaling is done analytically: ``E = lam^{-2} E_crit(P e^{-i b|y|^2/4})
    + lam^{-2 sigma}/2 int |y|^{-2 sigma} (log lam + log|y|) |P|^2``.
    With ``Q`` given, ``E_crit`` is evaluated as the increment over
    ``E_crit(Q) = 0``, so the discretization error of ``E_crit(Q)`` is not
    amplified by ``lam^{-2}``.
    """
    g = P.grid
    pw = 2.0 + 4.0 / g.dim
    D = g.derivative_matrix()
    v = P.values
    grad = D @ v - 0.5j * b * g.r * v
    a2 = np.abs(v) ** 2
    if Q is None:
        crit = 0.5 * float(g.integrate(np.abs(grad) ** 2)) - float(g.integrate(a2 ** (pw / 2))) / pw
    else:
        # written in d = P - Q so that nothing O(1) cancels
        q = Q.values
        d = v - q
        dq = D @ q
        dd = D @ d
        bv = 0.5 * b * g.r * v
        dkin = 2 * dq * dd.real + np.abs(dd) ** 2 + np.abs(bv) ** 2 - 2 * np.imag((dq + dd) * np.conj(bv))
        x = (2 * q * d.real + np.abs(d) ** 2) / q**2
        dpot = q**pw * np.expm1(0.5 * pw * np.log1p(x))
        crit = 0.5 * float(g.integrate(dkin)) - float(g.integrate(dpot)) / pw
    w = float(g.integrate(a2, power=-2 * sigma))
    wl = float(g.integrate(a2, power=-2 * sigma, log_power=1))
    return crit / lam**2 + 0.5 * lam ** (-2 * sigma) * (math.log(lam) * w + wl)


def profile_energy(p: ProfileOrder1, lam: float, b: float, sigma: float | None = None,
                   gamma: float = 0.0) -> float:
    """Full energy of the rescaled profile ``P_{lam,b,gamma}``; gamma drops out."""
    sigma = p.sigma if sigma is None else sigma
    return rescaled_energy(assemble_profile(p, lam, b), lam, b, sigma, Q=p.Q)


def eesti_terms(p: ProfileOrder1, lam: float, b: float) -> tuple[float, float]:
    """Residual of the leading energy expansion and its bound.

    Returns ``|8E - B(b^2/lam^2 + 2 beta1/(2-alpha) lam^(alpha-2) log lam
    - beta1' lam^(alpha-2))|`` and ``lam^(alpha-2) |log lam| (b^2 + lam^alpha |log lam|)``.
    """
    _, B, _ = moments(p.pair.gs, p.sigma)
    a = p.alpha
    L = math.log(lam)
    lead = B * (b**2 / lam**2 + 2 * p.beta1 / (2 - a) * lam ** (a - 2) * L
                - p.beta1_prime * lam ** (a - 2))
    resid = abs(8 * profile_energy(p, lam, b) - lead)
    bound = lam ** (a - 2) * abs(L) * (b**2 + lam**a * abs(L))
    return resid, bound
