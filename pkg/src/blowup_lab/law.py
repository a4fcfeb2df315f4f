"""Scalar blow-up law: Lambert W, the J and F integrals and their inverses.

With ``kappa = 2 beta1 / (2 - alpha)`` and ``R(mu) = beta1' - kappa log mu``,

    J(lam)  = int_lam^lam0 dmu / (mu^{alpha/2+1} sqrt(R(mu)))
    F(lam)  = int_lam^lam0 dmu / (mu^{alpha/2+1} sqrt(R(mu) + C0 mu^{2-alpha}))
    lam_app = J^{-1},   b_app = lam^{alpha/2} sqrt(R(lam)),
    t_app(s) = -int_s^inf lam_app(mu)^2 dmu.

All integrals are taken in ``v = -log mu``, which turns the power growth at
small ``mu`` into a smooth exponential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

INV_E = math.exp(-1.0)
QUAD_TOL = 1e-12


class LawError(ValueError):
    pass


# ------------------------------------------------------------------ Lambert W

def _w_initial(branch: int, z: float) -> float:
    p2 = 2.0 * (math.e * z + 1.0)
    if p2 < 0.3:
        # branch-point series in p = +-sqrt(2(ez + 1))
        p = math.sqrt(max(p2, 0.0)) * (1.0 if branch == 0 else -1.0)
        return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
    if branch == 0:
        if z < 3.0:
            return math.log1p(z) * (1.0 - 0.3 * math.log1p(z) / (1.0 + math.log1p(z)))
        lz = math.log(z)
        return lz - math.log(lz)
    lz = math.log(-z)
    return lz - math.log(-lz)


def lambert_w(branch: int, z: float) -> float:
    """Real Lambert W on branch 0 (``w >= -1``) or -1 (``w <= -1``), by Halley's method."""
    z = float(z)
    if branch not in (0, -1):
        raise LawError("branch must be 0 or -1")
    if not math.isfinite(z) or z < -INV_E or (branch == -1 and z >= 0.0):
        raise LawError(f"outside branch domain: W_{branch}({z!r})")
    if z == 0.0:
        return 0.0
    if z == -INV_E:
        return -1.0
    w = _w_initial(branch, z)
    for _ in range(60):
        ew = math.exp(w)
        f = w * ew - z
        if w == -1.0:
            break
        dw = f / (ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0))
        w_new = w - dw
        # stay on the requested side of the branch point
        w_new = max(w_new, -1.0) if branch == 0 else min(w_new, -1.0)
        if abs(w_new - w) <= 4e-16 * max(1.0, abs(w_new)):
            w = w_new
            break
        w = w_new
    return w


def wm1_shift(u: float) -> float:
    """``delta = -W_{-1}(-exp(-u-1)) - 1`` for ``u >= 0``, without forming the exponential.

    ``delta`` is the positive root of ``delta - log(1 + delta) = u``.
    """
    if u < 0:
        raise LawError("outside branch domain: need u >= 0")
    if u == 0.0:
        return 0.0
    d = math.sqrt(2.0 * u) + 2.0 * u / 3.0 if u < 1.0 else u + math.log1p(u + math.log1p(u))
    for _ in range(60):
        g = d - math.log1p(d) - u
        g1 = d / (1.0 + d)
        g2 = 1.0 / (1.0 + d) ** 2
        step = g / (g1 - 0.5 * g * g2 / g1)
        d_new = max(d - step, 0.5 * d)
        if abs(d_new - d) <= 1e-16 * d:
            return d_new
        d = d_new
    return d


@dataclass(frozen=True)
class WPropReport:
    holds: bool
    lower_margin: float   # min of middle - ((1-eps)u - 2/eps)
    upper_margin: float   # min of u - middle
    worst_u_lower: float
    worst_u_upper: float


def wprop_check(u_samples, eps: float) -> WPropReport:
    """Two-sided bound ``(1-eps)u - 2/eps < -W_{-1}(-e^{-u-1}) - 1 - sqrt(2u) < u``."""
    if not (0.0 < eps < 1.0):
        raise LawError("eps must lie in (0, 1)")
    u = np.asarray(u_samples, dtype=float)
    if np.any(u <= 0):
        raise LawError("samples must be positive")
    mid = np.array([wm1_shift(x) for x in u]) - np.sqrt(2.0 * u)
    lo = mid - ((1.0 - eps) * u - 2.0 / eps)
    hi = u - mid
    return WPropReport(bool(np.all(lo > 0) and np.all(hi > 0)), float(lo.min()), float(hi.min()),
                       float(u[np.argmin(lo)]), float(u[np.argmin(hi)]))


# ------------------------------------------------------------------ law

@dataclass(frozen=True)
class LawParams:
    sigma: float
    alpha: float
    beta1: float
    beta2: float
    beta1_prime: float
    C0: float
    lambda0: float = 1e-2
    E0: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.alpha < 2.0):
            raise LawError("alpha must lie in (0, 2)")
        if not (0.0 < self.lambda0 < 1.0):
            raise LawError("lambda0 must lie in (0, 1)")
        lam0 = self.lambda0
        if self.radicand(lam0) + self.C0 * lam0 ** (2 - self.alpha) <= 0:
            raise LawError("law domain violated: radicand nonpositive at lambda0")

    @property
    def kappa(self) -> float:
        return 2.0 * self.beta1 / (2.0 - self.alpha)

    def radicand(self, lam: float) -> float:
        return self.beta1_prime - self.kappa * math.log(lam)


def law_params(betas, sigma: float, E0: float = 0.0, lambda0: float = 1e-2) -> LawParams:
    """Build from :class:`~blowup_lab.profile.Betas`; ``C0 = 8 E0 / || |y| Q ||^2``."""
    return LawParams(sigma, 2.0 - 2.0 * sigma, betas.beta1, betas.beta2, betas.beta1_prime,
                     8.0 * E0 / betas.B, lambda0, E0)


def _check_lambda(lam: float, p: LawParams) -> None:
    if not (0.0 < lam <= p.lambda0):
        raise LawError(f"lambda must lie in (0, lambda0={p.lambda0}]")


def _v_integral(fn, v0: float, v1: float) -> float:
    val, err = integrate.quad(fn, v0, v1, epsabs=0.0, epsrel=QUAD_TOL, limit=400)
    if err > 1e-9 * abs(val) + 1e-300:
        raise LawError("quadrature not converged")
    return val


def _law_integral(lam: float, p: LawParams, c0: float) -> float:
    _check_lambda(lam, p)
    a, k, b1p = p.alpha, p.kappa, p.beta1_prime
    v0, v1 = -math.log(p.lambda0), -math.log(lam)
    if v1 == v0:
        return 0.0
    # for C0 <= 0 the radicand grows with v, so lambda0 is the worst point;
    # otherwise the integrand check below catches interior sign changes
    if b1p + k * v0 + c0 * p.lambda0 ** (2 - a) <= 0:
        raise LawError("law domain violated: radicand nonpositive on [lambda, lambda0]")
    # factor out exp(a v1 / 2) so the integrand stays O(1)
    scale = math.exp(0.5 * a * v1)

    def f(v):
        rad = b1p + k * v + c0 * math.exp(-(2 - a) * v)
        if rad <= 0:
            raise LawError("law domain violated: radicand nonpositive on [lambda, lambda0]")
        return math.exp(0.5 * a * (v - v1)) / math.sqrt(rad)

    return scale * _v_integral(f, v0, v1)


def eval_J(lam: float, p: LawParams) -> float:
    return _law_integral(lam, p, 0.0)


def eval_F(lam: float, p: LawParams) -> float:
    return _law_integral(lam, p, p.C0)


def J_closed(lam: float, p: LawParams) -> float:
    """Closed form of J through Dawson's integral (reference value)."""
    a, k = p.alpha, p.kappa
    c = a / (2 * k)

    def term(x):
        return x ** (-a / 2) * special.dawsn(math.sqrt(c * p.radicand(x)))

    return math.sqrt(8.0 / (k * a)) * (term(lam) - term(p.lambda0))


def _invert(fn, s: float, p: LawParams) -> float:
    if not s > 0:
        raise LawError("s out of range: need s > 0")
    lo = math.log(p.lambda0)
    hi_s = 0.0
    x = lo
    # march down in log lambda until the target is bracketed
    while hi_s < s:
        x -= 2.0
        if x < -700.0:
            raise LawError("s out of range")
        hi_s = fn(math.exp(x), p)
    root = optimize.brentq(lambda y: fn(min(math.exp(y), p.lambda0), p) - s, x, lo,
                           xtol=1e-15, rtol=1e-15, maxiter=200)
    return min(math.exp(root), p.lambda0)


def invert_J(s: float, p: LawParams) -> float:
    """``lambda_app(s) = J^{-1}(s)``."""
    return _invert(eval_J, s, p)


def invert_F(s: float, p: LawParams) -> float:
    return _invert(eval_F, s, p)


def b_app(s: float, p: LawParams) -> float:
    lam = invert_J(s, p)
    return b_of_lambda(lam, p)


def b_of_lambda(lam: float, p: LawParams) -> float:
    rad = p.radicand(lam)
    if rad <= 0:
        raise LawError("law domain violated: radicand nonpositive")
    return lam ** (p.alpha / 2) * math.sqrt(rad)


def theta_law(lam: float, p: LawParams) -> float:
    return -p.beta1 * lam**p.alpha * math.log(lam) + p.beta2 * lam**p.alpha


def law_rhs(s: float, y, p: LawParams) -> list[float]:
    """``lam_s = -lam b``, ``b_s = -b^2 + theta(lam)``."""
    lam, b = y
    return [-lam * b, -b * b + theta_law(lam, p)]


def ode_residual(p: LawParams, s0: float, s1: float, n: int = 200) -> float:
    """Max residual of the law ODE along the closed form, by centred differences."""
    ss = np.linspace(s0, s1, n)
    h = 1e-4 * (s1 - s0) / n + 1e-6 * s0
    worst = 0.0
    for s in ss:
        lm, lp = invert_J(s - h, p), invert_J(s + h, p)
        bm, bp = b_of_lambda(lm, p), b_of_lambda(lp, p)
        lam = invert_J(s, p)
        b = b_of_lambda(lam, p)
        r1 = (math.log(lp) - math.log(lm)) / (2 * h) + b
        r2 = (bp - bm) / (2 * h) + b * b - theta_law(lam, p)
        worst = max(worst, abs(r1) / b, abs(r2) / (b * b))
    return worst


# ------------------------------------------------------------------ initial data

@dataclass(frozen=True)
class InitialData:
    lambda1: float
    b1: float
    b1_leading: float
    energy: float | None


def choose_initial(s1: float, p: LawParams, profile=None, tol: float = 1e-8) -> InitialData:
    """``lambda1 = F^{-1}(s1)`` and ``b1`` from the energy relation.

    The leading-order ``b1`` is corrected by a scalar root-find so that the
    profile energy equals ``E0`` when a first-order profile is supplied.
    """
    lam = invert_F(s1, p)
    rad = p.radicand(lam) + p.C0 * lam ** (2 - p.alpha)
    if rad <= 0:
        raise LawError("law domain violated at lambda1")
    b_lead = lam ** (p.alpha / 2) * math.sqrt(rad)
    if profile is None:
        return InitialData(lam, b_lead, b_lead, None)
    from .profile import profile_energy

    def gap(b):
        return profile_energy(profile, lam, b, p.sigma) - p.E0

    lo, hi = 0.0, 2.0 * b_lead
    g_lo, g_hi = gap(lo), gap(hi)
    if not (g_lo < 0 < g_hi):
        raise LawError("energy matching failed: root not bracketed")
    b = optimize.brentq(gap, lo, hi, xtol=1e-16, rtol=1e-15, maxiter=200)
    e = gap(b) + p.E0
    if abs(e - p.E0) > tol:
        raise LawError("energy matching failed: tolerance not reached")
    return InitialData(lam, b, b_lead, e)


# ------------------------------------------------------------------ time

def t_of_lambda(lam: float, p: LawParams) -> float:
    """``-int_0^lam mu^{1-alpha/2} / sqrt(R(mu)) dmu``; equals ``t_app`` at ``lam = lam_app(s)``."""
    _check_lambda(lam, p)
    a, k, b1p = p.alpha, p.kappa, p.beta1_prime
    c = (4.0 - a) / 2.0
    v1 = -math.log(lam)

    def f(v):
        return math.exp(-c * (v - v1)) / math.sqrt(b1p + k * v)

    val, err = integrate.quad(f, v1, math.inf, epsabs=0.0, epsrel=QUAD_TOL, limit=400)
    if not math.isfinite(val) or err > 1e-9 * abs(val):
        raise LawError("tail quadrature not converged")
    return -math.exp(-c * v1) * val


def t_closed(lam: float, p: LawParams) -> float:
    """Closed form of :func:`t_of_lambda` through the scaled complementary error function."""
    a, k = p.alpha, p.kappa
    c = (4.0 - a) / 2.0
    y = math.sqrt(c / k * p.radicand(lam))
    return -math.sqrt(math.pi / (c * k)) * lam**c * special.erfcx(y)


def t_app(s: float, p: LawParams) -> float:
    return t_of_lambda(invert_J(s, p), p)


def s_of_t(t: float, p: LawParams) -> float:
    """Inverse of :func:`t_app` for ``t`` in ``(t_app(0+), 0)``."""
    if not t < 0:
        raise LawError("t out of range: need t < 0")
    t0 = t_of_lambda(p.lambda0, p)
    if t <= t0:
        raise LawError("t out of range: earlier than t_app at lambda0")
    y = optimize.brentq(lambda x: t_of_lambda(min(math.exp(x), p.lambda0), p) - t, -700.0,
                        math.log(p.lambda0), xtol=1e-15, rtol=1e-15, maxiter=300)
    return eval_J(min(math.exp(y), p.lambda0), p)


def rate_exponent(sigma: float) -> tuple[float, float]:
    """Leading exponents ``(1/(1+sigma), 1/(2+2sigma))`` of ``|t|`` and ``|log|t||``."""
    return 1.0 / (1.0 + sigma), 1.0 / (2.0 + 2.0 * sigma)


__all__ = [
    "LawError", "LawParams", "InitialData", "WPropReport", "lambert_w", "wm1_shift",
    "wprop_check", "law_params", "eval_J", "eval_F", "J_closed", "invert_J", "invert_F",
    "b_app", "b_of_lambda", "theta_law", "law_rhs", "ode_residual", "choose_initial",
    "t_app", "t_of_lambda", "t_closed", "s_of_t", "rate_exponent",
]
