"""Fits of the concentration rate ``lam(t)`` near the blow-up time.

Model "A": ``log lam = c + e log(T - t) + e2 log log(1/(T - t))`` with
``e2 = 1/(2 + 2 sigma)`` held fixed.  Model "B": pure power, ``e2 = 0``.
``T`` is either fixed or fitted by a bounded scalar search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .law import rate_exponent


class RateError(ValueError):
    pass


@dataclass(frozen=True)
class RateFit:
    model: str
    exponent: float
    log_exponent: float
    T: float
    prefactor: float
    decades: float        # log10 of the lambda range inside the window
    rms: float            # rms residual in log lam
    drift: float          # exponent on the late half minus the early half

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _design(t, T, e2):
    tau = T - t
    if np.any(tau <= 0) or (e2 and np.any(tau >= 1)):
        return None
    y_shift = e2 * np.log(np.log(1 / tau)) if e2 else 0.0
    return np.log(tau), y_shift


def _linear(t, y, T, e2):
    d = _design(t, T, e2)
    if d is None:
        return None
    x, shift = d
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y - shift, rcond=None)
    res = y - shift - A @ coef
    return coef, float(np.sqrt(np.mean(res**2)))


def fit_rate(t, lam, sigma: float, model: str = "A", T: float | None = 0.0,
             min_decades: float = 1.0) -> RateFit:
    """Fit ``lam(t)``.  ``T=None`` fits the blow-up time as well."""
    t = np.asarray(t, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if model not in ("A", "B"):
        raise ValueError("model must be 'A' or 'B'")
    if t.shape != lam.shape or t.size < 4:
        raise ValueError("need at least 4 matching samples")
    if np.any(lam <= 0) or not np.all(np.diff(t) > 0):
        raise ValueError("need positive lambda and increasing t")
    decades = float(math.log10(lam.max() / lam.min()))
    if decades < min_decades:
        raise RateError("insufficient concentration")
    e2 = rate_exponent(sigma)[1] if model == "A" else 0.0
    y = np.log(lam)
    if T is None:
        t_last = t[-1]
        span = t[-1] - t[0]

        def cost(z):
            r = _linear(t, y, t_last + math.exp(z), e2)
            return math.inf if r is None else r[1]

        zs = np.linspace(math.log(span) - 25, math.log(span) + 2, 109)
        k = int(np.argmin([cost(z) for z in zs]))
        lo, hi = zs[max(k - 1, 0)], zs[min(k + 1, zs.size - 1)]
        z = minimize_scalar(cost, bounds=(lo, hi), method="bounded",
                            options={"xatol": 1e-10}).x
        T = t_last + math.exp(z)
    fit = _linear(t, y, T, e2)
    if fit is None:
        raise RateError("blow-up time must exceed every sample time")
    (e, c), rms = fit
    half = t.size // 2
    early = _linear(t[:half + 1], y[:half + 1], T, e2)[0][0]
    late = _linear(t[half:], y[half:], T, e2)[0][0]
    return RateFit(model, float(e), float(e2), float(T), float(math.exp(c)), decades,
                   rms, float(late - early))


__all__ = ["RateFit", "RateError", "fit_rate"]
