"""Self-contained special functions for spherical kernel computations.

Everything here is scalar, pure, and log-domain friendly: log-Gamma,
the regularized incomplete beta function, Gegenbauer polynomials, and
modified Bessel functions of the first kind at general nonnegative
(often half-integer) order.  Bessel values are only ever exposed as
logarithms or as ratios of consecutive orders, because the concentration
parameters used elsewhere in the package push I_nu(x) far beyond the
range of IEEE doubles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "BesselOrder",
    "log_gamma",
    "reg_inc_beta",
    "gegenbauer",
    "log_bessel_i",
    "bessel_ratio",
]


@dataclass(frozen=True)
class BesselOrder:
    """Order of a modified Bessel function; nonnegative and finite."""

    nu: float

    def __post_init__(self):
        if not math.isfinite(self.nu) or self.nu < 0:
            raise DomainError(f"Bessel order must be finite and >= 0, got {self.nu}")


def _order(nu) -> float:
    if isinstance(nu, BesselOrder):
        return nu.nu
    nu = float(nu)
    if not math.isfinite(nu) or nu < 0:
        raise DomainError(f"Bessel order must be finite and >= 0, got {nu}")
    return nu


def log_gamma(x: float) -> float:
    """Natural log of Gamma(x) for x > 0.

    Thin domain-checked wrapper over the C library's lgamma, which is
    accurate to well below the 1e-12 absolute error needed here.
    """
    x = float(x)
    if not x > 0:
        raise DomainError(f"log_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def _betacf(x: float, a: float, b: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz's method)."""
    tiny = 1e-300
    max_iter = 500
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise DomainError("incomplete beta continued fraction did not converge")


def reg_inc_beta(x: float, a: float, b: float) -> float:
    """Regularized incomplete beta function I_x(a, b).

    Evaluated via the standard continued fraction, switching to the
    symmetry I_x(a,b) = 1 - I_{1-x}(b,a) where the fraction converges
    faster.  Absolute error is well below 1e-10 on the domain.
    """
    x = float(x)
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"reg_inc_beta requires x in [0, 1], got {x}")
    if not (a > 0 and b > 0):
        raise DomainError(f"reg_inc_beta requires a, b > 0, got a={a}, b={b}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = (
        log_gamma(a + b)
        - log_gamma(a)
        - log_gamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(x, a, b) / a
    return 1.0 - front * _betacf(1.0 - x, b, a) / b


def gegenbauer(k: int, alpha: float, t: float) -> float:
    """Gegenbauer polynomial Q_k^alpha(t) by the three-term recurrence.

    Q_0 = 1, Q_1 = 2*alpha*t, and
    k Q_k = 2 t (k + alpha - 1) Q_{k-1} - (k + 2 alpha - 2) Q_{k-2}.
    """
    if k < 0:
        raise DomainError(f"gegenbauer requires k >= 0, got {k}")
    if not alpha > 0:
        raise DomainError(f"gegenbauer requires alpha > 0, got {alpha}")
    if not (-1.0 <= t <= 1.0):
        raise DomainError(f"gegenbauer requires t in [-1, 1], got {t}")
    if k == 0:
        return 1.0
    q_prev = 1.0
    q = 2.0 * alpha * t
    for n in range(2, k + 1):
        q_prev, q = q, (2.0 * t * (n + alpha - 1.0) * q - (n + 2.0 * alpha - 2.0) * q_prev) / n
    return q


def _log_bessel_i_series(nu: float, lam: float) -> float:
    """Ascending series for ln I_nu, summed with log-sum-exp.

    Every term of the series is positive, so the log-domain sum is
    unconditionally stable no matter how large the argument is; only
    the term count grows (like lam/2 plus a dispersion margin).
    """
    half = lam / 2.0
    n_terms = int(half + 14.0 * math.sqrt(half + 1.0) + 30.0)
    while True:
        k = np.arange(n_terms + 1, dtype=np.float64)
        log_terms = (nu + 2.0 * k) * math.log(half) - _lgamma_vec(k + 1.0) - _lgamma_vec(nu + k + 1.0)
        peak = float(np.max(log_terms))
        # The tail decays super-geometrically past the peak; widen if the
        # last retained term is not yet negligible.
        if log_terms[-1] - peak < -45.0 or n_terms > 20_000_000:
            return peak + math.log(float(np.sum(np.exp(log_terms - peak))))
        n_terms *= 2


def _lgamma_vec(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    flat = x.ravel()
    res = out.ravel()
    for i in range(flat.size):
        res[i] = math.lgamma(flat[i])
    return out


def _log_bessel_i_asymptotic(nu: float, lam: float) -> float:
    """Large-argument expansion ln I_nu(lam) ~ lam - ln(2 pi lam)/2 + ln S.

    S is the Hankel correction series in inverse powers of lam; summation
    stops at the smallest term, which for lam >> nu^2 is far below 1e-12.
    """
    mu = 4.0 * nu * nu
    total = 1.0
    term = 1.0
    prev_abs = math.inf
    for k in range(1, 40):
        term *= -(mu - (2.0 * k - 1.0) ** 2) / (8.0 * k * lam)
        if abs(term) >= prev_abs:
            break
        total += term
        prev_abs = abs(term)
        if abs(term) < 1e-18 * abs(total):
            break
    return lam - 0.5 * math.log(2.0 * math.pi * lam) + math.log(total)


def log_bessel_i(nu, lam: float) -> float:
    """ln I_nu(lam) for lam > 0, stable over lam in [1e-3, 1e5] and beyond.

    Uses the all-positive ascending series with log-sum-exp for small and
    moderate arguments and the large-argument expansion once lam dominates
    nu^2, so the value never overflows.
    """
    nu = _order(nu)
    lam = float(lam)
    if not lam > 0:
        raise DomainError(f"log_bessel_i requires lambda > 0, got {lam}")
    if lam >= 4000.0 and lam >= 4.0 * nu * nu:
        return _log_bessel_i_asymptotic(nu, lam)
    return _log_bessel_i_series(nu, lam)


def bessel_ratio(nu, lam: float) -> float:
    """Ratio I_{nu+1}(lam) / I_nu(lam), strictly inside (0, 1).

    Computed by backward recurrence on r_v = I_{v+1}/I_v, seeded at a depth
    that grows with lam by the classical ratio lower bound
    lam / (v+1 + sqrt(lam^2 + (v+1)^2)) (forward recurrence is unstable
    for I).  Relative error is at the 1e-13 level.
    """
    nu = _order(nu)
    lam = float(lam)
    if not lam > 0:
        raise DomainError(f"bessel_ratio requires lambda > 0, got {lam}")
    depth = int(40 + 1.3 * lam + 4.0 * math.sqrt(lam))
    v = nu + depth
    r = lam / ((v + 1.0) + math.hypot(lam, v + 1.0))
    for i in range(depth, 0, -1):
        r = 1.0 / (2.0 * (nu + i) / lam + r)
    # Mathematically r is in (0, 1); clamp defends against rounding at
    # extreme arguments only.
    return min(max(r, 5e-324), 1.0 - 1e-16)
