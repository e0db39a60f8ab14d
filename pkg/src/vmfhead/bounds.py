"""Explicit accuracy-to-complexity bounds for the kernel-head construction.

Two quantities drive everything: the concentration needed so that kernel
smoothing loses at most a prescribed sup-norm accuracy, and the number of
control points needed so that the Riemann-sum discretization of the
convolution loses at most the remaining budget.  Both are evaluated in log
domain because realistic values overflow doubles by enormous margins; all
outputs report log10 alongside the (possibly infinite) linear value.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .errors import DomainError, OverflowWarning, PermissiveModeWarning
from .kernel import vmf_log_normalizer
from .specialfn import reg_inc_beta

__all__ = [
    "SmoothnessSpec",
    "PrefixLengthBound",
    "lambda_for_accuracy",
    "prefix_length_bound",
    "phi",
    "covering_bounds",
    "normalized_head_parameters",
]

_LN10 = math.log(10.0)


@dataclass(frozen=True)
class SmoothnessSpec:
    """Smoothness data of a target: geodesic Lipschitz constant, harmonic
    component bound, polynomial-approximation constant, and sup norm.

    The harmonic and polynomial constants are not computable from a target
    in general; they are inputs, defaulted to heuristic placeholders by the
    callers that own concrete targets.
    """

    L: float
    C_H: float
    C_R: float
    f_sup: float

    def __post_init__(self):
        if not (self.L > 0 and self.C_H > 0 and self.C_R > 0):
            raise DomainError("L, C_H, C_R must be strictly positive")
        if not self.f_sup >= 0:
            raise DomainError("f_sup must be nonnegative")


@dataclass(frozen=True)
class PrefixLengthBound:
    """A control-point count that may exceed the float range; log10 is exact."""

    n: float
    log10_n: float


def _check_dimension(m: int, strict: bool) -> None:
    if m < 2:
        raise DomainError(f"bounds require m >= 2, got {m}")
    if m < 8:
        if strict:
            raise DomainError(f"strict mode requires m >= 8 (covering constants), got {m}")
        warnings.warn(
            f"m = {m} < 8 is outside the guaranteed range of the covering constants",
            PermissiveModeWarning,
            stacklevel=3,
        )


def lambda_for_accuracy(sigma: float, spec: SmoothnessSpec, m: int, strict: bool = True) -> float:
    """Concentration needed so kernel smoothing costs at most sigma in sup norm.

    With beta = sigma^2 / (8 L C_H C_R + 2 sigma C_H) and
    e1 = sigma / (4 L C_R + sigma):

        Lambda = (8 L C_R + (m+1) sigma) (1-beta)^e1 / (sigma (1 - (1-beta)^(2 e1)))

    evaluated with log1p/expm1 so the small-sigma regime (where the value
    behaves like 128 L^3 C_H C_R^3 / sigma^4) stays accurate.  Returns +inf
    with an OverflowWarning when the value exceeds the float range.
    """
    if not sigma > 0:
        raise DomainError(f"lambda_for_accuracy requires sigma > 0, got {sigma}")
    _check_dimension(m, strict)
    L, C_H, C_R = spec.L, spec.C_H, spec.C_R
    beta = sigma * sigma / (8.0 * L * C_H * C_R + 2.0 * sigma * C_H)
    if beta >= 1.0:
        # Extremely coarse accuracy: any positive concentration works; the
        # formula degenerates, so report the trivial bound.
        return 1.0
    e1 = sigma / (4.0 * L * C_R + sigma)
    log_one_minus_beta = math.log1p(-beta)
    log_numer = math.log(8.0 * L * C_R + m * sigma + sigma) + e1 * log_one_minus_beta
    denom = -math.expm1(2.0 * e1 * log_one_minus_beta)
    if denom <= 0.0:
        warnings.warn("concentration bound overflowed to +inf", OverflowWarning, stacklevel=2)
        return math.inf
    log_lambda = log_numer - math.log(sigma) - math.log(denom)
    if log_lambda > 709.0:
        warnings.warn("concentration bound overflowed to +inf", OverflowWarning, stacklevel=2)
        return math.inf
    return math.exp(log_lambda)


def _phi_formula(m: int) -> float:
    mp1 = m + 1.0
    return math.e * (mp1 * math.log(mp1) + mp1 * math.log(math.log(mp1)) + 5.0 * mp1)


def phi(m: int) -> float:
    """Dimension factor e((m+1)ln(m+1) + (m+1)ln ln(m+1) + 5(m+1)).

    The covering estimate behind it holds for m >= 8, which is enforced.
    """
    if m < 8:
        raise DomainError(f"phi requires m >= 8, got {m}")
    return _phi_formula(m)


def prefix_length_bound(
    lam: float, epsilon: float, spec: SmoothnessSpec, m: int, strict: bool = True
) -> PrefixLengthBound:
    """Control-point count sufficient for the Riemann-sum half of the error.

    N = Phi(m) * (3 pi (L + lambda f_sup) c_{m+1}(lambda) e^lambda / eps)^(2(m+1)),
    computed in log domain; the linear value is +inf whenever it exceeds the
    float range, and log10 N is always finite.
    """
    if not epsilon > 0:
        raise DomainError(f"prefix_length_bound requires epsilon > 0, got {epsilon}")
    if not lam > 0:
        raise DomainError(f"prefix_length_bound requires lambda > 0, got {lam}")
    _check_dimension(m, strict)
    log_c = vmf_log_normalizer(m, lam)
    ln_n = math.log(_phi_formula(m)) + 2.0 * (m + 1) * (
        math.log(3.0 * math.pi)
        + math.log(spec.L + lam * spec.f_sup)
        + log_c
        + lam
        - math.log(epsilon)
    )
    n = math.exp(ln_n) if ln_n <= 709.0 else math.inf
    return PrefixLengthBound(n=n, log10_n=ln_n / _LN10)


def covering_bounds(m: int, delta: float) -> tuple[float, float]:
    """(lower, upper) bounds on the cap covering number of S^m at depth delta.

    lower = 2 / I_{delta(2-delta)}(m/2, 1/2) (area comparison), and
    upper = Phi(m) / (delta(2-delta))^((m+1)/2) (ball-covering transfer).
    """
    if m < 8:
        raise DomainError(f"covering_bounds requires m >= 8, got {m}")
    if not (0.0 < delta < 1.0):
        raise DomainError(f"covering_bounds requires delta in (0, 1), got {delta}")
    s2 = delta * (2.0 - delta)
    lower = 2.0 / reg_inc_beta(s2, m / 2.0, 0.5)
    upper = phi(m) / s2 ** ((m + 1) / 2.0)
    return lower, upper


def normalized_head_parameters(
    epsilon: float, spec: SmoothnessSpec, m: int, strict: bool = True
) -> tuple[float, PrefixLengthBound]:
    """Concentration and prefix length for the normalized (softmax) head.

    The normalization steals accuracy, so the concentration is taken at the
    shrunk argument 2 eps L / (2L + f_sup); the length bound carries an
    extra sqrt(m+1) factor inside its power because the output error is
    measured in the Euclidean norm over m+1 components.
    """
    if not (0.0 < epsilon < 2.0 * spec.f_sup):
        raise DomainError("normalized_head_parameters requires 0 < epsilon < 2 * f_sup")
    _check_dimension(m, strict)
    sigma = 2.0 * epsilon * spec.L / (2.0 * spec.L + spec.f_sup)
    lam = lambda_for_accuracy(sigma, spec, m, strict=strict)
    if not math.isfinite(lam):
        return lam, PrefixLengthBound(n=math.inf, log10_n=math.inf)
    log_c = vmf_log_normalizer(m, lam)
    ln_n = math.log(_phi_formula(m)) + 2.0 * (m + 1) * (
        math.log(3.0 * math.pi)
        + 0.5 * math.log(m + 1.0)
        + math.log(spec.L + lam * spec.f_sup)
        + log_c
        + lam
        - math.log(epsilon)
    )
    n = math.exp(ln_n) if ln_n <= 709.0 else math.inf
    return lam, PrefixLengthBound(n=n, log10_n=ln_n / _LN10)
