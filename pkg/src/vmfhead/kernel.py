"""Exponential (von Mises-Fisher type) kernels on the sphere.

K(t) = c * exp(lambda * t) on t in [-1, 1], normalized so its weighted
1-D integral against (1 - t^2)^((m-2)/2) equals w_m / w_{m-1}; then the
kernel has unit L1 norm on S^m and acts as an approximate identity under
spherical convolution as lambda grows.  Zonal convolution has the degree-k
harmonics as eigenfunctions, with eigenvalues equal to ratios of modified
Bessel functions of consecutive orders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalFailure
from .sphere import as_unit_vector, surface_area, uniform_sphere_sample
from .specialfn import bessel_ratio, log_bessel_i

__all__ = [
    "VmfKernel",
    "vmf_log_normalizer",
    "kernel_norm",
    "kernel_eigenvalue",
    "kernel_eval",
    "kernel_log_eval",
    "convolve_vmf",
]


def vmf_log_normalizer(m: int, lam: float) -> float:
    """ln of the normalizing constant c_{m+1}(lambda).

    c = w_m * lambda^((m+1)/2 - 1) / ((2 pi)^((m+1)/2) * I_{(m+1)/2-1}(lambda)),
    computed fully in log domain so arbitrarily large lambda is safe.
    """
    if m < 1:
        raise DomainError(f"vmf_log_normalizer requires m >= 1, got {m}")
    lam = float(lam)
    if not lam > 0:
        raise DomainError(f"vmf_log_normalizer requires lambda > 0, got {lam}")
    h = (m + 1) / 2.0
    return (
        math.log(surface_area(m))
        + (h - 1.0) * math.log(lam)
        - h * math.log(2.0 * math.pi)
        - log_bessel_i(h - 1.0, lam)
    )


@dataclass(frozen=True)
class VmfKernel:
    """Concentration-lambda kernel on S^m with its precomputed log normalizer."""

    m: int
    lam: float
    log_normalizer: float

    @staticmethod
    def create(m: int, lam: float) -> "VmfKernel":
        return VmfKernel(m=m, lam=float(lam), log_normalizer=vmf_log_normalizer(m, lam))

    def __post_init__(self):
        if self.lam <= 0:
            raise DomainError("kernel concentration must be positive")
        expected = vmf_log_normalizer(self.m, self.lam)
        if abs(self.log_normalizer - expected) > 1e-10 * max(1.0, abs(expected)):
            raise DomainError("log_normalizer inconsistent with (m, lambda)")


def kernel_log_eval(kern: VmfKernel, t) -> np.ndarray | float:
    """ln K(t) = ln c + lambda * t for t in [-1, 1]."""
    tt = np.asarray(t, dtype=np.float64)
    if np.any(tt < -1.0) or np.any(tt > 1.0):
        raise DomainError("kernel argument must lie in [-1, 1]")
    out = kern.log_normalizer + kern.lam * tt
    return float(out) if np.isscalar(t) or tt.ndim == 0 else out


def kernel_eval(kern: VmfKernel, t) -> np.ndarray | float:
    """K(t) in linear scale; saturates to inf past the exp range (use the
    log variant for lambda beyond ~700)."""
    log_val = kernel_log_eval(kern, t)
    return np.exp(log_val) if isinstance(log_val, np.ndarray) else math.exp(min(log_val, 709.0)) if log_val < 709.0 else math.inf


def kernel_norm(m: int, lam: float, rtol: float = 1e-9) -> float:
    """Weighted L1 norm of the kernel on S^m, which equals 1 for every
    lambda > 0 and m > 1.

    Gauss-Legendre quadrature of (w_{m-1}/w_m) * int K(t) (1-t^2)^((m-2)/2) dt
    evaluated in log domain, with node doubling until two refinements agree.
    """
    if m < 2:
        raise DomainError(f"kernel_norm requires m >= 2, got {m}")
    log_c = vmf_log_normalizer(m, lam)
    log_ratio = math.log(surface_area(m - 1)) - math.log(surface_area(m))
    prev = None
    nodes = 200
    while nodes <= 120_000:
        t, u = np.polynomial.legendre.leggauss(nodes)
        with np.errstate(divide="ignore"):
            log_f = np.log(u) + log_c + lam * t + 0.5 * (m - 2) * np.log1p(-t * t)
        peak = np.max(log_f)
        val = math.exp(peak + math.log(np.sum(np.exp(log_f - peak))) + log_ratio)
        if prev is not None and abs(val - prev) <= rtol * abs(val):
            return val
        prev = val
        nodes *= 2
    raise NumericalFailure("kernel norm quadrature did not converge")


def kernel_eigenvalue(m: int, k: int, lam: float) -> float:
    """Convolution eigenvalue on degree-k spherical harmonics.

    Equals I_{(m-1)/2 + k}(lambda) / I_{(m-1)/2}(lambda), evaluated as a
    telescoping product of k consecutive Bessel ratios; always in (0, 1],
    exactly 1 at k = 0.
    """
    if m < 2:
        raise DomainError(f"kernel_eigenvalue requires m >= 2, got {m}")
    if k < 0:
        raise DomainError(f"kernel_eigenvalue requires k >= 0, got {k}")
    lam = float(lam)
    if not lam > 0:
        raise DomainError(f"kernel_eigenvalue requires lambda > 0, got {lam}")
    base = (m - 1) / 2.0
    out = 1.0
    for j in range(k):
        out *= bessel_ratio(base + j, lam)
    return out


def convolve_vmf(f, kern: VmfKernel, x, n_samples: int, seed: int):
    """Monte-Carlo estimate of the spherical convolution (K * f)(x).

    (K*f)(x) = (1/w_m) int K(<x,y>) f(y) dw_m(y) = E_{y~U(S^m)}[K(<x,y>) f(y)],
    so a uniform sample average is unbiased.  Returns (estimate, standard
    error), both per output component.
    """
    if n_samples < 100:
        raise DomainError("convolve_vmf requires n_samples >= 100")
    xv = as_unit_vector(x)
    if xv.size != kern.m + 1:
        raise DomainError("point dimension does not match kernel dimension")
    ys = uniform_sphere_sample(kern.m, n_samples, seed)
    weights = np.exp(kernel_log_eval(kern, np.clip(ys @ xv, -1.0, 1.0)))
    fy = np.atleast_2d(np.asarray(f(ys), dtype=np.float64))
    if fy.shape[0] != n_samples:
        fy = fy.T
    vals = weights[:, None] * fy
    est = vals.mean(axis=0)
    sem = vals.std(axis=0, ddof=1) / math.sqrt(n_samples)
    return est, sem
