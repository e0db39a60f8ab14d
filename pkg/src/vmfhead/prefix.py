"""Prefix synthesis: control points that make a head approximate a target.

The recipe is direct: partition the sphere into N equal-measure cells, put
one anchor at each cell center, and attach either the plain target value
(split-head mode) or the measure-weighted kernel coefficient (core-head
mode).  Error estimation, the near-constancy check of the softmax
denominator, and the any-length element-wise extension live here too.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass

import numpy as np

from .attention import (
    AttentionHeadParams,
    ControlPoints,
    PrefixTokens,
    assemble_prefix_tokens,
    build_universal_head,
    default_suppression,
)
from .bounds import SmoothnessSpec
from .errors import DimensionMismatch, DomainError, InstanceTooLarge
from .kernel import vmf_log_normalizer
from .sphere import Partition, equal_area_partition, uniform_sphere_sample

__all__ = [
    "TargetFunction",
    "ApproximationReport",
    "REPORT_COLUMNS",
    "make_target",
    "target_names",
    "synthesize_prefix",
    "synthesize_core_weights",
    "plan_for_accuracy",
    "synthesize_for_accuracy",
    "sup_error_estimate",
    "verify_denominator_constancy",
    "element_wise_extend",
    "report_csv_row",
]


@dataclass(frozen=True)
class TargetFunction:
    """Evaluable map S^m -> R^(m+1) with declared smoothness metadata.

    eval_batch takes an (n, m+1) array of unit vectors and returns an
    (n, m+1) array.  smoothness carries (L, C_H, C_R, f_sup); sup_estimated
    flags metadata that came from sampling rather than analysis.
    """

    m: int
    name: str
    eval_batch: object
    smoothness: SmoothnessSpec
    sup_estimated: bool = False

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        out = np.asarray(self.eval_batch(pts), dtype=np.float64)
        if out.shape != (pts.shape[0], self.m + 1):
            raise DimensionMismatch("target returned a wrongly shaped batch")
        return out

    def check_declared_sup(self, n_samples: int = 4096, seed: int = 0, slack: float = 0.05) -> bool:
        """Declared f_sup must dominate the empirically sampled max within slack."""
        pts = uniform_sphere_sample(self.m, n_samples, seed)
        sampled = float(np.max(np.abs(self(pts))))
        return self.smoothness.f_sup >= sampled * (1.0 - slack)


@dataclass(frozen=True)
class ApproximationReport:
    name: str
    m: int
    lam: float
    n_points: int
    sup_error: float
    mean_error: float
    samples: int
    seed: int
    wall_time_ms: float

    def __post_init__(self):
        if self.sup_error < 0 or self.mean_error < 0:
            raise DomainError("errors must be nonnegative")
        if self.samples < 1:
            raise DomainError("samples must be >= 1")


REPORT_COLUMNS = ["name", "m", "lambda", "N", "sup_error", "mean_error", "samples", "seed", "wall_time_ms"]


def report_csv_row(report: ApproximationReport, include_wall_time: bool = True) -> list[str]:
    row = [
        report.name,
        str(report.m),
        repr(report.lam),
        str(report.n_points),
        repr(report.sup_error),
        repr(report.mean_error),
        str(report.samples),
        str(report.seed),
    ]
    if include_wall_time:
        row.append(repr(report.wall_time_ms))
    return row


# ---------------------------------------------------------------------------
# Built-in target registry
# ---------------------------------------------------------------------------


def _constant_target(m: int, value: float = 0.5) -> TargetFunction:
    vec = np.full(m + 1, value)

    def ev(pts):
        return np.tile(vec, (pts.shape[0], 1))

    # A constant has zero modulus slope; L must stay positive, so declare a
    # negligible one.
    spec = SmoothnessSpec(L=1e-9, C_H=max(abs(value), 1e-9), C_R=1.0, f_sup=abs(value))
    return TargetFunction(m=m, name="constant", eval_batch=ev, smoothness=spec)


def _identity_target(m: int) -> TargetFunction:
    def ev(pts):
        return pts.copy()

    spec = SmoothnessSpec(L=1.0, C_H=1.0, C_R=1.0, f_sup=1.0)
    return TargetFunction(m=m, name="identity", eval_batch=ev, smoothness=spec)


def _linear_target(m: int, seed: int = 2024) -> TargetFunction:
    a = uniform_sphere_sample(m, 1, seed)[0] * 1.5

    def ev(pts):
        return np.outer(pts @ a, a)

    norm_a = float(np.linalg.norm(a))
    max_comp = float(np.max(np.abs(a)))
    spec = SmoothnessSpec(L=norm_a * max_comp, C_H=norm_a * max_comp, C_R=1.0, f_sup=norm_a * max_comp)
    return TargetFunction(m=m, name="linear", eval_batch=ev, smoothness=spec)


def _bump_target(m: int, sharpness: float = 6.0, seed: int = 77) -> TargetFunction:
    center = uniform_sphere_sample(m, 1, seed)[0]
    direction = np.zeros(m + 1)
    direction[0] = 1.0

    def ev(pts):
        vals = np.exp(sharpness * (np.clip(pts @ center, -1.0, 1.0) - 1.0))
        return np.outer(vals, direction)

    # max_t s e^{s(t-1)} sqrt(1-t^2) over [-1, 1], found on a dense grid once.
    ts = np.linspace(-1.0, 1.0, 200001)
    lip = float(np.max(sharpness * np.exp(sharpness * (ts - 1.0)) * np.sqrt(1.0 - ts * ts)))
    spec = SmoothnessSpec(L=lip, C_H=1.0, C_R=1.0, f_sup=1.0)
    return TargetFunction(m=m, name="bump", eval_batch=ev, smoothness=spec, sup_estimated=True)


def _coordinate_max_target(m: int) -> TargetFunction:
    direction = np.zeros(m + 1)
    direction[0] = 1.0

    def ev(pts):
        return np.outer(np.max(pts, axis=1), direction)

    spec = SmoothnessSpec(L=1.0, C_H=1.0, C_R=1.0, f_sup=1.0)
    return TargetFunction(m=m, name="coordinate-max", eval_batch=ev, smoothness=spec)


_REGISTRY = {
    "constant": _constant_target,
    "identity": _identity_target,
    "linear": _linear_target,
    "bump": _bump_target,
    "coordinate-max": _coordinate_max_target,
}


def target_names() -> list[str]:
    return sorted(_REGISTRY)


def make_target(name: str, m: int, **kwargs) -> TargetFunction:
    if name not in _REGISTRY:
        raise DomainError(f"unknown target {name!r}; known: {', '.join(target_names())}")
    return _REGISTRY[name](m, **kwargs)


# ---------------------------------------------------------------------------
# Synthesis
# ---------------------------------------------------------------------------


def synthesize_prefix(f: TargetFunction, n_points: int, lam: float, seed: int = 0) -> ControlPoints:
    """Split-head control points: anchors at equal-area cell centers,
    values = target at the anchors."""
    if n_points < 1:
        raise DomainError("n_points must be >= 1")
    if not lam > 0:
        raise DomainError("lam must be positive")
    part = equal_area_partition(f.m, n_points, seed)
    centers = part.centers()
    return ControlPoints(m=f.m, lam=float(lam), p_alpha=centers, p_beta=f(centers))


def synthesize_core_weights(f: TargetFunction, part: Partition, lam: float) -> ControlPoints:
    """Core-head control points: values are the measure-weighted kernel
    coefficients c_{m+1}(lam) * f(b_k) * w(V_k) / w_m (no softmax intended).
    """
    if part.m != f.m:
        raise DimensionMismatch("partition dimension does not match target")
    centers = part.centers()
    c = math.exp(vmf_log_normalizer(f.m, lam))
    weights = part.measures() / part.measures().sum()
    xi = c * weights[:, None] * f(centers)
    return ControlPoints(m=f.m, lam=float(lam), p_alpha=centers, p_beta=xi)


def plan_for_accuracy(f: TargetFunction, epsilon: float, strict: bool = True) -> dict:
    """Bound-driven synthesis plan: concentration and control-point count
    sufficient for a requested accuracy, per the normalized-head bound.

    Realistic plans are astronomically large (the count scales like
    eps^(-2(m+1)) with an e^(2(m+1)lambda) prefactor), so the count is
    reported as log10 and execution is gated separately.
    """
    from .bounds import normalized_head_parameters

    lam, nb = normalized_head_parameters(epsilon, f.smoothness, f.m, strict=strict)
    return {
        "target": f.name,
        "m": f.m,
        "epsilon": epsilon,
        "lambda": lam,
        "log10_n": nb.log10_n,
        "n": nb.n,
        "smoothness": {
            "L": f.smoothness.L,
            "C_H": f.smoothness.C_H,
            "C_R": f.smoothness.C_R,
            "f_sup": f.smoothness.f_sup,
        },
    }


def synthesize_for_accuracy(
    f: TargetFunction, epsilon: float, n_cap: int = 10**7, strict: bool = True
) -> ControlPoints:
    """Execute a bound-driven plan when its control-point count fits the
    cap; otherwise refuse (the plan itself is always available)."""
    plan = plan_for_accuracy(f, epsilon, strict=strict)
    if not (math.isfinite(plan["n"]) and plan["n"] <= n_cap):
        raise InstanceTooLarge(
            f"bound-driven count log10(N) = {plan['log10_n']:.1f} exceeds the cap {n_cap}"
        )
    return synthesize_prefix(f, int(math.ceil(plan["n"])), plan["lambda"])


def sup_error_estimate(f: TargetFunction, approx, n_samples: int, seed: int, workers: int = 1):
    """(sup, mean) of ||f(x) - approx(x)||_2 over uniform samples.

    approx takes an (n, m+1) batch and returns an (n, m+1) batch.  The
    sample stream is nested: a larger n_samples extends the same sequence,
    so the sup estimate can only grow with more samples.  Both values are
    lower bounds on the true sup norm.

    Evaluation always runs over a fixed chunking of the sample batch;
    workers > 1 maps the chunks onto a thread pool, and the merged result
    is identical for every worker count.
    """
    if n_samples < 1:
        raise DomainError("n_samples must be >= 1")
    pts = uniform_sphere_sample(f.m, n_samples, seed)
    n_chunks = min(16, n_samples)
    chunks = np.array_split(pts, n_chunks)

    def chunk_errors(chunk):
        return np.linalg.norm(f(chunk) - np.atleast_2d(approx(chunk)), axis=1)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(chunk_errors, chunks))
    else:
        parts = [chunk_errors(c) for c in chunks]
    errs = np.concatenate(parts)
    return float(errs.max()), float(errs.mean())


def verify_denominator_constancy(cp: ControlPoints, n_samples: int, seed: int) -> float:
    """sup over samples of |1 - (c_{m+1}(lam)/N) sum_k exp(lam <x, p_k>)|.

    The inner sum is evaluated in log domain; with anchors from an
    equal-measure partition the statistic shrinks as N grows.
    """
    if n_samples < 1:
        raise DomainError("n_samples must be >= 1")
    pts = uniform_sphere_sample(cp.m, n_samples, seed)
    logits = cp.lam * (pts @ cp.p_alpha.T)
    peak = logits.max(axis=1, keepdims=True)
    log_sum = peak.ravel() + np.log(np.exp(logits - peak).sum(axis=1))
    log_stat = vmf_log_normalizer(cp.m, cp.lam) - math.log(cp.n_points) + log_sum
    return float(np.max(np.abs(1.0 - np.exp(log_stat))))


def element_wise_extend(cp: ControlPoints, M: float | None = None):
    """(PrefixTokens, AttentionHeadParams) valid for inputs of any length.

    Uses the augmented universal head, whose input-input logits are a flat
    M, so per-position outputs match independent single-input evaluations
    up to the finite-M slack.
    """
    if M is None:
        M = default_suppression(cp.lam, cp.n_points, extra=40.0)
    params = build_universal_head(cp.m, M, augmented=True)
    prefix = assemble_prefix_tokens(cp, M, augmented=True)
    return prefix, params


def run_approximation(
    f: TargetFunction, n_points: int, lam: float, n_samples: int, seed: int, workers: int = 1
) -> tuple[ApproximationReport, ControlPoints]:
    """Synthesize, estimate errors, and wrap the result in a report."""
    from .attention import split_head_batch

    t0 = time.perf_counter()
    cp = synthesize_prefix(f, n_points, lam, seed)
    sup, mean = sup_error_estimate(f, lambda pts: split_head_batch(cp, pts), n_samples, seed, workers=workers)
    wall = (time.perf_counter() - t0) * 1000.0
    report = ApproximationReport(
        name=f.name,
        m=f.m,
        lam=float(lam),
        n_points=n_points,
        sup_error=sup,
        mean_error=mean,
        samples=n_samples,
        seed=seed,
        wall_time_ms=wall,
    )
    return report, cp


def reports_to_csv(reports, include_wall_time: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cols = REPORT_COLUMNS if include_wall_time else REPORT_COLUMNS[:-1]
    writer.writerow(cols)
    for r in reports:
        writer.writerow(report_csv_row(r, include_wall_time))
    return buf.getvalue()
