"""Geometry of the unit hypersphere S^m in R^(m+1).

Points, geodesics, cap areas, equal-measure zonal partitions, uniform
sampling, and the stereographic maps between the sphere and flat space.
The zonal partition follows the recursive cap/collar scheme: polar caps of
the target cell area, collars whose colatitude boundaries are refit so each
collar holds an integer number of exactly equal-measure cells, and a
recursive partition of S^(m-1) inside each collar.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInput, DimensionMismatch, DomainError, PoleSingularity
from .specialfn import log_gamma, reg_inc_beta

__all__ = [
    "SpherePoint",
    "PartitionCell",
    "Partition",
    "project_to_sphere",
    "geodesic_distance",
    "surface_area",
    "cap_area",
    "cap_colatitude",
    "equal_area_partition",
    "uniform_sphere_sample",
    "stereographic",
    "stereographic_inverse",
]

_UNIT_TOL = 1e-12


@dataclass(frozen=True)
class SpherePoint:
    """A unit vector in R^(m+1); the domain element of every target function."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=np.float64)
        if c.ndim != 1 or c.size < 2:
            raise DimensionMismatch("a sphere point needs at least 2 coordinates")
        if abs(np.linalg.norm(c) - 1.0) > _UNIT_TOL:
            raise DegenerateInput(f"not a unit vector: |v| = {np.linalg.norm(c)!r}")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def m(self) -> int:
        return self.coords.size - 1


def as_unit_vector(x) -> np.ndarray:
    """Coerce a SpherePoint or array-like to a validated unit vector."""
    if isinstance(x, SpherePoint):
        return x.coords
    c = np.asarray(x, dtype=np.float64)
    if c.ndim != 1 or c.size < 2:
        raise DimensionMismatch("expected a single vector of length >= 2")
    if abs(np.linalg.norm(c) - 1.0) > _UNIT_TOL:
        raise DegenerateInput("vector does not have unit norm")
    return c


def project_to_sphere(v) -> SpherePoint:
    """Normalize a nonzero vector onto S^m."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size < 2:
        raise DimensionMismatch("expected a vector of length >= 2")
    n = np.linalg.norm(v)
    if n == 0.0 or not np.isfinite(n):
        raise DegenerateInput("cannot project a zero or non-finite vector")
    return SpherePoint(v / n)


def geodesic_distance(x, y) -> float:
    """Great-circle distance arccos(<x, y>) in [0, pi].

    The inner product is clamped to [-1, 1] before arccos as a
    floating-point guard.
    """
    xv = as_unit_vector(x)
    yv = as_unit_vector(y)
    if xv.size != yv.size:
        raise DimensionMismatch(f"dimension mismatch: {xv.size} vs {yv.size}")
    return float(math.acos(min(1.0, max(-1.0, float(np.dot(xv, yv))))))


def surface_area(m: int) -> float:
    """Total surface measure of S^m: 2 pi^((m+1)/2) / Gamma((m+1)/2)."""
    if m < 1:
        raise DomainError(f"surface_area requires m >= 1, got {m}")
    h = (m + 1) / 2.0
    return math.exp(math.log(2.0) + h * math.log(math.pi) - log_gamma(h))


def cap_area(m: int, delta: float) -> float:
    """Area of the cap {y : <y, pole> >= 1 - delta} for delta in (0, 1].

    With colatitude phi = arccos(1 - delta) the area is
    w_m/2 * I_{sin^2 phi}(m/2, 1/2), and sin^2 phi = delta(2 - delta).
    """
    if m < 1:
        raise DomainError(f"cap_area requires m >= 1, got {m}")
    if not (0.0 < delta <= 1.0):
        raise DomainError(f"cap_area requires delta in (0, 1], got {delta}")
    s2 = delta * (2.0 - delta)
    return 0.5 * surface_area(m) * reg_inc_beta(min(s2, 1.0), m / 2.0, 0.5)


def _colat_area(m: int, theta: float) -> float:
    """Area of the colatitude cap [0, theta] about the pole, theta in [0, pi]."""
    if theta <= 0.0:
        return 0.0
    if theta >= math.pi:
        return surface_area(m)
    w = surface_area(m)
    s2 = math.sin(theta) ** 2
    half = 0.5 * w * reg_inc_beta(min(s2, 1.0), m / 2.0, 0.5)
    return half if theta <= math.pi / 2.0 else w - half


def cap_colatitude(m: int, area: float) -> float:
    """Inverse of the colatitude-cap area, by bisection on [0, pi]."""
    w = surface_area(m)
    if not (0.0 <= area <= w * (1.0 + 1e-12)):
        raise DomainError(f"cap area {area} outside [0, {w}]")
    lo, hi = 0.0, math.pi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _colat_area(m, mid) < area:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Equal-area zonal partition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PartitionCell:
    center: SpherePoint
    measure: float
    radius_bound: float


@dataclass(frozen=True)
class Partition:
    """Decomposition of S^m into cells with centers, measures, radius bounds.

    measures_estimated is False for the zonal scheme (cells are equal by
    construction) and True for the random-Voronoi fallback, whose measures
    are Monte-Carlo estimates.
    """

    m: int
    cells: tuple
    measures_estimated: bool = False
    _locator: object = field(default=None, repr=False, compare=False)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def centers(self) -> np.ndarray:
        return np.array([c.center.coords for c in self.cells])

    def measures(self) -> np.ndarray:
        return np.array([c.measure for c in self.cells])

    def locate(self, x) -> int:
        """Index of the cell containing a point."""
        xv = as_unit_vector(x)
        if xv.size != self.m + 1:
            raise DimensionMismatch("point dimension does not match partition")
        if self._locator is not None:
            return self._locator.locate(xv)
        return int(np.argmax(self.centers() @ xv))

    def locate_batch(self, points: np.ndarray) -> np.ndarray:
        """Vectorized cell lookup for an (n, m+1) array of unit vectors."""
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != self.m + 1:
            raise DimensionMismatch("points must have shape (n, m+1)")
        if self._locator is not None:
            return self._locator.locate_batch(pts)
        return np.argmax(pts @ self.centers().T, axis=1)

    def to_json(self) -> str:
        payload = {
            "m": self.m,
            "measures_estimated": self.measures_estimated,
            "cells": [
                {
                    "center": [repr(float(v)) for v in c.center.coords],
                    "measure": repr(float(c.measure)),
                    "radius_bound": repr(float(c.radius_bound)),
                }
                for c in self.cells
            ],
        }
        return json.dumps(payload)

    @staticmethod
    def from_json(text: str) -> "Partition":
        payload = json.loads(text)
        cells = tuple(
            PartitionCell(
                center=SpherePoint(np.array([float(v) for v in c["center"]])),
                measure=float(c["measure"]),
                radius_bound=float(c["radius_bound"]),
            )
            for c in payload["cells"]
        )
        return Partition(m=int(payload["m"]), cells=cells, measures_estimated=bool(payload["measures_estimated"]))


class _ZonalRegion:
    """Nested colatitude-interval description of one zonal cell.

    For m >= 2 a region is a colatitude band [a, b] (about the last axis)
    crossed with a region of S^(m-1); for m = 1 it is an arc [a, b) in
    angle.  Every level also records its center direction and a geodesic
    radius bound.
    """

    __slots__ = ("a", "b", "sub", "center", "radius")

    def __init__(self, a, b, sub, center, radius):
        self.a = a
        self.b = b
        self.sub = sub
        self.center = center
        self.radius = radius


class _ZonalLocator:
    def __init__(self, m, regions, boundaries, groups):
        self.m = m
        self.regions = regions
        self.boundaries = boundaries  # colatitude boundaries incl. 0 and pi
        self.groups = groups  # list of (first_index, count, sub-locator or None)

    def locate(self, xv: np.ndarray) -> int:
        theta = math.acos(min(1.0, max(-1.0, float(xv[-1]))))
        band = int(np.searchsorted(self.boundaries, theta, side="right")) - 1
        band = min(max(band, 0), len(self.groups) - 1)
        first, count, sub = self.groups[band]
        if sub is None or count == 1:
            return first
        horiz = xv[:-1]
        n = np.linalg.norm(horiz)
        if n == 0.0:
            return first
        return first + sub.locate(horiz / n)

    def locate_batch(self, pts: np.ndarray) -> np.ndarray:
        theta = np.arccos(np.clip(pts[:, -1], -1.0, 1.0))
        band = np.clip(np.searchsorted(self.boundaries, theta, side="right") - 1, 0, len(self.groups) - 1)
        out = np.empty(pts.shape[0], dtype=np.int64)
        for b, (first, count, sub) in enumerate(self.groups):
            sel = band == b
            if not np.any(sel):
                continue
            if sub is None or count == 1:
                out[sel] = first
                continue
            horiz = pts[sel, :-1]
            norms = np.linalg.norm(horiz, axis=1, keepdims=True)
            norms[norms == 0.0] = 1.0
            out[sel] = first + sub.locate_batch(horiz / norms)
        return out


class _ArcLocator:
    def __init__(self, n):
        self.n = n

    def locate(self, xv: np.ndarray) -> int:
        phi = math.atan2(float(xv[1]), float(xv[0])) % (2.0 * math.pi)
        return min(int(phi / (2.0 * math.pi / self.n)), self.n - 1)

    def locate_batch(self, pts: np.ndarray) -> np.ndarray:
        phi = np.arctan2(pts[:, 1], pts[:, 0]) % (2.0 * math.pi)
        return np.minimum((phi / (2.0 * math.pi / self.n)).astype(np.int64), self.n - 1)


def _partition_circle(n: int):
    """n equal arcs of the circle; returns (regions, locator)."""
    width = 2.0 * math.pi / n
    regions = []
    for k in range(n):
        a = k * width
        mid = a + width / 2.0
        center = np.array([math.cos(mid), math.sin(mid)])
        regions.append(_ZonalRegion(a, a + width, None, center, min(width / 2.0, math.pi)))
    return regions, _ArcLocator(n)


def _embed_center(direction: np.ndarray, theta: float) -> np.ndarray:
    out = np.empty(direction.size + 1)
    out[:-1] = math.sin(theta) * direction
    out[-1] = math.cos(theta)
    return out


def _partition_recursive(m: int, n: int):
    """Equal-measure zonal partition of S^m into n cells.

    Returns (regions, locator); all cells have measure w_m / n exactly by
    construction (colatitude boundaries are refit from cumulative cell
    counts, and the within-collar split recurses on S^(m-1)).
    """
    if m == 1:
        return _partition_circle(n)
    w = surface_area(m)
    pole_n = np.zeros(m + 1)
    pole_n[-1] = 1.0
    if n == 1:
        region = _ZonalRegion(0.0, math.pi, None, pole_n.copy(), math.pi)
        return [region], _ZonalLocator(m, [region], np.array([0.0, math.pi]), [(0, 1, None)])
    if n == 2:
        south = -pole_n
        regions = [
            _ZonalRegion(0.0, math.pi / 2.0, None, pole_n.copy(), math.pi / 2.0),
            _ZonalRegion(math.pi / 2.0, math.pi, None, south, math.pi / 2.0),
        ]
        return regions, _ZonalLocator(m, regions, np.array([0.0, math.pi / 2.0, math.pi]), [(0, 1, None), (1, 1, None)])

    v_r = w / n
    theta_c = cap_colatitude(m, v_r)
    delta_i = v_r ** (1.0 / m)
    n_collars = max(1, round((math.pi - 2.0 * theta_c) / delta_i))

    # Ideal cell counts per collar, rounded with a running remainder so the
    # total is exact.
    ideal_bounds = [theta_c + i * (math.pi - 2.0 * theta_c) / n_collars for i in range(n_collars + 1)]
    counts = []
    remainder = 0.0
    budget = n - 2
    for i in range(n_collars):
        ideal = (_colat_area(m, ideal_bounds[i + 1]) - _colat_area(m, ideal_bounds[i])) / v_r
        ni = int(round(ideal + remainder))
        ni = min(max(ni, 0), budget - sum(counts))
        remainder += ideal - ni
        counts.append(ni)
    counts[-1] += budget - sum(counts)
    counts = [c for c in counts if c > 0]

    # Refit colatitude boundaries from cumulative counts: collar j then has
    # area counts[j] * v_r exactly.
    cum = [1]
    for c in counts:
        cum.append(cum[-1] + c)
    boundaries = [0.0, theta_c]
    for j in range(len(counts) - 1):
        boundaries.append(cap_colatitude(m, v_r * cum[j + 1]))
    south_colat = cap_colatitude(m, v_r * (n - 1))
    boundaries.append(south_colat)
    boundaries.append(math.pi)

    regions = [_ZonalRegion(0.0, theta_c, None, pole_n.copy(), theta_c)]
    groups = [(0, 1, None)]
    index = 1
    for j, cj in enumerate(counts):
        a, b = boundaries[1 + j], boundaries[2 + j]
        sub_regions, sub_locator = _partition_recursive(m - 1, cj)
        theta_mid = 0.5 * (a + b)
        sin_max = 1.0 if a <= math.pi / 2.0 <= b else max(math.sin(a), math.sin(b))
        half_band = 0.5 * (b - a)
        for sr in sub_regions:
            center = _embed_center(sr.center, theta_mid)
            radius = min(half_band + sin_max * sr.radius, math.pi)
            regions.append(_ZonalRegion(a, b, sr, center, radius))
        groups.append((index, cj, sub_locator))
        index += cj
    regions.append(_ZonalRegion(south_colat, math.pi, None, -pole_n, math.pi - south_colat))
    groups.append((index, 1, None))

    locator = _ZonalLocator(m, regions, np.array(boundaries), groups)
    return regions, locator


def equal_area_partition(m: int, n: int, seed: int = 0, method: str = "zonal") -> Partition:
    """Partition S^m into n cells.

    method="zonal" (default) gives exactly equal measures and per-cell
    geodesic radius bounds; the construction is deterministic and ignores
    the seed.  method="random-voronoi" draws n uniform centers and
    estimates Voronoi-cell measures by Monte Carlo; those measures are
    flagged as estimates.
    """
    if m < 1:
        raise DomainError(f"equal_area_partition requires m >= 1, got {m}")
    if n < 1:
        raise DomainError(f"equal_area_partition requires N >= 1, got {n}")
    w = surface_area(m)
    if method == "zonal":
        regions, locator = _partition_recursive(m, n)
        cells = tuple(
            PartitionCell(
                center=project_to_sphere(r.center),
                measure=w / n,
                radius_bound=min(r.radius, math.pi * (1.0 - 1e-12)),
            )
            for r in regions
        )
        return Partition(m=m, cells=cells, measures_estimated=False, _locator=locator)
    if method == "random-voronoi":
        centers = uniform_sphere_sample(m, n, seed)
        probe = uniform_sphere_sample(m, max(200 * n, 20000), seed + 1)
        owner = np.argmax(probe @ centers.T, axis=1)
        counts = np.bincount(owner, minlength=n)
        # Nearest-neighbor radius is a crude in-cell bound; Voronoi cells
        # of uniform centers are contained well within it in practice.
        gram = np.clip(centers @ centers.T, -1.0, 1.0)
        np.fill_diagonal(gram, -1.0)
        radii = np.arccos(np.max(gram, axis=1)) if n > 1 else np.array([math.pi])
        cells = tuple(
            PartitionCell(
                center=SpherePoint(centers[i]),
                measure=w * counts[i] / probe.shape[0],
                radius_bound=min(float(radii[i]), math.pi * (1.0 - 1e-12)),
            )
            for i in range(n)
        )
        return Partition(m=m, cells=cells, measures_estimated=True)
    raise DomainError(f"unknown partition method: {method}")


def uniform_sphere_sample(m: int, count: int, seed: int) -> np.ndarray:
    """(count, m+1) array of i.i.d. uniform points on S^m.

    Gaussian normalization; deterministic given the seed, and the first k
    rows of a count-n draw equal the full count-k draw, so sample sets nest.
    """
    if m < 1:
        raise DomainError(f"uniform_sphere_sample requires m >= 1, got {m}")
    if count < 1:
        raise DomainError(f"uniform_sphere_sample requires count >= 1, got {count}")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((count, m + 1))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    # A row of exact zeros has probability zero; regenerate defensively.
    bad = (norms == 0).ravel()
    while np.any(bad):
        g[bad] = rng.standard_normal((int(bad.sum()), m + 1))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
        bad = (norms == 0).ravel()
    return g / norms


def stereographic(x) -> np.ndarray:
    """Stereographic projection (x_1..x_m) / (1 - x_{m+1}) from the pole."""
    xv = as_unit_vector(x)
    if xv[-1] >= 1.0 - 1e-15:
        raise PoleSingularity("stereographic projection undefined at the pole")
    return xv[:-1] / (1.0 - xv[-1])


def stereographic_inverse(y) -> SpherePoint:
    """Inverse stereographic map R^m -> S^m.

    y maps to (2y, |y|^2 - 1) / (|y|^2 + 1); the zero vector maps to the
    south pole (0, ..., 0, -1).
    """
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    s = float(np.dot(y, y))
    out = np.empty(y.size + 1)
    out[:-1] = 2.0 * y / (s + 1.0)
    out[-1] = (s - 1.0) / (s + 1.0)
    return project_to_sphere(out)
