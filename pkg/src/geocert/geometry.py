"""Closed-form certificate geometry in the L2 norm.

Every formula here is total: radii may come back zero or negative and the
orchestration layer takes the max. The exceptions are degenerate directions
(coincident centres) and two-sphere configurations with no usable
intersection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .stats import normal_quantile


class GeometryError(ValueError):
    pass


class DegenerateDirectionError(GeometryError):
    pass


class NoIntersectionError(GeometryError):
    pass


@dataclass(frozen=True)
class CertifiedBall:
    center: np.ndarray
    radius: float
    class_label: int = 0

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        object.__setattr__(self, "center", center)
        if self.radius < 0:
            raise ValueError("radius must be non-negative")


@dataclass(frozen=True)
class DomainBox:
    """The unit hypercube [0, 1]^d."""

    dimension: int

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x)
        return bool(np.all(x >= -tol) and np.all(x <= 1.0 + tol))

    def clip(self, x) -> np.ndarray:
        return np.clip(x, 0.0, 1.0)


def cohen_radius(e0_lower: float, e1_upper: float, sigma: float) -> float:
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return 0.5 * sigma * (normal_quantile(e0_lower) - normal_quantile(e1_upper))


def single_transitive_radius(r2: float, dist: float) -> float:
    return r2 - dist


def _unit(x1, x2) -> tuple[np.ndarray, float]:
    diff = np.asarray(x1, dtype=float) - np.asarray(x2, dtype=float)
    norm = float(np.linalg.norm(diff))
    if norm == 0.0:
        raise DegenerateDirectionError("x1 and x2 coincide; direction undefined")
    return diff / norm, norm


def nearest_surface_point(x1, x2, r2: float) -> np.ndarray:
    """Point of the sphere S(x2, r2) closest to x1, for x1 inside the ball."""
    u, dist = _unit(x1, x2)
    return np.asarray(x1, dtype=float) + (r2 - dist) * u


def line_point(x1, x2, r_prime: float, s: float) -> np.ndarray:
    """x1 + s * r' * (x1 - x2) / |x1 - x2|."""
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    u, _ = _unit(x1, x2)
    return np.asarray(x1, dtype=float) + s * r_prime * u


def spheres_overlap(d2: float, d3: float, r2: float, r3: float) -> bool:
    """Ball 3 pokes out of ball 2 and the two spheres meet (collinear layout)."""
    gap = d2 + d3
    return abs(r2 - r3) < gap < r2 + r3


def two_sphere_radius(d2: float, d3: float, r2: float, r3: float) -> float:
    """Distance from x1 to the intersection of spheres 2 and 3.

    Centres sit on opposite sides of x1 along one line, at distances d2 and d3.
    """
    gap = d2 + d3
    if gap <= 0:
        raise NoIntersectionError("centres coincide with x1")
    inner = (d2 * (r3 * r3 - d3 * d3) + d3 * (r2 * r2 - d2 * d2)) / gap
    if inner < 0:
        raise NoIntersectionError(f"negative squared radius {inner!r}")
    return math.sqrt(inner)


def boundary_radius(x1, x2, r2: float, domain: DomainBox) -> float:
    """Distance from x1 to where S(x2, r2) crosses a face of the unit box.

    Both faces of every axis are tried; a face only counts if the sphere
    reaches it and the unconstrained nearest surface point lies beyond it.
    Returns 0.0 when no face qualifies.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.size != domain.dimension:
        raise ValueError("point dimension does not match the domain")
    try:
        nearest = nearest_surface_point(x1, x2, r2)
    except DegenerateDirectionError:
        return 0.0
    dist_sq = float(np.sum((x2 - x1) ** 2))
    best = 0.0
    for k in range(x1.size):
        off_axis = math.sqrt(max(dist_sq - (x2[k] - x1[k]) ** 2, 0.0))
        for z, violated in ((0.0, nearest[k] < 0.0), (1.0, nearest[k] > 1.0)):
            reach = r2 * r2 - (z - x2[k]) ** 2
            if not violated or reach < 0:
                continue
            ring = math.sqrt(reach)
            cand = math.sqrt((z - x1[k]) ** 2 + (ring - off_axis) ** 2)
            best = max(best, cand)
    return best


def intersection_ring_radius(D: float, r2: float, r3: float) -> float:
    """Radius of the (d-2)-sphere where two spheres with centre gap D meet."""
    if not abs(r2 - r3) < D < r2 + r3:
        raise NoIntersectionError("spheres do not intersect")
    a = (D * D + r2 * r2 - r3 * r3) / (2.0 * D)
    return math.sqrt(max(r2 * r2 - a * a, 0.0))


def hypersphere_volume(d: int, r: float) -> float:
    if d < 1 or r < 0:
        raise ValueError("need d >= 1 and r >= 0")
    return math.exp(d * math.log(r) + 0.5 * d * math.log(math.pi) - math.lgamma(0.5 * d + 1)) if r > 0 else 0.0


def hypersphere_surface(d: int, r: float) -> float:
    if d < 1 or r < 0:
        raise ValueError("need d >= 1 and r >= 0")
    if r == 0:
        return 2.0 if d == 1 else 0.0
    return d * math.exp((d - 1) * math.log(r) + 0.5 * d * math.log(math.pi) - math.lgamma(0.5 * d + 1))
