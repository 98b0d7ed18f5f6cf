"""Independent ground truth for the closed-form paths.

Exactly solvable classifiers, brute-force distances to the boundary of a
union of balls, and a multinomial coverage simulator for Goodman intervals.
None of these call the formulas they are used to check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CertifiedBall, DomainBox
from .stats import ClassCounts, coalesce_classes, goodman_bounds, normal_cdf


@dataclass(frozen=True)
class LinearModel:
    """Binary classifier: class 0 where w.x + b > 0, class 1 otherwise."""

    w: np.ndarray
    b: float = 0.0
    n_classes: int = 2

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if not np.linalg.norm(w) > 0:
            raise ValueError("weight vector must be non-zero")
        object.__setattr__(self, "w", w)

    @property
    def dim(self) -> int:
        return self.w.size

    def forward(self, X) -> np.ndarray:
        s = np.atleast_2d(X) @ self.w + self.b
        return np.stack([s, np.zeros_like(s)], axis=1)

    def input_gradient(self, X, seed) -> np.ndarray:
        seed = np.atleast_2d(seed)
        return seed[:, :1] * self.w


@dataclass(frozen=True)
class ConstantClassifier:
    dim: int
    n_classes: int = 2
    label: int = 0

    def forward(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        out = np.zeros((X.shape[0], self.n_classes))
        out[:, self.label] = 1.0
        return out

    def input_gradient(self, X, seed) -> np.ndarray:
        return np.zeros_like(np.atleast_2d(X), dtype=float)


@dataclass(frozen=True)
class ThresholdModel:
    """1-D classifier: class 0 iff x < threshold."""

    threshold: float
    dim: int = 1
    n_classes: int = 2

    def forward(self, X) -> np.ndarray:
        s = self.threshold - np.atleast_2d(X)[:, 0]
        return np.stack([s, np.zeros_like(s)], axis=1)


def linear_expectation_exact(m: LinearModel, x, sigma: float) -> float:
    """P(w.(x+n)+b > 0) for n ~ N(0, sigma^2 I)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    s = float(np.dot(m.w, x) + m.b)
    return normal_cdf(s / (sigma * float(np.linalg.norm(m.w))))


def linear_certified_radius_exact(m: LinearModel, x) -> float:
    return abs(float(np.dot(m.w, x) + m.b)) / float(np.linalg.norm(m.w))


def _lattice(dim: int, n: int) -> np.ndarray:
    if dim == 2:
        theta = 2.0 * np.pi * (np.arange(n) + 0.5) / n
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    # Fibonacci sphere
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    rho = np.sqrt(1.0 - z * z)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def _patch(direction: np.ndarray, half_width: float, m: int) -> np.ndarray:
    """Unit vectors within ``half_width`` radians of ``direction``."""
    if direction.size == 2:
        theta0 = math.atan2(direction[1], direction[0])
        theta = theta0 + np.linspace(-half_width, half_width, m)
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    helper = np.eye(3)[int(np.argmin(np.abs(direction)))]
    t1 = np.cross(direction, helper)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(direction, t1)
    side = int(math.isqrt(m))
    a, b = np.meshgrid(np.linspace(-half_width, half_width, side), np.linspace(-half_width, half_width, side))
    a, b = a.ravel(), b.ravel()
    rho = np.hypot(a, b)
    safe = np.where(rho > 0, rho, 1.0)
    tangent = (a[:, None] * t1 + b[:, None] * t2) / safe[:, None]
    out = np.cos(rho)[:, None] * direction + np.sin(rho)[:, None] * tangent
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def union_boundary_distance(x1, balls: list[CertifiedBall], domain: DomainBox | None = None,
                            resolution: int = 100_000, refine_rounds: int = 4) -> float:
    """Brute-force distance from x1 to the boundary of a union of balls.

    Each sphere is sampled on a uniform lattice of ``resolution`` points;
    points strictly inside another ball, or outside ``domain`` when given,
    are rejected. The best surviving sample of each sphere is then refined
    on successively finer local patches. Only the part of the boundary that
    lies inside the domain counts: points beyond the box are not inputs.
    """
    x1 = np.asarray(x1, dtype=float)
    dim = x1.size
    if dim not in (2, 3):
        raise ValueError("oracle supports dimension 2 or 3 only")
    if not balls:
        raise ValueError("need at least one ball")
    centres = np.array([b.center for b in balls], dtype=float)
    radii = np.array([b.radius for b in balls], dtype=float)
    if not np.any(np.linalg.norm(centres - x1, axis=1) <= radii):
        raise ValueError("x1 lies outside the union")

    def feasible(points, own):
        d = np.linalg.norm(points[:, None, :] - centres[None, :, :], axis=2)
        inside = d < radii[None, :] * (1.0 - 1e-12)
        inside[:, own] = False
        ok = ~inside.any(axis=1)
        if domain is not None:
            ok &= np.all((points >= 0.0) & (points <= 1.0), axis=1)
        return ok

    best = math.inf
    base = _lattice(dim, resolution)
    spacing = 2.0 * np.pi / resolution if dim == 2 else math.sqrt(4.0 * np.pi / resolution)
    local_m = 2001 if dim == 2 else 101 * 101
    for i, (c, r) in enumerate(zip(centres, radii)):
        if r == 0:
            continue
        dirs = base
        half = 3.0 * spacing
        cand = math.inf
        cand_dir = None
        for round_ in range(refine_rounds + 1):
            pts = c + r * dirs
            ok = feasible(pts, i)
            if ok.any():
                dist = np.linalg.norm(pts[ok] - x1, axis=1)
                j = int(np.argmin(dist))
                if dist[j] < cand:
                    cand, cand_dir = float(dist[j]), dirs[ok][j]
            if cand_dir is None:
                break
            if round_ > 0:
                half = 4.0 * (2.0 * half / (math.isqrt(local_m) if dim == 3 else local_m))
            dirs = _patch(cand_dir, half, local_m)
        best = min(best, cand)
    if not math.isfinite(best):
        raise ValueError("no boundary point survives the rejection step")
    return best


def multinomial_coverage_sim(p, N: int, alpha: float, trials: int, seed: int = 0) -> float:
    """Fraction of simulated multinomial samples whose Goodman intervals all cover the truth."""
    p = np.asarray(p, dtype=float)
    if trials < 1000:
        raise ValueError("use at least 1000 trials")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("p must lie on the simplex")
    rng = np.random.default_rng(seed)
    draws = rng.multinomial(N, p, size=trials)
    hits = 0
    for counts in draws:
        merged = coalesce_classes(ClassCounts(counts, N))
        bounds = goodman_bounds(merged, alpha)
        kept = merged.classes >= 0
        truth = np.empty(merged.counts.size)
        truth[kept] = p[merged.classes[kept]]
        if not kept.all():
            truth[~kept] = p[counts < 5].sum()
        hits += bool(np.all((bounds[:, 0] <= truth) & (truth <= bounds[:, 1])))
    return hits / trials
