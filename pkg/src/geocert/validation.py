"""Formula-versus-oracle checks behind ``geocert oracle-check``.

Each check returns a :class:`Check`; the CLI prints them as a table. The
random configuration generators are shared with the test-suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    CertifiedBall,
    DomainBox,
    boundary_radius,
    intersection_ring_radius,
    nearest_surface_point,
    single_transitive_radius,
    spheres_overlap,
    two_sphere_radius,
)
from .gradient import finite_difference_gradient, gumbel_class_gradients, gumbel_expectation, score_gradient
from .model import MlpParams
from .oracle import (
    LinearModel,
    ThresholdModel,
    linear_certified_radius_exact,
    multinomial_coverage_sim,
    union_boundary_distance,
)
from .search import bb_ascent
from .smoothing import SmoothingConfig, certify
from .stats import normal_cdf, normal_pdf, normal_quantile


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class TwoSphereCase:
    x1: np.ndarray
    x2: np.ndarray
    x3: np.ndarray
    d2: float
    d3: float
    r2: float
    r3: float


def random_two_sphere_case(rng: np.random.Generator, dim: int, margin: float = 0.02) -> TwoSphereCase:
    """Collinear three-ball layout where the nearest union boundary is the intersection ring."""
    while True:
        u = rng.normal(size=dim)
        u /= np.linalg.norm(u)
        d2 = rng.uniform(0.1, 1.0)
        r2 = d2 + rng.uniform(0.1, 1.0)
        r_prime = r2 - d2
        d3 = rng.uniform(0.05, 1.0) * r_prime
        r3 = rng.uniform(0.05, 1.5)
        gap = d2 + d3
        if not (abs(r2 - r3) + margin < gap < r2 + r3 - margin):
            continue
        # nearest point of sphere 2 inside ball 3, nearest point of sphere 3 inside ball 2
        if abs(r_prime - d3) > r3 - margin or abs(gap - r3) > r2 - margin:
            continue
        x1 = rng.uniform(-0.5, 0.5, size=dim)
        return TwoSphereCase(x1, x1 - d2 * u, x1 + d3 * u, d2, d3, r2, r3)


@dataclass(frozen=True)
class BoundaryCase:
    x1: np.ndarray
    x2: np.ndarray
    r2: float
    axis: int
    face: float


def random_boundary_case(rng: np.random.Generator, margin: float = 0.01) -> BoundaryCase:
    """2-D instance whose probe ball crosses exactly one face of the unit square.

    The instance sits inside the probe ball and the unconstrained nearest
    surface point lies beyond that face.
    """
    while True:
        axis = int(rng.integers(2))
        face = float(rng.integers(2))
        x1 = rng.uniform(0.05, 0.95, size=2)
        x2 = rng.uniform(0.05, 0.95, size=2)
        d = float(np.linalg.norm(x2 - x1))
        if d < 0.02:
            continue
        r2 = d + rng.uniform(0.02, 0.5)
        if not (r2 > d + margin):
            continue
        other = 1 - axis
        # crosses the chosen face by a margin and no other face
        crosses = [
            x2[axis] - r2 < -margin if face == 0.0 else x2[axis] + r2 > 1.0 + margin,
            x2[axis] + r2 > 1.0 - margin if face == 0.0 else x2[axis] - r2 < margin,
            x2[other] - r2 < margin,
            x2[other] + r2 > 1.0 - margin,
        ]
        if not crosses[0] or any(crosses[1:]):
            continue
        nearest = nearest_surface_point(x1, x2, r2)
        beyond = nearest[axis] < -margin if face == 0.0 else nearest[axis] > 1.0 + margin
        if beyond:
            return BoundaryCase(x1, x2, r2, axis, face)


def _check_quantile() -> Check:
    worst = 0.0
    for p in np.concatenate([np.linspace(1e-6, 1 - 1e-6, 501), [1e-12, 1e-9, 0.975]]):
        worst = max(worst, abs(normal_cdf(normal_quantile(p)) - p) / normal_pdf(normal_quantile(p)))
    return Check("normal quantile inverts the CDF", worst < 1e-9, f"max abs error {worst:.2e}")


def _check_two_sphere(cases: int, resolution: int) -> Check:
    rng = np.random.default_rng(1)
    worst = abs(two_sphere_radius(0.5, 0.3, 1.0, 0.9) - math.sqrt(0.73125))
    for i in range(cases):
        c = random_two_sphere_case(rng, 2 + i % 2)
        formula = two_sphere_radius(c.d2, c.d3, c.r2, c.r3)
        balls = [CertifiedBall(c.x2, c.r2), CertifiedBall(c.x3, c.r3)]
        worst = max(worst, abs(formula - union_boundary_distance(c.x1, balls, resolution=resolution)))
    return Check("two-sphere radius vs brute force", worst <= 1e-3, f"max abs diff {worst:.2e}")


def _check_ring() -> Check:
    got = intersection_ring_radius(0.8, 1.0, 0.9)
    err = abs(got - math.sqrt(1.0 - 0.51875**2))
    return Check("intersection ring radius", err < 1e-12, f"{got:.6f}")


def _check_boundary(cases: int, resolution: int) -> Check:
    rng = np.random.default_rng(2)
    box = DomainBox(2)
    worst = abs(boundary_radius([0.9, 0.5], [0.8, 0.5], 0.5, box) - math.sqrt(0.22))
    below = 0
    for _ in range(cases):
        c = random_boundary_case(rng)
        formula = boundary_radius(c.x1, c.x2, c.r2, box)
        oracle = union_boundary_distance(c.x1, [CertifiedBall(c.x2, c.r2)], box, resolution=resolution)
        worst = max(worst, abs(formula - oracle))
        below += formula < single_transitive_radius(c.r2, float(np.linalg.norm(c.x2 - c.x1))) - 1e-12
    ok = worst <= 1e-3 and below == 0
    return Check("boundary radius vs brute force", ok, f"max abs diff {worst:.2e}, gate violations {below}")


def _check_coverage(trials: int) -> Check:
    cov = multinomial_coverage_sim([0.7, 0.2, 0.1], 1000, 0.001, trials, seed=3)
    floor = 0.999 - 3 * math.sqrt(0.001 / trials)
    return Check("Goodman joint coverage", cov >= floor, f"coverage {cov:.4f} (floor {floor:.4f})")


def _check_linear(instances: int) -> Check:
    rng = np.random.default_rng(4)
    cfg = SmoothingConfig(sigma=0.5, n_samples=10_000, alpha=0.001)
    over = 0
    for _ in range(instances):
        d = int(rng.integers(2, 17))
        m = LinearModel(rng.normal(size=d), float(rng.normal()))
        x = rng.uniform(0, 1, size=d)
        o = certify(m, x, cfg, rng)
        over += (not o.abstained) and o.radius > linear_certified_radius_exact(m, x)
    return Check("certified radius never beats a linear boundary", over <= 1, f"{over}/{instances} exceed")


def _check_score_gradient() -> Check:
    rng = np.random.default_rng(5)
    sigma, t = 0.5, 0.5
    worst = 0.0
    for off in (-0.4, -0.1, 0.2):
        x = np.array([t + off])
        est = score_gradient(ThresholdModel(t), x, 0, sigma, 100_000, rng).vector[0]
        truth = -normal_pdf((t - x[0]) / sigma) / sigma
        worst = max(worst, abs(est - truth) / abs(truth))
    return Check("score-function gradient on a threshold", worst < 0.05, f"max rel err {worst:.3f}")


def _check_full_gradient() -> Check:
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(5):
        params = MlpParams.init([3, 16, 3], rng)
        for w in params.biases:
            w += rng.normal(scale=0.1, size=w.shape)
        x = rng.uniform(0, 1, size=3)
        noise = rng.normal(0, 0.3, size=(64, 3))
        u = rng.uniform(0.01, 0.99, size=(64, 3))
        analytic = gumbel_class_gradients(params, x, noise, u, 0.5, classes=[0])[0]
        fd = finite_difference_gradient(lambda z: gumbel_expectation(params, z, noise, u, 0.5)[0], x, 1e-6)
        worst = max(worst, np.linalg.norm(analytic - fd) / max(np.linalg.norm(fd), 1e-12))
    return Check("Gumbel-Softmax gradient vs finite differences", worst < 1e-4, f"max rel err {worst:.2e}")


def _check_bb() -> Check:
    rng = np.random.default_rng(7)
    target = np.array([0.6, 0.4])
    fn = lambda x: (1.0 - float(np.sum((x - target) ** 2)), -2.0 * (x - target))
    worst = 0.0
    for _ in range(10):
        start = target + rng.uniform(-0.35, 0.35, size=2)
        _, best, _ = bb_ascent(fn, start, 50, 0.01, rng)
        worst = max(worst, float(np.linalg.norm(best - target)))
    return Check("Barzilai-Borwein ascent reaches the maximiser", worst < 1e-3, f"max miss {worst:.2e}")


def run_checks(quick: bool = True) -> list[Check]:
    cases = 20 if quick else 100
    resolution = 20_000 if quick else 100_000
    return [
        _check_quantile(),
        _check_ring(),
        _check_two_sphere(cases, resolution),
        _check_boundary(cases, resolution),
        _check_coverage(2000 if quick else 10_000),
        _check_linear(20 if quick else 200),
        _check_score_gradient(),
        _check_full_gradient(),
        _check_bb(),
    ]
