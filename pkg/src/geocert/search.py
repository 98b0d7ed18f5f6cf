"""Certificate enlargement: probe search, double transitivity, boundary treatment."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    DomainBox,
    NoIntersectionError,
    boundary_radius,
    line_point,
    spheres_overlap,
    two_sphere_radius,
)
from .gradient import GRADIENT_MODES, probe
from .smoothing import SmoothingConfig, certify

METHODS = ("cohen", "single", "double", "boundary")


@dataclass(frozen=True)
class SearchConfig:
    iterations: int = 20
    gamma0: float = 0.01
    s_grid: int = 11
    mode: str = "approx"
    search_n_samples: int = 1000
    final_n_samples: int = 1000
    enable_double: bool = True
    enable_boundary: bool = True
    golden_steps: int = 6

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.gamma0 <= 0:
            raise ValueError("gamma0 must be positive")
        if self.s_grid < 5:
            raise ValueError("s_grid must be at least 5")
        if self.mode not in GRADIENT_MODES:
            raise ValueError(f"mode must be one of {GRADIENT_MODES}")
        if self.search_n_samples < 100 or self.final_n_samples < 100:
            raise ValueError("sample counts must be at least 100")
        if self.golden_steps < 0:
            raise ValueError("golden_steps must be >= 0")


STEP_MIN, STEP_MAX = 1e-6, 1.0


def _bb_quotient(x_prev, g_prev, x_cur, g_cur) -> float | None:
    dx = np.asarray(x_cur) - np.asarray(x_prev)
    dg = np.asarray(g_cur) - np.asarray(g_prev)
    den = float(dg @ dg)
    if den < 1e-12:
        return None
    q = abs(float(dx @ dg)) / den
    if not math.isfinite(q):
        return None
    return min(max(q, STEP_MIN), STEP_MAX)


def bb_step(x_prev, g_prev, x_cur, g_cur, gamma0: float) -> float:
    """Barzilai-Borwein step |dx.dg| / (dg.dg), clipped to [1e-6, 1].

    Falls back to ``gamma0`` on the first iteration (``x_prev is None``) and
    when the quotient is undefined.
    """
    if x_prev is None or g_prev is None:
        return gamma0
    q = _bb_quotient(x_prev, g_prev, x_cur, g_cur)
    return gamma0 if q is None else q


@dataclass
class AscentTrace:
    points: list = field(default_factory=list)
    values: list = field(default_factory=list)
    steps: list = field(default_factory=list)


def bb_ascent(fn, x0, iterations: int, gamma0: float, rng: np.random.Generator,
              best_value: float = -math.inf, lo: float = 0.0, hi: float = 1.0):
    """Normalised-gradient ascent with Barzilai-Borwein step lengths in a box.

    ``fn(x)`` returns ``(value, direction)``; ``value`` may be ``-inf`` for
    infeasible points. The first step has length ``gamma0``; later steps use
    the BB coefficient times the direction norm, which is the BB update
    written in normalised form. A vanishing direction triggers a random unit
    step of length ``gamma0``. Returns ``(best_value, best_x, trace)``; the
    incumbent ``(best_value, x0)`` is kept unless some iterate beats it.
    """
    x = np.asarray(x0, dtype=float).copy()
    best_x = x.copy()
    trace = AscentTrace()
    x_prev = g_prev = None
    for _ in range(iterations):
        value, g = fn(x)
        g = np.asarray(g, dtype=float)
        trace.points.append(x.copy())
        trace.values.append(value)
        if value > best_value:
            best_value, best_x = value, x.copy()
        gnorm = float(np.linalg.norm(g))
        if not math.isfinite(gnorm) or gnorm < 1e-12:
            direction = rng.normal(size=x.size)
            step = gamma0 * direction / np.linalg.norm(direction)
            x_prev = g_prev = None
        else:
            q = None if x_prev is None else _bb_quotient(x_prev, g_prev, x, g)
            length = gamma0 if q is None else q * gnorm
            step = length * g / gnorm
            x_prev, g_prev = x.copy(), g
        trace.steps.append(float(np.linalg.norm(step)))
        x = np.clip(x + step, lo, hi)
    return best_value, best_x, trace


def single_bubble_loop(model, x, cls: int, smoothing: SmoothingConfig, search: SearchConfig,
                       rng: np.random.Generator, r_initial: float):
    """Search for a probe x' whose certified ball encloses the instance's.

    Maximises r' = r(x') - |x' - x| starting from x' = x with incumbent
    ``r_initial``. Probes predicting ``cls`` ascend r'; probes predicting
    another class step down its gradient; abstaining probes climb the
    expectation of ``cls``. Returns ``(r_single, x2, trace)`` where
    ``r_single`` is measured at ``search.search_n_samples``.
    """
    x = np.asarray(x, dtype=float)
    cfg = smoothing.with_samples(search.search_n_samples)

    def objective(xp):
        p = probe(model, xp, cfg, search.mode, rng)
        o = p.outcome
        offset = xp - x
        dist = float(np.linalg.norm(offset))
        unit = offset / dist if dist > 0 else np.zeros_like(offset)
        if o.abstained:
            return -math.inf, p.class_grads[cls]
        grad = p.radius_grad - unit
        if o.predicted == cls:
            return o.radius - dist, grad
        return -math.inf, -grad

    r_best, x2, trace = bb_ascent(objective, x, search.iterations, search.gamma0, rng, best_value=r_initial)
    return r_best, x2, trace


def double_transitive_search(model, x1, x2, r_prime: float, cls: int, smoothing: SmoothingConfig,
                             search: SearchConfig, rng: np.random.Generator):
    """Line search for a third ball on the ray from x2 through x1.

    Candidates x3(s) = x1 + s r' (x1 - x2)/|x1 - x2| are certified for s on a
    uniform grid, then refined by golden-section search around the best grid
    point. A candidate counts when it predicts ``cls``, stays in the unit box,
    and its ball overlaps ball 2 without being contained in it. The winner
    is re-certified with fresh noise. Returns ``(r_double, x3)``, falling back
    to ``(r_prime, None)``.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    d2 = float(np.linalg.norm(x2 - x1))
    if r_prime <= 0 or d2 == 0.0:
        return r_prime, None
    r2 = r_prime + d2
    box = DomainBox(x1.size)
    search_cfg = smoothing.with_samples(search.search_n_samples)
    final_cfg = smoothing.with_samples(search.final_n_samples)

    def evaluate(s, cfg):
        x3 = line_point(x1, x2, r_prime, s)
        if not box.contains(x3):
            return -math.inf, x3
        o = certify(model, x3, cfg, rng)
        if o.abstained or o.predicted != cls:
            return -math.inf, x3
        d3 = s * r_prime
        if not spheres_overlap(d2, d3, r2, o.radius):
            return -math.inf, x3
        try:
            return two_sphere_radius(d2, d3, r2, o.radius), x3
        except NoIntersectionError:
            return -math.inf, x3

    grid = np.linspace(0.0, 1.0, search.s_grid)
    scores = [evaluate(float(s), search_cfg)[0] for s in grid]
    i = int(np.argmax(scores))
    best_s, best_val = float(grid[i]), scores[i]
    if best_val == -math.inf:
        return r_prime, None

    # golden-section refinement within one grid cell either side
    h = 1.0 / (search.s_grid - 1)
    a, b = max(0.0, best_s - h), min(1.0, best_s + h)
    ratio = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - ratio * (b - a), a + ratio * (b - a)
    fc, fd = evaluate(c, search_cfg)[0], evaluate(d, search_cfg)[0]
    for _ in range(search.golden_steps):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - ratio * (b - a)
            fc = evaluate(c, search_cfg)[0]
        else:
            a, c, fc = c, d, fd
            d = a + ratio * (b - a)
            fd = evaluate(d, search_cfg)[0]
    for s, val in ((c, fc), (d, fd)):
        if val > best_val:
            best_s, best_val = s, val

    final_val, x3 = evaluate(best_s, final_cfg)
    if final_val == -math.inf:
        return r_prime, None
    return final_val, x3


@dataclass
class CertificationReport:
    instance_id: int
    label: int
    predicted: int
    abstained: bool
    e0_lower: float
    e1_upper: float
    r_cohen: float
    r_single: float
    r_double: float
    r_boundary: float
    r_best: float
    best_method: str
    x2_found: np.ndarray | None
    x3_found: np.ndarray | None
    iterations_used: int
    wall_time_ms: float
    seed: int

    @property
    def correct(self) -> bool:
        return not self.abstained and self.predicted == self.label


def pick_best(r_cohen: float, r_single: float, r_double: float, r_boundary: float) -> tuple[float, str]:
    """Max radius; ties go to the cheaper method."""
    values = (r_cohen, r_single, r_double, r_boundary)
    best = max(values)
    return best, METHODS[values.index(best)]


def certify_geometric(model, x, label: int, smoothing: SmoothingConfig, search: SearchConfig,
                      rng: np.random.Generator, instance_id: int = 0, seed: int = 0) -> CertificationReport:
    """Baseline certificate followed by single, double and boundary enlargement."""
    start = time.perf_counter()
    x = np.asarray(x, dtype=float)
    final_cfg = smoothing.with_samples(search.final_n_samples)
    base = certify(model, x, final_cfg, rng)
    e0, e1 = base.bounds.e0_lower, base.bounds.e1_upper

    def report(**kw):
        return CertificationReport(instance_id=instance_id, label=int(label), e0_lower=e0, e1_upper=e1,
                                   wall_time_ms=1e3 * (time.perf_counter() - start), seed=int(seed), **kw)

    if base.abstained:
        return report(predicted=base.predicted, abstained=True, r_cohen=0.0, r_single=0.0, r_double=0.0,
                      r_boundary=0.0, r_best=0.0, best_method="cohen", x2_found=None, x3_found=None,
                      iterations_used=0)

    cls = base.predicted
    r_cohen = base.radius
    _, x2, _ = single_bubble_loop(model, x, cls, smoothing, search, rng, r_initial=r_cohen)

    r_single, r2 = r_cohen, r_cohen
    moved = not np.array_equal(x2, x)
    if moved:
        # re-certify the winner with fresh noise before trusting it
        o2 = certify(model, x2, final_cfg, rng)
        if o2.abstained or o2.predicted != cls:
            moved = False
        else:
            r2 = o2.radius
            r_single = r2 - float(np.linalg.norm(x2 - x))
    if not moved:
        x2 = x.copy()

    r_double, x3 = r_single, None
    if search.enable_double and moved and r_single > r_cohen:
        r_double, x3 = double_transitive_search(model, x, x2, r_single, cls, smoothing, search, rng)

    r_boundary = 0.0
    if search.enable_boundary and moved and r_single >= 0:
        r_boundary = boundary_radius(x, x2, r2, DomainBox(x.size))

    r_best, method = pick_best(r_cohen, r_single, r_double, r_boundary)
    return report(predicted=cls, abstained=False, r_cohen=r_cohen, r_single=r_single, r_double=r_double,
                  r_boundary=r_boundary, r_best=r_best, best_method=method, x2_found=x2, x3_found=x3,
                  iterations_used=search.iterations)
