"""Monte-Carlo smoothed prediction and the baseline certificate."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import cohen_radius
from .stats import META_CLASS, ClassCounts, ExpectationBounds, coalesce_classes, goodman_bounds, gumbel_softmax

MODES = ("argmax", "gumbel")


@dataclass(frozen=True)
class SmoothingConfig:
    sigma: float = 0.5
    n_samples: int = 1000
    alpha: float = 0.001
    tau: float = 1.0
    mode: str = "argmax"
    seed: int = 0
    batch_size: int = 2048

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.n_samples < 100:
            raise ValueError("n_samples must be at least 100")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")

    def with_samples(self, n: int) -> "SmoothingConfig":
        return replace(self, n_samples=n)


@dataclass(frozen=True)
class CertifyOutcome:
    bounds: ExpectationBounds
    radius: float
    abstained: bool
    counts: ClassCounts

    @property
    def predicted(self) -> int:
        return self.bounds.top_class


def _chunks(n: int, size: int):
    for start in range(0, n, size):
        yield min(size, n - start)


def _open_uniform(rng: np.random.Generator, shape) -> np.ndarray:
    u = rng.random(shape)
    return np.clip(u, np.finfo(float).tiny, np.nextafter(1.0, 0.0))


def sample_counts(model, x, cfg: SmoothingConfig, rng: np.random.Generator) -> ClassCounts:
    """Class votes of ``cfg.n_samples`` noisy copies of ``x``.

    In ``gumbel`` mode each vote is the argmax of a Gumbel-Softmax sample.
    """
    x = np.asarray(x, dtype=float)
    counts = np.zeros(model.n_classes, dtype=np.int64)
    for m in _chunks(cfg.n_samples, cfg.batch_size):
        noisy = x + rng.normal(0.0, cfg.sigma, size=(m, x.size))
        logits = model.forward(noisy)
        if cfg.mode == "gumbel":
            logits = gumbel_softmax(logits, cfg.tau, _open_uniform(rng, logits.shape))
        counts += np.bincount(np.argmax(logits, axis=1), minlength=model.n_classes)
    return ClassCounts(counts, cfg.n_samples)


def sample_expectations(model, x, cfg: SmoothingConfig, rng: np.random.Generator):
    """``ClassCounts`` in argmax mode, mean Gumbel-Softmax probabilities in gumbel mode."""
    if cfg.mode == "argmax":
        return sample_counts(model, x, cfg, rng)
    x = np.asarray(x, dtype=float)
    total = np.zeros(model.n_classes)
    for m in _chunks(cfg.n_samples, cfg.batch_size):
        noisy = x + rng.normal(0.0, cfg.sigma, size=(m, x.size))
        logits = model.forward(noisy)
        total += gumbel_softmax(logits, cfg.tau, _open_uniform(rng, logits.shape)).sum(axis=0)
    return total / cfg.n_samples


def clamp_expectation(e: float, n: int) -> float:
    lo = 0.5 / n
    return min(max(e, lo), 1.0 - lo)


def outcome_from_counts(counts: ClassCounts, sigma: float, alpha: float) -> CertifyOutcome:
    """Coalesce, bound with Goodman intervals, pick the top two and apply the radius formula."""
    merged = coalesce_classes(counts)
    bounds = goodman_bounds(merged, alpha)
    order = np.argsort(-merged.counts, kind="stable")
    top, runner = int(order[0]), int(order[1])
    n = counts.total
    e0 = clamp_expectation(float(bounds[top, 0]), n)
    e1 = clamp_expectation(float(bounds[runner, 1]), n)
    radius = cohen_radius(e0, e1, sigma)
    top_class = int(merged.classes[top])
    eb = ExpectationBounds(
        top_class=top_class,
        runner_class=int(merged.classes[runner]),
        e0_lower=e0,
        e1_upper=e1,
        alpha=alpha,
        z0=float(merged.counts[top]) / n,
        z1=float(merged.counts[runner]) / n,
    )
    if top_class == META_CLASS:
        # a merged bag of rare classes is not a prediction
        radius = min(radius, 0.0)
    abstained = radius <= 0
    return CertifyOutcome(eb, radius, abstained, counts)


def certify(model, x, cfg: SmoothingConfig, rng: np.random.Generator) -> CertifyOutcome:
    counts = sample_counts(model, x, cfg, rng)
    return outcome_from_counts(counts, cfg.sigma, cfg.alpha)
