"""Gradients of smoothed class expectations and of the transitive radius.

Two estimators:

* ``approx`` -- the score-function identity
  grad E_k = E[1(argmax f(x + n) = k) n] / sigma^2, averaged over N draws.
  Needs forward passes only.
* ``full`` -- replace argmax by a Gumbel-Softmax and backpropagate the mean
  soft probability through the model's input gradient.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .model import CapabilityError
from .smoothing import CertifyOutcome, SmoothingConfig, clamp_expectation, outcome_from_counts
from .stats import META_CLASS, ClassCounts, gumbel_softmax, normal_pdf, normal_quantile

log = logging.getLogger(__name__)

GRADIENT_MODES = ("approx", "full")


@dataclass(frozen=True)
class GradientEstimate:
    vector: np.ndarray
    mode: str
    n_used: int
    stderr: np.ndarray | None = None


def _open_uniform(rng, shape):
    u = rng.random(shape)
    return np.clip(u, np.finfo(float).tiny, np.nextafter(1.0, 0.0))


def score_class_gradients(predictions: np.ndarray, noise: np.ndarray, n_classes: int, sigma: float):
    """Score-function gradients of every class expectation from one noise batch.

    Returns ``(grads, stderr)``, both ``(n_classes, d)``.
    """
    n = noise.shape[0]
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), predictions] = 1.0
    scale = 1.0 / sigma**2
    grads = scale * (onehot.T @ noise) / n
    second = scale**2 * (onehot.T @ noise**2) / n
    stderr = np.sqrt(np.maximum(second - grads**2, 0.0) / n)
    return grads, stderr


def score_gradient(model, x, k: int, sigma: float, n: int, rng: np.random.Generator) -> GradientEstimate:
    x = np.asarray(x, dtype=float)
    noise = rng.normal(0.0, sigma, size=(n, x.size))
    pred = np.argmax(model.forward(x + noise), axis=1)
    grads, stderr = score_class_gradients(pred, noise, model.n_classes, sigma)
    log.debug("score gradient per-coordinate stderr (class %d): %s", k, stderr[k])
    return GradientEstimate(grads[k], "approx", n, stderr[k])


def gumbel_expectation(model, x, noise, u, tau: float) -> np.ndarray:
    """Mean Gumbel-Softmax probability vector over fixed noise and uniforms."""
    logits = model.forward(np.asarray(x, dtype=float) + noise)
    return gumbel_softmax(logits, tau, u).mean(axis=0)


def gumbel_class_gradients(model, x, noise, u, tau: float, classes=None) -> np.ndarray:
    """Input gradients of the mean Gumbel-Softmax probability, one row per class."""
    if not hasattr(model, "input_gradient"):
        raise CapabilityError(f"{type(model).__name__} does not expose input gradients")
    noisy = np.asarray(x, dtype=float) + noise
    p = gumbel_softmax(model.forward(noisy), tau, u)
    n = noise.shape[0]
    classes = range(model.n_classes) if classes is None else classes
    rows = []
    for k in classes:
        # d p_k / d logits = p_k (e_k - p) / tau
        seed = -p * p[:, [k]]
        seed[:, k] += p[:, k]
        seed /= tau * n
        rows.append(model.input_gradient(noisy, seed).sum(axis=0))
    return np.array(rows)


def full_gradient(model, x, k: int, cfg: SmoothingConfig, rng: np.random.Generator) -> GradientEstimate:
    if not hasattr(model, "input_gradient"):
        raise CapabilityError(f"{type(model).__name__} does not expose input gradients")
    x = np.asarray(x, dtype=float)
    noise = rng.normal(0.0, cfg.sigma, size=(cfg.n_samples, x.size))
    u = _open_uniform(rng, (cfg.n_samples, model.n_classes))
    grad = gumbel_class_gradients(model, x, noise, u, cfg.tau, classes=[k])[0]
    return GradientEstimate(grad, "full", cfg.n_samples)


@dataclass(frozen=True)
class Probe:
    """Certification at a probe point plus gradients from the same noise batch."""

    outcome: CertifyOutcome
    class_grads: np.ndarray
    radius_grad: np.ndarray


def _group(outcome: CertifyOutcome, cls: int) -> list[int]:
    if cls != META_CLASS:
        return [cls]
    counts = outcome.counts.counts
    return [int(c) for c in np.flatnonzero(counts < 5)]


def probe(model, x, cfg: SmoothingConfig, mode: str, rng: np.random.Generator) -> Probe:
    """Certify ``x`` and differentiate the certified radius with one noise batch.

    The radius gradient follows the chain rule through the quantile,
    (sigma/2) (grad E0 / phi(q(E0)) - grad E1 / phi(q(E1))), evaluated at
    the clamped empirical top-two frequencies.
    """
    if mode not in GRADIENT_MODES:
        raise ValueError(f"mode must be one of {GRADIENT_MODES}")
    x = np.asarray(x, dtype=float)
    n = cfg.n_samples
    noise = rng.normal(0.0, cfg.sigma, size=(n, x.size))
    logits = model.forward(x + noise)
    need_u = cfg.mode == "gumbel" or mode == "full"
    u = _open_uniform(rng, logits.shape) if need_u else None
    votes = gumbel_softmax(logits, cfg.tau, u) if cfg.mode == "gumbel" else logits
    pred = np.argmax(votes, axis=1)
    counts = ClassCounts(np.bincount(pred, minlength=model.n_classes), n)
    outcome = outcome_from_counts(counts, cfg.sigma, cfg.alpha)
    if mode == "approx":
        grads, _ = score_class_gradients(pred, noise, model.n_classes, cfg.sigma)
    else:
        grads = gumbel_class_gradients(model, x, noise, u, cfg.tau)
    b = outcome.bounds
    e0 = clamp_expectation(b.z0, n)
    e1 = clamp_expectation(b.z1, n)
    g0 = grads[_group(outcome, b.top_class)].sum(axis=0)
    g1 = grads[_group(outcome, b.runner_class)].sum(axis=0)
    radius_grad = 0.5 * cfg.sigma * (g0 / normal_pdf(normal_quantile(e0)) - g1 / normal_pdf(normal_quantile(e1)))
    return Probe(outcome, grads, radius_grad)


def transitive_objective_gradient(model, x1, x_probe, cfg: SmoothingConfig, mode: str,
                                  rng: np.random.Generator) -> GradientEstimate:
    """Gradient of r2(x_probe) - |x_probe - x1| with respect to x_probe."""
    x1 = np.asarray(x1, dtype=float)
    x_probe = np.asarray(x_probe, dtype=float)
    offset = x_probe - x1
    dist = float(np.linalg.norm(offset))
    if dist == 0.0:
        raise ValueError("x_probe coincides with x1; the distance term has no gradient")
    p = probe(model, x_probe, cfg, mode, rng)
    return GradientEstimate(p.radius_grad - offset / dist, mode, cfg.n_samples)


def finite_difference_gradient(fn, x, h: float = 1e-5) -> np.ndarray:
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        grad[i] = (fn(x + step) - fn(x - step)) / (2.0 * h)
    return grad
