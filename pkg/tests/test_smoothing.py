import numpy as np
import pytest

from geocert.oracle import ConstantClassifier, LinearModel, linear_expectation_exact
from geocert.smoothing import (
    SmoothingConfig,
    certify,
    clamp_expectation,
    outcome_from_counts,
    sample_counts,
    sample_expectations,
)
from geocert.stats import META_CLASS, ClassCounts


def test_constant_classifier_saturates(rng):
    cfg = SmoothingConfig(sigma=0.5, n_samples=1000)
    o = certify(ConstantClassifier(3, 4, label=2), np.full(3, 0.5), cfg, rng)
    assert o.predicted == 2 and not o.abstained
    assert o.counts.counts.tolist() == [0, 0, 1000, 0]
    # runner-up is the padded meta-class
    assert o.bounds.runner_class == META_CLASS
    assert 0 < o.radius < 2.5


def test_balanced_linear_abstains(rng):
    o = certify(LinearModel(np.array([1.0, 0.0]), -0.5), np.array([0.5, 0.3]), SmoothingConfig(), rng)
    assert o.abstained and o.radius <= 0


def test_counts_track_exact_expectation(rng):
    m = LinearModel(np.array([1.0, -2.0]), 0.3)
    x = np.array([0.4, 0.2])
    cfg = SmoothingConfig(sigma=0.5, n_samples=20_000)
    c = sample_counts(m, x, cfg, rng)
    p = linear_expectation_exact(m, x, 0.5)
    assert c.counts[0] / c.total == pytest.approx(p, abs=4 * np.sqrt(p * (1 - p) / 20_000))


def test_batching_does_not_change_results():
    m = LinearModel(np.array([1.0, 1.0]), -1.0)
    x = np.array([0.6, 0.55])
    a = sample_counts(m, x, SmoothingConfig(batch_size=4096), np.random.default_rng(3))
    b = sample_counts(m, x, SmoothingConfig(batch_size=4096), np.random.default_rng(3))
    assert np.array_equal(a.counts, b.counts)


def test_gumbel_mode_expectations(rng):
    cfg = SmoothingConfig(mode="gumbel", tau=0.5, n_samples=500)
    e = sample_expectations(ConstantClassifier(2, 3, 1), np.zeros(2), cfg, rng)
    assert e.shape == (3,) and abs(e.sum() - 1) < 1e-12 and int(np.argmax(e)) == 1
    o = certify(ConstantClassifier(2, 3, 1), np.zeros(2), cfg, rng)
    assert o.predicted == 1


def test_meta_top_class_abstains():
    # 250 rare classes outvote the only frequent one once merged
    o = outcome_from_counts(ClassCounts.from_counts([6] + [4] * 250), 0.5, 0.001)
    assert o.bounds.top_class == META_CLASS
    assert o.abstained and o.radius <= 0


def test_all_rare_cannot_be_bounded():
    with pytest.raises(ValueError):
        outcome_from_counts(ClassCounts.from_counts([4] * 250), 0.5, 0.001)


def test_radius_matches_bounds():
    o = outcome_from_counts(ClassCounts.from_counts([900, 80, 20]), 0.5, 0.001)
    assert o.bounds.top_class == 0 and o.bounds.runner_class == 1
    assert o.bounds.e0_lower < 0.9 < 0.08 + 0.9 and o.bounds.e1_upper > 0.08
    assert o.bounds.z0 == 0.9 and o.bounds.z1 == 0.08


def test_clamp():
    assert clamp_expectation(1.0, 1000) == 1 - 0.0005
    assert clamp_expectation(0.0, 1000) == 0.0005
    assert clamp_expectation(0.3, 1000) == 0.3


@pytest.mark.parametrize("kw", [{"sigma": 0}, {"n_samples": 10}, {"alpha": 1.0}, {"tau": 0}, {"mode": "soft"}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SmoothingConfig(**kw)
