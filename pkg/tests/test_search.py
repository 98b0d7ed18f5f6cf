import math

import numpy as np
import pytest

from geocert import search as search_mod
from geocert.oracle import ConstantClassifier, LinearModel
from geocert.search import (
    SearchConfig,
    bb_ascent,
    bb_step,
    certify_geometric,
    double_transitive_search,
    pick_best,
    single_bubble_loop,
)
from geocert.smoothing import CertifyOutcome, SmoothingConfig
from geocert.stats import ClassCounts, ExpectationBounds


class TestBBStep:
    def test_first_iteration(self):
        assert bb_step(None, None, [0.0], [1.0], 0.01) == 0.01

    def test_quadratic(self):
        # g = -2(x - 0.6): |dx.dg|/|dg|^2 = 1/2
        x0, x1 = np.array([0.0]), np.array([0.1])
        g = lambda x: -2 * (x - 0.6)
        assert bb_step(x0, g(x0), x1, g(x1), 0.01) == pytest.approx(0.5)

    def test_clipping(self):
        assert bb_step([0.0], [1.0], [1.0], [1.0 + 1e-5], 0.01) == 1.0
        assert bb_step([0.0], [0.0], [1e-9], [1.0], 0.01) == 1e-6

    def test_degenerate_falls_back(self):
        assert bb_step([0.0], [1.0], [0.5], [1.0], 0.01) == 0.01


def quadratic(target):
    return lambda x: (1.0 - float(np.sum((x - target) ** 2)), -2.0 * (x - target))


def test_bb_ascent_converges(rng):
    target = np.array([0.3, 0.7, 0.5])
    best, x, trace = bb_ascent(quadratic(target), np.array([0.6, 0.4, 0.2]), 50, 0.01, rng)
    assert np.linalg.norm(x - target) < 1e-3
    assert best == pytest.approx(1.0, abs=1e-6)
    assert trace.steps[0] == pytest.approx(0.01)


def test_bb_ascent_zero_iterations_keeps_incumbent(rng):
    best, x, trace = bb_ascent(quadratic(np.zeros(2)), np.array([0.5, 0.5]), 0, 0.01, rng, best_value=0.3)
    assert best == 0.3 and np.array_equal(x, [0.5, 0.5]) and not trace.points


def test_bb_ascent_stays_in_box(rng):
    _, _, trace = bb_ascent(quadratic(np.array([5.0, 5.0])), np.array([0.9, 0.9]), 20, 0.01, rng)
    pts = np.array(trace.points)
    assert pts.min() >= 0 and pts.max() <= 1


def test_bb_ascent_random_step_on_flat(rng):
    fn = lambda x: (0.0, np.zeros_like(x))
    _, _, trace = bb_ascent(fn, np.array([0.5, 0.5]), 3, 0.01, rng)
    assert trace.steps == pytest.approx([0.01] * 3)


def test_pick_best_ties():
    assert pick_best(0.4, 0.4, 0.4, 0.4) == (0.4, "cohen")
    assert pick_best(0.4, 0.5, 0.5, 0.1) == (0.5, "single")
    assert pick_best(0.4, 0.5, 0.6, 0.7) == (0.7, "boundary")


def test_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(s_grid=2)
    with pytest.raises(ValueError):
        SearchConfig(mode="exact")


FAST = SearchConfig(iterations=6, search_n_samples=500, final_n_samples=1000, s_grid=5, golden_steps=2)


def test_constant_classifier_gains_nothing_inward(rng):
    # every ball is the same saturated size; moving away only costs distance
    m = ConstantClassifier(2, 2, 0)
    rep = certify_geometric(m, np.array([0.5, 0.5]), 0, SmoothingConfig(sigma=0.25), FAST, rng)
    assert rep.r_best >= rep.r_cohen > 0
    assert rep.correct


def test_zero_iterations_is_cohen(rng):
    m = LinearModel(np.array([1.0, 0.0]), -0.3)
    rep = certify_geometric(m, np.array([0.7, 0.5]), 0, SmoothingConfig(), SearchConfig(iterations=0), rng)
    assert rep.r_best == rep.r_cohen and rep.best_method == "cohen"
    assert rep.r_single == rep.r_cohen and rep.r_boundary == 0.0


def test_abstention_short_circuits(rng):
    m = LinearModel(np.array([1.0, 0.0]), -0.5)
    rep = certify_geometric(m, np.array([0.5, 0.5]), 1, SmoothingConfig(), FAST, rng)
    assert rep.abstained and rep.r_best == 0.0 and rep.iterations_used == 0 and not rep.correct


def test_linear_model_never_worse(rng):
    gen = np.random.default_rng(0)
    for i in range(5):
        m = LinearModel(gen.normal(size=2), float(gen.normal()) * 0.3)
        x = gen.uniform(size=2)
        rep = certify_geometric(m, x, 0, SmoothingConfig(sigma=0.25), FAST, rng)
        assert rep.r_best >= rep.r_cohen


def test_single_loop_moves_away_from_boundary(rng):
    m = LinearModel(np.array([1.0, 0.0]), -0.3)
    x = np.array([0.45, 0.5])
    cfg = SearchConfig(iterations=15, search_n_samples=2000)
    r, x2, trace = single_bubble_loop(m, x, 0, SmoothingConfig(sigma=0.25), cfg, rng, r_initial=-math.inf)
    assert len(trace.points) == 15
    assert x2[0] >= x[0]


def _outcome(radius, cls=0):
    b = ExpectationBounds(cls, 1, 0.9, 0.1, 0.001)
    return CertifyOutcome(b, radius, radius <= 0, ClassCounts.from_counts([900, 100]))


def test_double_search_recovers_worked_geometry(monkeypatch, rng):
    # only x3 = (0.8, 0.5) certifies, with r3 = 0.9; with d2 = 0.5 and r2 = 1.0
    # that is the worked layout d3 = 0.3 whose radius is sqrt(0.73125)
    def fake(model, x, cfg, rng):
        return _outcome(0.9) if np.allclose(x, [0.8, 0.5]) else _outcome(-1.0)

    monkeypatch.setattr(search_mod, "certify", fake)
    x1, x2 = np.array([0.5, 0.5]), np.array([0.0, 0.5])
    cfg = SearchConfig(s_grid=11, golden_steps=3)
    r, x3 = double_transitive_search(None, x1, x2, 0.5, 0, SmoothingConfig(), cfg, rng)
    assert x3 == pytest.approx([0.8, 0.5])
    assert r == pytest.approx(0.855131568824353, abs=1e-12)


def test_double_search_wrong_class_falls_back(monkeypatch, rng):
    monkeypatch.setattr(search_mod, "certify", lambda *a, **k: _outcome(0.9, cls=1))
    r, x3 = double_transitive_search(None, np.array([0.5, 0.5]), np.array([0.0, 0.5]), 0.5, 0,
                                     SmoothingConfig(), SearchConfig(), rng)
    assert (r, x3) == (0.5, None)


def test_determinism():
    m = LinearModel(np.array([1.0, -1.0]), 0.1)
    x = np.array([0.6, 0.3])
    a = certify_geometric(m, x, 0, SmoothingConfig(sigma=0.25), FAST, np.random.default_rng(7))
    b = certify_geometric(m, x, 0, SmoothingConfig(sigma=0.25), FAST, np.random.default_rng(7))
    assert (a.r_cohen, a.r_single, a.r_double, a.r_boundary) == (b.r_cohen, b.r_single, b.r_double, b.r_boundary)
