import math

import numpy as np
import pytest

from geocert.geometry import CertifiedBall, DomainBox
from geocert.oracle import (
    ConstantClassifier,
    LinearModel,
    ThresholdModel,
    linear_certified_radius_exact,
    linear_expectation_exact,
    multinomial_coverage_sim,
    union_boundary_distance,
)


def test_linear_exact_values():
    m = LinearModel(np.array([3.0, 4.0]), -1.0)
    x = np.array([0.6, 0.2])
    assert linear_certified_radius_exact(m, x) == pytest.approx(0.32)
    assert linear_expectation_exact(m, x, 0.32) == pytest.approx(0.8413447460685429)


def test_linear_forward_classes():
    m = LinearModel(np.array([1.0]), -0.5)
    assert np.argmax(m.forward(np.array([[0.9], [0.1]])), axis=1).tolist() == [0, 1]
    with pytest.raises(ValueError):
        LinearModel(np.zeros(2))


def test_threshold_and_constant():
    assert np.argmax(ThresholdModel(0.5).forward(np.array([[0.2], [0.8]])), axis=1).tolist() == [0, 1]
    assert np.argmax(ConstantClassifier(3, 5, 4).forward(np.zeros((2, 3))), axis=1).tolist() == [4, 4]


def test_single_ball_distance():
    d = union_boundary_distance([0.1, 0.0], [CertifiedBall(np.zeros(2), 1.0)], resolution=2000)
    assert d == pytest.approx(0.9, abs=1e-6)


def test_single_ball_3d():
    d = union_boundary_distance([0.0, 0.2, 0.0], [CertifiedBall(np.zeros(3), 0.5)], resolution=5000)
    assert d == pytest.approx(0.3, abs=1e-4)


def test_two_balls_ring():
    balls = [CertifiedBall(np.array([-0.5, 0.0]), 1.0), CertifiedBall(np.array([0.3, 0.0]), 0.9)]
    d = union_boundary_distance([0.0, 0.0], balls, resolution=20_000)
    assert d == pytest.approx(math.sqrt(0.73125), abs=1e-4)


def test_domain_excludes_outside_points():
    ball = [CertifiedBall(np.array([0.8, 0.5]), 0.5)]
    d = union_boundary_distance([0.9, 0.5], ball, DomainBox(2), resolution=20_000)
    assert d == pytest.approx(math.sqrt(0.22), abs=1e-4)


def test_oracle_rejects_bad_input():
    with pytest.raises(ValueError):
        union_boundary_distance([0.0] * 4, [CertifiedBall(np.zeros(4), 1.0)])
    with pytest.raises(ValueError):
        union_boundary_distance([5.0, 0.0], [CertifiedBall(np.zeros(2), 1.0)])


def test_coverage_sim_with_coalescing():
    cov = multinomial_coverage_sim([0.996, 0.002, 0.001, 0.001], 1000, 0.001, 1000, seed=1)
    assert cov >= 0.99


def test_coverage_sim_validation():
    with pytest.raises(ValueError):
        multinomial_coverage_sim([0.5, 0.6], 100, 0.01, 1000)
    with pytest.raises(ValueError):
        multinomial_coverage_sim([0.5, 0.5], 100, 0.01, 10)
