import json

import numpy as np
import pytest

from geocert.data import synth_dataset
from geocert.gradient import finite_difference_gradient
from geocert.model import (
    CapabilityError,
    MlpParams,
    TrainConfig,
    accuracy,
    input_gradient,
    load_checkpoint,
    save_checkpoint,
    train_noise_augmented,
)
from geocert.oracle import ThresholdModel


def test_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    params = MlpParams.init([4, 8, 8, 3], rng)
    for b in params.biases:
        b += rng.normal(scale=0.2, size=b.shape)
    X = rng.uniform(size=(5, 4))
    seed = rng.normal(size=(5, 3))
    analytic = params.input_gradient(X, seed)
    for i in range(5):
        fd = finite_difference_gradient(lambda z: float(params.forward(z[None])[0] @ seed[i]), X[i], 1e-6)
        assert np.allclose(analytic[i], fd, atol=1e-7)


def test_forward_shape_and_dimension_check():
    params = MlpParams.init([3, 5, 2], np.random.default_rng(1))
    assert params.forward(np.zeros((7, 3))).shape == (7, 2)
    with pytest.raises(ValueError):
        params.forward(np.zeros((1, 4)))


def test_bad_layers():
    with pytest.raises(ValueError):
        MlpParams([2, 3], [np.zeros((3, 2))], [np.zeros(3)])
    with pytest.raises(ValueError):
        MlpParams([2, 1], [np.zeros((2, 1))], [np.zeros(1)])


def test_capability_dispatch():
    with pytest.raises(CapabilityError):
        input_gradient(ThresholdModel(0.5), np.zeros((1, 1)), np.ones((1, 2)))


def test_training_separates_blobs():
    train = synth_dataset("blobs", 2, 400, seed=0)
    test = synth_dataset("blobs", 2, 200, seed=1)
    history = []
    params = train_noise_augmented(train, TrainConfig(epochs=20, seed=0), history)
    assert accuracy(params, test) >= 0.95
    assert history[-1] < history[0]


def test_training_is_deterministic():
    data = synth_dataset("wedge", 2, 200, seed=3)
    cfg = TrainConfig(epochs=3, seed=9)
    a, b = train_noise_augmented(data, cfg), train_noise_augmented(data, cfg)
    assert all(np.array_equal(x, y) for x, y in zip(a.weights, b.weights))


def test_zero_epochs_returns_initialisation():
    data = synth_dataset("wedge", 2, 50, seed=3)
    params = train_noise_augmented(data, TrainConfig(epochs=0, seed=2, hidden=(4,)))
    fresh = MlpParams.init([2, 4, 2], np.random.default_rng(2))
    assert all(np.array_equal(x, y) for x, y in zip(params.weights, fresh.weights))


def test_checkpoint_roundtrip(tmp_path):
    params = MlpParams.init([3, 6, 4], np.random.default_rng(5))
    params.biases[0] += 0.125
    path = tmp_path / "sub" / "m.json"
    save_checkpoint(params, path)
    back = load_checkpoint(path)
    X = np.random.default_rng(6).uniform(size=(10, 3))
    assert np.array_equal(back.forward(X), params.forward(X))
    doc = json.loads(path.read_text())
    assert doc["version"] == 1 and doc["layer_dims"] == [3, 6, 4]
    # row-major (fan_in, fan_out)
    assert doc["layers"][0]["weight"][:6] == params.weights[0][0].tolist()


def test_checkpoint_version_rejected(tmp_path):
    path = tmp_path / "m.json"
    save_checkpoint(MlpParams.init([2, 2], np.random.default_rng(0)), path)
    doc = json.loads(path.read_text())
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(path)
