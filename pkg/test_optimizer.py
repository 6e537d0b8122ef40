"""Adam update rule"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent / 'src'))

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from errors import ParameterError  # noqa: E402
from optimizer import AdamState, adam_step  # noqa: E402


def test_zero_gradient_no_change():
    params = {"w": np.array([0.5, -1.0])}
    adam_step(AdamState(), params, {"w": np.zeros(2)})
    assert params["w"].tolist() == [0.5, -1.0]


def test_first_step_moves_by_learning_rate():
    params = {"w": np.zeros(1)}
    adam_step(AdamState(lr=1e-3), params, {"w": np.ones(1)})
    assert params["w"][0] == pytest.approx(-1e-3, rel=1e-6)


def test_update_in_place():
    w = np.ones(3)
    params = {"w": w}
    adam_step(AdamState(), params, {"w": np.ones(3)})
    assert params["w"] is w
    assert np.all(w < 1.0)


def test_step_bounded():
    rng = np.random.default_rng(0)
    params = {"w": rng.normal(size=50)}
    state = AdamState(lr=1e-3)
    for _ in range(30):
        before = params["w"].copy()
        adam_step(state, params, {"w": rng.normal(scale=100.0, size=50)})
        assert np.max(np.abs(params["w"] - before)) <= 10 * state.lr
    assert state.step == 30


def test_untouched_parameters_keep_values():
    params = {"a": np.ones(2), "b": np.ones(2)}
    adam_step(AdamState(), params, {"a": np.ones(2)})
    assert params["b"].tolist() == [1.0, 1.0]


def test_shape_mismatch():
    with pytest.raises(ParameterError, match="does not match"):
        adam_step(AdamState(), {"w": np.zeros(2)}, {"w": np.zeros(3)})


def test_unknown_parameter():
    with pytest.raises(ParameterError):
        adam_step(AdamState(), {"w": np.zeros(2)}, {"v": np.zeros(2)})


def test_invalid_learning_rate():
    with pytest.raises(ParameterError):
        AdamState(lr=0.0)


def test_minimizes_quadratic():
    params = {"w": np.array([3.0, -2.0])}
    state = AdamState(lr=0.05)
    for _ in range(500):
        adam_step(state, params, {"w": 2.0 * params["w"]})
    assert np.max(np.abs(params["w"])) < 0.05
