import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.neural.optimizer import Adam, AdamState, TwoStageLearningRate, adam_step


def test_zero_gradient_leaves_parameters():
    params = [np.array([1.0, -2.0]), np.array([[0.5]])]
    before = [p.copy() for p in params]
    optimizer = Adam(params, lr=0.1)
    for _ in range(5):
        optimizer.step([np.zeros_like(p) for p in params])
    for a, b in zip(params, before):
        assert_allclose(a, b)


def test_first_step_moves_by_learning_rate():
    params = [np.array([1.0, -1.0, 3.0])]
    optimizer = Adam(params, lr=0.01)
    optimizer.step([np.array([2.0, -0.5, 7.0])])
    assert_allclose(params[0], [0.99, -0.99, 2.99], atol=1e-8)


def test_converges_on_quadratic():
    target = np.array([3.0, -1.5, 0.25])
    params = [np.zeros(3)]
    optimizer = Adam(params, lr=0.01)
    for _ in range(5000):
        optimizer.step([params[0] - target])
    assert_allclose(params[0], target, atol=0.05)


def test_updates_in_place():
    p = np.zeros(2)
    state = AdamState.for_params([p], lr=0.1)
    adam_step([p], [np.ones(2)], state)
    assert state.step == 1
    assert np.all(p < 0)


def test_shape_mismatch_raises():
    state = AdamState.for_params([np.zeros(2)])
    with pytest.raises(ValueError):
        adam_step([np.zeros(2)], [np.zeros(3)], state)


def test_learning_rate_setter():
    optimizer = Adam([np.zeros(1)], lr=1e-3)
    optimizer.lr = 1e-4
    assert optimizer.state.lr == 1e-4


def test_two_stage_learning_rate():
    schedule = TwoStageLearningRate(initial=1e-3, final=1e-4, decay_episode=100)
    assert schedule.value(0) == 1e-3
    assert schedule.value(99) == 1e-3
    assert schedule.value(100) == 1e-4
