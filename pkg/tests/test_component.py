import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import TOY_P, make_component
from src.environment.component import (
    ActionEffect,
    ComponentModel,
    ObservationModel,
    effective_transition_matrix,
    interpolated_transitions,
)


def test_do_nothing_returns_base_matrix(toy_component):
    assert_allclose(effective_transition_matrix(toy_component, 0, 0), TOY_P)


def test_replace_rows_repeat_first_row(toy_component):
    M = effective_transition_matrix(toy_component, 2, 0)
    for row in M:
        assert_allclose(row, TOY_P[0])


def test_probabilistic_repair_mixes_rows(toy_component):
    M = effective_transition_matrix(toy_component, 1, 0)
    assert_allclose(M[2], 0.95 * TOY_P[1] + 0.05 * TOY_P[2], atol=1e-15)
    # 状态 0 无法再改善
    assert_allclose(M[0], TOY_P[0])


def test_effective_matrices_are_row_stochastic():
    family = interpolated_transitions(TOY_P, np.array([
        [0.4, 0.3, 0.3, 0.0],
        [0.0, 0.4, 0.4, 0.2],
        [0.0, 0.0, 0.5, 0.5],
        [0.0, 0.0, 0.0, 1.0],
    ]), max_rate=10)
    comp = ComponentModel(
        "nonstationary", family,
        [ActionEffect("do_nothing"), ActionEffect("major", state_shift=1, rate_shift=-5, success_prob=0.95),
         ActionEffect("replace", reset=True)],
        np.zeros(4), np.zeros(3),
    )
    for a in range(comp.num_actions):
        for tau in range(0, 15):
            M = effective_transition_matrix(comp, a, tau)
            assert np.all(M >= 0)
            assert np.abs(M.sum(axis=1) - 1.0).max() < 1e-9


def test_rate_beyond_table_clamps_to_last(toy_component):
    assert_allclose(effective_transition_matrix(toy_component, 0, 40), TOY_P)


def test_invalid_action_and_negative_rate(toy_component):
    with pytest.raises(ValueError):
        effective_transition_matrix(toy_component, 3, 0)
    with pytest.raises(ValueError):
        effective_transition_matrix(toy_component, 0, -1)


def test_rate_dynamics():
    comp = ComponentModel(
        "c", np.repeat(TOY_P[np.newaxis], 21, axis=0),
        [ActionEffect("do_nothing"), ActionEffect("minor", state_shift=1),
         ActionEffect("major", state_shift=1, rate_shift=-5), ActionEffect("replace", reset=True)],
        np.zeros(4), np.zeros(4),
    )
    assert comp.next_rate(0, 3) == 4
    assert comp.next_rate(1, 3) == 4
    assert comp.next_rate(2, 3) == 0
    assert comp.next_rate(2, 12) == 7
    assert comp.next_rate(3, 12) == 0
    assert comp.next_rate(0, 20) == 20


def test_validation_rejects_healing_and_bad_rows():
    healing = TOY_P.copy()
    healing[1] = [0.1, 0.5, 0.3, 0.1]
    with pytest.raises(ValueError):
        make_component(transitions=healing)
    bad = TOY_P.copy()
    bad[0, 0] = 0.8
    with pytest.raises(ValueError):
        make_component(transitions=bad)
    leaky = TOY_P.copy()
    leaky[3] = [0.0, 0.0, 0.1, 0.9]
    with pytest.raises(ValueError):
        make_component(transitions=leaky)


def test_success_prob_range():
    with pytest.raises(ValueError):
        ActionEffect("bad", state_shift=1, success_prob=1.2)


def test_banded_observation_matrix():
    obs = ObservationModel.banded(4, 0.9)
    assert_allclose(obs.matrix[0], [0.9, 0.1, 0.0, 0.0])
    assert_allclose(obs.matrix[1], [0.05, 0.9, 0.05, 0.0])
    assert_allclose(obs.matrix[3], [0.0, 0.0, 0.1, 0.9])
    assert np.abs(obs.matrix.sum(axis=1) - 1.0).max() < 1e-9
    assert ObservationModel.banded(25, 1.0).is_perfect
    assert_allclose(ObservationModel.banded(25, 1.0).matrix, np.eye(25))


def test_interpolation_endpoints():
    final = np.array([
        [0.5, 0.3, 0.2, 0.0],
        [0.0, 0.5, 0.3, 0.2],
        [0.0, 0.0, 0.6, 0.4],
        [0.0, 0.0, 0.0, 1.0],
    ])
    family = interpolated_transitions(TOY_P, final, 4)
    assert family.shape == (5, 4, 4)
    assert_allclose(family[0], TOY_P)
    assert_allclose(family[-1], final)
    assert_allclose(family[2], 0.5 * (TOY_P + final))
