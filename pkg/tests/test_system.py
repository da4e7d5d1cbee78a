import numpy as np
import pytest
from loguru import logger
from numpy.testing import assert_allclose, assert_array_equal

from conftest import DATA_DIR, TOY_P, make_component, make_system
from src.environment.component import ActionEffect
from src.environment.config_loader import load_system
from src.environment.simulator import MaintenanceEnv, episode_streams
from src.environment.system import (
    NO_OBSERVATION,
    KOutOfNMode,
    KOutOfNRule,
    SystemState,
    TopologyFailureMode,
    encode_input,
    input_size,
    mode_penalty,
    observe,
    step,
)


def test_zero_cost_when_intact_and_idle(toy_system):
    outcome = step(toy_system, toy_system.initial_state(), [0, 0], np.random.default_rng(0))
    assert outcome.total_cost == 0.0
    assert outcome.next_state.time == 1


def test_cost_identity_and_post_action_losses(toy_system):
    state = SystemState(damage=np.array([2, 3]), rates=np.zeros(2, dtype=int), time=0)
    outcome = step(toy_system, state, [0, 2], np.random.default_rng(1))
    # 第二个构件已更换，损失按动作后状态计
    assert_array_equal(outcome.post_action_damage, [2, 0])
    assert_allclose(outcome.direct_losses, [5.0, 0.0])
    expected = outcome.penalty_factor * outcome.direct_losses.sum() + outcome.maintenance_costs.sum()
    assert outcome.total_cost == pytest.approx(expected)
    assert outcome.total_cost == pytest.approx(15.0)


def test_topology_failure_penalty(system_i):
    # c1、c2 失效 → 第一个并联组失效；c3 失效；c5 失效 → 表达式为真
    damage = np.array([3, 3, 3, 0, 3])
    assert mode_penalty(system_i, damage) == 24.0
    assert mode_penalty(system_i, np.array([3, 0, 0, 0, 3])) == 1.0
    outcome = step(system_i, SystemState(damage, np.zeros(5, dtype=int), 0), [0] * 5, np.random.default_rng(0))
    assert outcome.penalty_factor == 24.0
    assert outcome.total_cost == pytest.approx(24.0 * outcome.direct_losses.sum())


def test_topology_expression_rejects_unknown_syntax():
    with pytest.raises(ValueError):
        TopologyFailureMode("c1 + c2", ["c1", "c2"], 3)
    with pytest.raises(ValueError):
        TopologyFailureMode("c1 and c9", ["c1", "c2"], 3)


def test_k_out_of_n_modes(system_ii):
    assert mode_penalty(system_ii, np.array([0, 1, 2, 1, 0, 0, 1, 2, 0, 1])) == 1.0
    # 3/10 处于失效状态、不足 5 个 ≥ 严重损伤
    assert mode_penalty(system_ii, np.array([3, 3, 3, 0, 0, 0, 1, 1, 0, 0])) == 12.0
    # 5/10 ≥ 严重损伤
    assert mode_penalty(system_ii, np.array([2, 2, 2, 2, 2, 0, 0, 0, 0, 0])) == 2.0
    # 两种模式同时触发
    assert mode_penalty(system_ii, np.array([3, 3, 3, 2, 2, 0, 0, 0, 0, 0])) == 24.0


def test_k_out_of_n_combined_default_is_max():
    mode = KOutOfNMode([KOutOfNRule(2, 0.5, 2.0), KOutOfNRule(3, 0.3, 12.0)])
    assert mode.batch_penalty(np.array([[3, 3, 3, 2, 2, 0, 0, 0, 0, 0]]))[0] == 12.0


def test_perfect_observation_equals_state(toy_system):
    state = SystemState(np.array([1, 3]), np.zeros(2, dtype=int), 1)
    obs = observe(toy_system, state, [0, 0], np.random.default_rng(0))
    assert_array_equal(obs, [1, 3])


def test_noisy_boundary_row_frequencies():
    system = make_system(num_components=1, precision=0.9)
    state = SystemState(np.array([0]), np.zeros(1, dtype=int), 1)
    rng = np.random.default_rng(3)
    draws = np.array([observe(system, state, [0], rng)[0] for _ in range(20000)])
    assert set(np.unique(draws)) <= {0, 1}
    assert np.mean(draws == 0) == pytest.approx(0.9, abs=0.01)


def test_no_inspection_gives_no_observation_and_no_cost():
    system = make_system(precision=0.9, optional_inspection=True, inspection_cost=50.0)
    state = system.initial_state()
    obs = observe(system, state, [0, 0, 0], np.random.default_rng(0))
    assert np.all(obs == NO_OBSERVATION)
    outcome = step(system, state, [0, 0, 0], np.random.default_rng(0))
    assert outcome.inspection_cost == 0.0
    outcome = step(system, state, [0, 0, 1], np.random.default_rng(0))
    assert outcome.inspection_cost == 50.0


def test_step_rejects_bad_action_vector(toy_system):
    with pytest.raises(ValueError):
        step(toy_system, toy_system.initial_state(), [0], np.random.default_rng(0))
    with pytest.raises(ValueError):
        step(toy_system, toy_system.initial_state(), [0, 5], np.random.default_rng(0))


def test_system_i_encoding_length(system_i):
    assert input_size(system_i) == 21
    features = encode_input(system_i.initial_state(), system_i)
    assert features.shape == (21,)
    assert features[-1] == 0.0
    end = SystemState(np.zeros(5, dtype=int), np.zeros(5, dtype=int), system_i.horizon)
    assert encode_input(end, system_i)[-1] == 1.0


def test_system_ii_encoding_includes_rates(system_ii):
    assert input_size(system_ii) == 10 * 4 + 10 + 1
    features = encode_input(system_ii.initial_belief(), system_ii)
    assert np.all((features >= 0) & (features <= 1))


def test_belief_features_sum_to_one(noisy_system):
    env = MaintenanceEnv(noisy_system)
    context = env.reset(5)
    for _ in range(3):
        _, context, _ = env.step([0, 1])
        blocks = context.features[: noisy_system.num_components * 4].reshape(-1, 4)
        assert_allclose(blocks.sum(axis=1), 1.0, atol=1e-12)


def test_pomdp_with_perfect_precision_replays_mdp(system_ii):
    mdp = MaintenanceEnv(system_ii, observable=True)
    pomdp = MaintenanceEnv(system_ii, observable=False)
    actions = [np.array([(t + l) % 4 for l in range(10)]) for t in range(system_ii.horizon)]
    for env in (mdp, pomdp):
        env.reset(11)
    for a in actions:
        out_m, _, done_m = mdp.step(a)
        out_p, ctx_p, done_p = pomdp.step(a)
        assert_array_equal(out_m.next_state.damage, out_p.next_state.damage)
        assert out_m.total_cost == out_p.total_cost
        assert done_m == done_p
        assert_array_equal(ctx_p.belief.argmax(axis=1), out_p.next_state.damage)


def test_do_nothing_expected_damage_is_non_decreasing(system_ii):
    env = MaintenanceEnv(system_ii)
    idle = np.zeros(10, dtype=int)
    means = np.zeros(system_ii.horizon + 1)
    episodes = 200
    for e in range(episodes):
        env.reset(e)
        means[0] += env.state.damage.mean()
        for t in range(system_ii.horizon):
            out, _, _ = env.step(idle)
            means[t + 1] += out.next_state.damage.mean()
    means /= episodes
    assert np.all(np.diff(means) >= -0.05)
    assert means[-1] > means[0]


def test_episode_streams_are_independent():
    streams = episode_streams(7)
    assert set(streams) == {"transition", "observation", "load"}
    again = episode_streams(7)
    assert streams["transition"].random() == again["transition"].random()
    assert streams["transition"].random() != streams["observation"].random()


def test_failed_repair_still_updates_rate():
    actions = [ActionEffect("do_nothing"), ActionEffect("major_repair", state_shift=1, rate_shift=-5, success_prob=0.0)]
    family = np.repeat(TOY_P[np.newaxis], 21, axis=0)
    comp = make_component(transitions=family, actions=actions, maintenance_cost=(0.0, 4.0))
    system = make_system(num_components=1, components=[comp])
    state = SystemState(np.array([2]), np.array([12]), 0)
    outcome = step(system, state, [1], np.random.default_rng(0))
    assert not outcome.repair_success[0]
    assert_array_equal(outcome.post_action_damage, [2])
    assert_array_equal(outcome.next_state.rates, [7])


def test_loader_reports_success_in_log():
    messages = []
    sink = logger.add(messages.append, level="SUCCESS", format="{message}")
    try:
        load_system(str(DATA_DIR / "environments" / "system_i.json"))
    finally:
        logger.remove(sink)
    assert any(m.startswith("✓ 已加载 system_i") for m in messages)
