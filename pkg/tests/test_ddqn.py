import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import random_batch
from src.agents.ddqn import DdqnAgent, ddqn_loss_and_grad, ddqn_target, ddqn_update, select_action_ddqn
from src.neural.network import grad_check

INPUT = 5
UNITS = (2, 2)


@pytest.fixture
def agent():
    return DdqnAgent(INPUT, UNITS, hidden_sizes=(8,), gamma=0.9, lr=1e-2, rng=np.random.default_rng(0))


def test_full_exploration_is_uniform(agent):
    rng = np.random.default_rng(1)
    features = np.zeros(INPUT)
    counts = np.zeros(4)
    for _ in range(8000):
        actions, mu = agent.behave(features, 1.0, rng)
        counts[agent.units_to_joint(actions)] += 1
        assert mu[0] == pytest.approx(0.25)
    assert np.all(np.abs(counts - 2000) < 200)


def test_greedy_behaviour_picks_min_cost(agent):
    features = np.random.default_rng(2).random(INPUT)
    actions, mu = agent.behave(features, 0.0, np.random.default_rng(3))
    assert agent.units_to_joint(actions) == int(np.argmin(agent.q_values(features)[0]))
    assert mu[0] == 1.0


def test_epsilon_out_of_range(agent):
    with pytest.raises(ValueError):
        select_action_ddqn(agent, np.zeros(INPUT), 1.5, np.random.default_rng(0))


def test_joint_index_round_trip(agent):
    for index in range(agent.num_actions):
        assert agent.units_to_joint(agent.joint_to_units(index)) == index


def test_terminal_and_zero_discount_targets(agent):
    rng = np.random.default_rng(4)
    batch = random_batch(rng, INPUT, UNITS, behavior_width=1, terminal=[True] * 8)
    assert_allclose(ddqn_target(batch, agent.online, agent.target, 0.9), batch.costs)
    batch = random_batch(rng, INPUT, UNITS, behavior_width=1)
    assert_allclose(ddqn_target(batch, agent.online, agent.target, 0.0), batch.costs)


def test_target_evaluates_online_choice(agent):
    rng = np.random.default_rng(5)
    agent.target.params[-1] += rng.normal(size=agent.target.params[-1].shape)
    batch = random_batch(rng, INPUT, UNITS, behavior_width=1)
    best = np.argmin(agent.online.predict(batch.next_features), axis=1)
    expected = batch.costs + 0.9 * agent.target.predict(batch.next_features)[np.arange(8), best]
    assert_allclose(ddqn_target(batch, agent.online, agent.target, 0.9), expected)


def test_zero_error_leaves_network_unchanged():
    agent = DdqnAgent(INPUT, UNITS, hidden_sizes=(8,), gamma=0.0, rng=np.random.default_rng(6))
    rng = np.random.default_rng(7)
    batch = random_batch(rng, INPUT, UNITS, behavior_width=1)
    q = agent.q_values(batch.features)
    joint = [agent.units_to_joint(a) for a in batch.actions]
    batch.costs = q[np.arange(len(batch)), joint]
    before = [p.copy() for p in agent.online.params]
    assert ddqn_update(agent, batch) == pytest.approx(0.0, abs=1e-20)
    for a, b in zip(agent.online.params, before):
        assert_allclose(a, b)


def test_target_sync_period(agent):
    rng = np.random.default_rng(8)
    for step in range(1, 14):
        ddqn_update(agent, random_batch(rng, INPUT, UNITS, behavior_width=1))
        same = all(np.array_equal(a, b) for a, b in zip(agent.online.params, agent.target.params))
        assert same == (step == 13)


def test_loss_gradient_matches_finite_differences(agent):
    rng = np.random.default_rng(9)
    batch = random_batch(rng, INPUT, UNITS, behavior_width=1)
    y = rng.uniform(0.0, 3.0, size=len(batch))

    def loss_fn(net, x):
        loss, grad, _ = ddqn_loss_and_grad(agent, batch, y)
        return loss, grad

    assert grad_check(agent.online, batch.features, loss_fn) < 1e-4


def test_update_reduces_loss_on_fixed_batch(agent):
    rng = np.random.default_rng(10)
    batch = random_batch(rng, INPUT, UNITS, behavior_width=1, terminal=[True] * 8)
    first = ddqn_update(agent, batch)
    for _ in range(200):
        last = ddqn_update(agent, batch)
    assert last < first


def test_save_and_load(tmp_path, agent):
    rng = np.random.default_rng(11)
    for _ in range(3):
        ddqn_update(agent, random_batch(rng, INPUT, UNITS, behavior_width=1))
    agent.save(str(tmp_path))
    loaded = DdqnAgent.load(str(tmp_path), gamma=0.9)
    x = rng.random((4, INPUT))
    assert_allclose(loaded.q_values(x), agent.q_values(x))
    assert_allclose(loaded.target.predict(x), agent.target.predict(x))
    assert loaded.update_steps == 3


@pytest.mark.parametrize("hidden", [(40, 40), (100, 100), (350, 350)])
def test_gradients_at_experiment_sizes(hidden):
    units = (2,) * 5
    agent = DdqnAgent(21, units, hidden_sizes=hidden, gamma=0.99, rng=np.random.default_rng(0))
    rng = np.random.default_rng(12)
    batch = random_batch(rng, 21, units, behavior_width=1)
    y = rng.uniform(0.0, 3.0, size=len(batch))

    def loss_fn(net, x):
        loss, grad, _ = ddqn_loss_and_grad(agent, batch, y)
        return loss, grad

    assert grad_check(agent.online, batch.features, loss_fn, max_params=150, rng=np.random.default_rng(1)) < 1e-4
