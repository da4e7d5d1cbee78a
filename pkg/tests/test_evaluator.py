import numpy as np
import pytest

from conftest import make_component, make_system
from src.environment.simulator import MaintenanceEnv, Policy
from src.evaluation.evaluator import (
    EvaluationReport,
    action_agreement,
    collect_traces,
    confidence_half_width,
    evaluate_policy,
    rollout,
)
from src.planning.value_iteration import ExactPolicy, enumerate_joint, evaluate_policy_exact, value_iteration_finite


class ConstantPolicy(Policy):
    def __init__(self, actions, name="constant"):
        self.actions = np.asarray(actions, dtype=int)
        self.name = name

    def act(self, context):
        return self.actions.copy()


def test_zero_cost_system_has_zero_interval():
    comps = [make_component(f"c{i}", direct_loss=(0, 0, 0, 0), maintenance_cost=(0, 0, 0)) for i in range(2)]
    report = evaluate_policy(ConstantPolicy([0, 0]), MaintenanceEnv(make_system(components=comps)), 20, seed=1)
    assert report.mean == 0.0
    assert report.ci == 0.0
    assert report.n_episodes == 20


def test_discounting_starts_at_first_step(toy_system):
    total, rows = rollout(ConstantPolicy([2, 2]), MaintenanceEnv(toy_system), seed=3)
    assert rows == []
    assert total == pytest.approx(20.0 * sum(0.95 ** t for t in range(5)))


def test_confidence_half_width():
    assert confidence_half_width(np.array([1.0, 3.0])) == pytest.approx(1.96 * np.sqrt(2.0) / np.sqrt(2.0))
    with pytest.raises(ValueError):
        confidence_half_width(np.array([1.0]))


def test_normalization_divisor():
    report = EvaluationReport("p", 10.0, 2.0, np.array([9.0, 11.0]))
    assert report.normalized_mean is None
    scaled = report.with_divisor(4.0)
    assert scaled.normalized_mean == 2.5
    assert scaled.normalized_ci == 0.5
    with pytest.raises(ValueError):
        report.with_divisor(0.0)


def test_divisor_keeps_raw_cost_exact(noisy_system):
    raw = evaluate_policy(ConstantPolicy([1, 0]), MaintenanceEnv(noisy_system), 7, seed=4)
    scaled = evaluate_policy(ConstantPolicy([1, 0]), MaintenanceEnv(noisy_system), 7, seed=4, divisor=3.0 / 7.0)
    assert scaled.mean == raw.mean
    assert scaled.ci == raw.ci
    assert scaled.normalized_mean == raw.mean / (3.0 / 7.0)


def test_common_random_numbers_across_policies(noisy_system):
    env = MaintenanceEnv(noisy_system)
    a = evaluate_policy(ConstantPolicy([0, 0]), env, 10, seed=5)
    b = evaluate_policy(ConstantPolicy([0, 0], name="again"), env, 10, seed=5)
    assert np.array_equal(a.costs, b.costs)
    c = evaluate_policy(ConstantPolicy([0, 0]), env, 10, seed=6)
    assert not np.array_equal(a.costs, c.costs)


def test_evaluation_needs_two_episodes(toy_system):
    with pytest.raises(ValueError):
        evaluate_policy(ConstantPolicy([0, 0]), MaintenanceEnv(toy_system), 1, seed=0)


def test_monte_carlo_matches_exact_value():
    system = make_system(num_components=2, horizon=5)
    mdp = enumerate_joint(system)
    solution = value_iteration_finite(mdp)
    report = evaluate_policy(ExactPolicy(mdp, solution), MaintenanceEnv(system), 2000, seed=7)
    assert abs(report.mean - solution.initial_value(mdp)) < 4 * report.ci + 1e-9
    idle = np.full_like(solution.policy, mdp.action_index([0, 0]))
    idle_report = evaluate_policy(ConstantPolicy([0, 0]), MaintenanceEnv(system), 2000, seed=7)
    assert abs(idle_report.mean - evaluate_policy_exact(mdp, idle)) < 4 * idle_report.ci + 1e-9


def test_agreement_bounds(toy_system):
    env = MaintenanceEnv(toy_system)
    idle, replace = ConstantPolicy([0, 0]), ConstantPolicy([2, 2])
    assert action_agreement(idle, idle, env, 5, seed=0) == 1.0
    assert action_agreement(idle, replace, env, 5, seed=0) == 0.0
    assert action_agreement(idle, ConstantPolicy([0, 2]), env, 5, seed=0) == 0.5


def test_traces_cover_every_component_and_step(noisy_system):
    rows = collect_traces(ConstantPolicy([1, 0]), MaintenanceEnv(noisy_system), 3, seed=2)
    assert len(rows) == 3 * noisy_system.horizon * 2
    assert {r.episode for r in rows} == {0, 1, 2}
    assert [r.time for r in rows[:10]] == [0, 0, 1, 1, 2, 2, 3, 3, 4, 4]
    assert all(r.action == (1 if r.component == 0 else 0) for r in rows)
    assert all(r.observation is not None for r in rows)
    assert all(0.0 <= r.expected_state <= 3.0 for r in rows)
