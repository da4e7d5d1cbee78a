import csv
import json
import math

import pytest

from conftest import DATA_DIR
from src.harness.cli import main
from src.harness.experiment import ExperimentConfig, derive_seed, run_experiment, training_config

ENVIRONMENT = {
    "name": "tiny",
    "horizon": 4,
    "discount": 0.95,
    "observation": {"precision": 1.0},
    "actions": [
        {"name": "do_nothing"},
        {"name": "minor_repair", "state_shift": 1, "success_prob": 0.95},
        {"name": "major_repair", "state_shift": 2},
        {"name": "replace", "reset": True},
    ],
    "component_types": {
        "A": {
            "max_rate": 0,
            "initial_transition": [[0.7, 0.2, 0.1, 0.0], [0.0, 0.6, 0.3, 0.1], [0.0, 0.0, 0.8, 0.2],
                                   [0.0, 0.0, 0.0, 1.0]],
            "direct_loss": [0.0, 1.0, 5.0, 20.0],
            "maintenance_cost": [0.0, 2.0, 5.0, 12.0],
        }
    },
    "components": [{"name": "c1", "type": "A"}, {"name": "c2", "type": "A"}],
    "mode": {"kind": "topology", "expression": "c1 and c2", "failure_penalty": 24.0},
}

AGENT = {
    "kind": "dcmac",
    "runs": 2,
    "actor_hidden": [8],
    "critic_hidden": [8],
    "training": {"episodes": 4, "batch_size": 4, "eval_every": 2, "eval_episodes": 2, "eval_seed": 3},
}


def write_json(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


@pytest.fixture
def experiment_dir(tmp_path, monkeypatch):
    monkeypatch.delenv("RECORD_WALL_CLOCK", raising=False)
    monkeypatch.chdir(tmp_path)
    write_json(tmp_path / "tiny.json", ENVIRONMENT)
    return tmp_path


def full_config(directory):
    return write_json(directory / "experiment.json", {
        "name": "tiny_full",
        "environment": "tiny.json",
        "seed": 5,
        "exact": True,
        "agent": AGENT,
        "baselines": {"family": "state_map", "n_eval": 2, "rate_grid": [1, None]},
        "evaluation": {"n_episodes": 4, "seed": 1, "trace_episodes": 1, "agreement_episodes": 2},
    })


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def test_reruns_are_byte_identical(experiment_dir):
    path = full_config(experiment_dir)
    first = run_experiment(ExperimentConfig.from_file(str(path), output_dir=str(experiment_dir / "a")))
    second = run_experiment(ExperimentConfig.from_file(str(path), output_dir=str(experiment_dir / "b")))
    produced = sorted(p.relative_to(first) for p in first.rglob("*.csv"))
    assert {str(p) for p in produced} >= {"exact_solution.csv", "exact_value.csv", "learning_curve.csv",
                                          "baselines_report.csv", "evaluation.csv", "agreement.csv"}
    for rel in produced:
        assert (first / rel).read_bytes() == (second / rel).read_bytes(), rel
    assert (first / "checkpoints" / "final" / "actor.npz").exists()

    curve = read_rows(first / "learning_curve.csv")
    assert [(r["run"], r["episode"]) for r in curve] == [("0", "2"), ("0", "4"), ("1", "2"), ("1", "4")]
    assert all(r["wall_clock_s"] == "" for r in curve)

    evaluation = read_rows(first / "evaluation.csv")
    assert [r["policy"] for r in evaluation] == ["exact", "dcmac", "CBM-I", "CBM-II", "TCBM-I", "TCBM-II"]
    exact = float(read_rows(first / "exact_value.csv")[0]["initial_value"])
    assert float(evaluation[0]["normalized_mean"]) == pytest.approx(float(evaluation[0]["mean_cost"]) / exact)
    assert 0.0 <= float(read_rows(first / "agreement.csv")[0]["agreement"]) <= 1.0


def test_stages_can_run_separately(experiment_dir):
    path = full_config(experiment_dir)
    config = ExperimentConfig.from_file(str(path), output_dir=str(experiment_dir / "out"))
    with pytest.raises(FileNotFoundError):
        run_experiment(config, {"eval"})
    run_experiment(config, {"train"})
    run_experiment(config, {"agreement"})
    assert (experiment_dir / "out" / "agreement.csv").exists()
    with pytest.raises(ValueError):
        run_experiment(config, {"plot"})


def test_baseline_only_sweep(experiment_dir):
    noisy = dict(ENVIRONMENT, observation={"precision": 0.9})
    write_json(experiment_dir / "tiny.json", noisy)
    path = write_json(experiment_dir / "baselines.json", {
        "name": "tiny_baselines",
        "environment": "tiny.json",
        "seed": 8,
        "baselines": {"family": "state_map", "n_eval": 2, "rate_grid": [None]},
        "evaluation": {"n_episodes": 6, "trace_episodes": 0, "reference": "TCBM-II"},
        "observability_sweep": [1.0, 0.8],
    })
    out = run_experiment(ExperimentConfig.from_file(str(path), output_dir=str(experiment_dir / "base")))
    assert not (out / "traces").exists()
    evaluation = {r["policy"]: r for r in read_rows(out / "evaluation.csv")}
    assert evaluation["TCBM-II"]["precision"] == "0.90000000000000002"
    assert float(evaluation["TCBM-II"]["normalized_mean"]) == pytest.approx(1.0)

    sweep = read_rows(out / "observability_sweep.csv")
    assert len(sweep) == 2 * 4
    voi = read_rows(out / "value_of_information.csv")
    assert all(float(r["cost_difference"]) == 0.0 for r in voi if r["precision"] == "1")
    assert {r["reference_precision"] for r in voi} == {"1"}


def test_config_overrides_and_validation(experiment_dir):
    path = full_config(experiment_dir)
    config = ExperimentConfig.from_file(str(path), seed=11, output_dir="x", episodes=7)
    assert config.seed == 11
    assert config.agent["training"]["episodes"] == 7
    assert AGENT["training"]["episodes"] == 4
    assert config.n_eval == 4 and config.eval_seed == 1
    assert training_config(config.agent["training"]).episodes == 7

    raw = json.loads(path.read_text(encoding="utf-8"))
    del raw["seed"]
    write_json(path, raw)
    with pytest.raises(ValueError):
        ExperimentConfig.from_file(str(path))
    raw["environment"] = "missing.json"
    write_json(path, raw)
    with pytest.raises(FileNotFoundError):
        ExperimentConfig.from_file(str(path), seed=1)


def test_derived_seeds():
    assert derive_seed(5, 1) == derive_seed(5, 1)
    assert derive_seed(5, 1) != derive_seed(5, 2)
    assert derive_seed(5, 1, 0) != derive_seed(5, 1, 1)


def test_cli_exit_codes(experiment_dir):
    path = full_config(experiment_dir)
    assert main(["exact", "--config", str(path), "--out", str(experiment_dir / "cli")]) == 0
    assert (experiment_dir / "cli" / "exact_solution.csv").exists()
    assert main(["exact", "--config", str(experiment_dir / "nope.json")]) == 1
    assert main(["eval", "--config", str(path), "--out", str(experiment_dir / "empty")]) == 1


def shipped(name, directory) -> ExperimentConfig:
    return ExperimentConfig.from_file(str(DATA_DIR / "experiments" / f"{name}.json"), output_dir=str(directory / name))


def mean_costs(out):
    return {row["policy"]: float(row["mean_cost"]) for row in read_rows(out / "evaluation.csv")}


@pytest.mark.slow
@pytest.mark.parametrize("name,agent,min_agreement", [
    ("system_i", "dcmac", 0.95),
    ("system_i_ddqn", "ddqn", 0.92),
])
def test_system_i_agents_reach_exact_optimum(experiment_dir, name, agent, min_agreement):
    out = run_experiment(shipped(name, experiment_dir))
    exact = float(read_rows(out / "exact_value.csv")[0]["initial_value"])
    assert abs(mean_costs(out)[agent] - exact) <= 0.05 * exact
    agreement = read_rows(out / "agreement.csv")[0]
    assert agreement["policy"] == agent
    assert float(agreement["agreement"]) >= min_agreement


@pytest.mark.slow
def test_state_map_baseline_degrades_with_precision(experiment_dir):
    out = run_experiment(shipped("system_ii_baselines", experiment_dir))
    rows = sorted((r for r in read_rows(out / "observability_sweep.csv") if r["policy"] == "CBM-II"),
                  key=lambda r: -float(r["precision"]))
    assert [float(r["precision"]) for r in rows] == [1.0, 0.9, 0.8, 0.7]
    for better, worse in zip(rows, rows[1:]):
        slack = float(better["ci_half_width"]) + float(worse["ci_half_width"])
        assert float(worse["mean_cost"]) >= float(better["mean_cost"]) - slack


@pytest.mark.slow
def test_dcmac_beats_optimized_state_map_baselines(experiment_dir):
    config = shipped("system_ii", experiment_dir)
    config.observability_sweep = []
    costs = mean_costs(run_experiment(config))
    assert costs["dcmac"] <= min(costs[name] for name in ("CBM-I", "CBM-II", "TCBM-I", "TCBM-II"))


@pytest.mark.slow
def test_king_post_system_end_to_end(experiment_dir):
    out = run_experiment(shipped("system_iii_small", experiment_dir))
    curve = read_rows(out / "learning_curve.csv")
    assert curve
    assert all(math.isfinite(float(r["mean_cost"])) for r in curve)

    traces = read_rows(out / "traces" / "dcmac.csv")
    assert len(traces) == 30 * 5
    assert {r["inspected"] for r in traces} <= {"0", "1"}

    costs = mean_costs(out)
    periodic = [costs[name] for name in ("CBM-I", "CBM-II", "CBM-III", "CBM-IV")]
    assert costs["dcmac"] <= min(periodic)
