import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.deterioration.gamma_process import (
    DiscretizedDeterioration,
    analytic_fresh_row,
    build_deterioration,
    cache_header,
    calibrate,
    chain_moments,
    estimate_transition_matrices,
    load_matrices,
    sample_increment,
    save_matrices,
)


@pytest.fixture(scope="module")
def model():
    return calibrate(40.0, 7.5, 70.0, 1.5)


@pytest.fixture(scope="module")
def estimated(model):
    return estimate_transition_matrices(model, DiscretizedDeterioration(), 20_000,
                                        np.random.default_rng(0), max_rate=10)


def test_calibration_matches_moments(model):
    f_T = 1600.0 / 56.25
    assert model.shape(70.0) == pytest.approx(f_T)
    assert model.lam == pytest.approx(f_T / 40.0)
    assert model.mean(70.0) == pytest.approx(40.0)
    assert model.std(70.0) == pytest.approx(7.5)


def test_calibration_rejects_bad_inputs():
    with pytest.raises(ValueError):
        calibrate(40.0, 0.0, 70.0, 1.5)
    with pytest.raises(ValueError):
        calibrate(40.0, 7.5, 70.0, 2.5)


def test_increment_requires_ordered_times(model):
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        sample_increment(model, 5.0, 5.0, rng)
    draws = sample_increment(model, 10.0, 20.0, rng, size=50_000)
    expected = (model.shape(20.0) - model.shape(10.0)) / model.lam
    assert draws.mean() == pytest.approx(expected, rel=0.02)
    assert np.all(draws >= 0)


def test_discretization_bins():
    disc = DiscretizedDeterioration()
    assert disc.failure_state == 24
    assert list(disc.state_of([0.0, 2.49, 2.5, 59.9, 60.0, 60.01])) == [0, 0, 1, 23, 23, 24]
    with pytest.raises(ValueError):
        DiscretizedDeterioration(bin_width=2.5, num_states=20, failure_threshold=60.0)


def test_matrices_are_stochastic_and_upper_triangular(estimated):
    assert estimated.matrices.shape == (11, 25, 25)
    assert np.abs(estimated.matrices.sum(axis=2) - 1.0).max() < 1e-9
    for M in estimated.matrices:
        assert np.all(np.tril(M, -1) == 0.0)
        assert M[-1, -1] == 1.0


def test_fresh_row_matches_analytic(model, estimated):
    row = analytic_fresh_row(model, estimated, tau=0)
    assert row.sum() == pytest.approx(1.0)
    assert_allclose(estimated.matrices[0, 0], row, atol=0.01)


def test_estimation_requires_enough_paths(model):
    with pytest.raises(ValueError):
        estimate_transition_matrices(model, DiscretizedDeterioration(), 100, np.random.default_rng(0))


def test_cache_round_trip(tmp_path, model, estimated):
    header = cache_header(model, estimated, 20_000, 0, 10)
    path = save_matrices(tmp_path / "matrices.npz", estimated, header)
    loaded = load_matrices(path, header)
    assert loaded is not None
    assert_allclose(loaded.matrices, estimated.matrices)
    assert load_matrices(path, dict(header, seed=1)) is None
    assert load_matrices(tmp_path / "missing.npz", header) is None


def test_build_deterioration_is_deterministic(tmp_path):
    calibration = {"mean": 40.0, "sigma": 7.5, "horizon": 70, "beta": 1.5}
    _, first = build_deterioration(calibration, {}, 10_000, seed=3, max_rate=4, cache_dir=str(tmp_path))
    assert len(list(tmp_path.glob("*.npz"))) == 1
    _, cached = build_deterioration(calibration, {}, 10_000, seed=3, max_rate=4, cache_dir=str(tmp_path))
    _, fresh = build_deterioration(calibration, {}, 10_000, seed=3, max_rate=4, use_cache=False)
    assert_allclose(first.matrices, cached.matrices)
    assert_allclose(first.matrices, fresh.matrices)


@pytest.mark.slow
def test_chained_moments_match_process():
    calibration = {"mean": 40.0, "sigma": 7.5, "horizon": 70, "beta": 1.5}
    _, disc = build_deterioration(calibration, {}, 1_000_000, seed=0, max_rate=70, use_cache=False)
    mean, std = chain_moments(disc, 70)
    assert mean == pytest.approx(40.0, abs=1.5)
    assert std == pytest.approx(7.5, abs=1.5)


def test_linear_shape_gives_stationary_increments():
    linear = calibrate(40.0, 7.5, 70.0, 1.0)
    assert_allclose(np.diff(linear.shape(np.arange(12.0))), linear.shape(1.0), rtol=1e-12)
    disc = DiscretizedDeterioration()
    fresh = analytic_fresh_row(linear, disc, tau=0)
    for tau in (1, 5, 30):
        assert_allclose(analytic_fresh_row(linear, disc, tau=tau), fresh, atol=1e-12)
    rng = np.random.default_rng(1)
    early = sample_increment(linear, 0.0, 3.0, rng, size=50_000)
    late = sample_increment(linear, 40.0, 43.0, rng, size=50_000)
    assert early.mean() == pytest.approx(3.0 * 40.0 / 70.0, rel=0.02)
    assert late.mean() == pytest.approx(early.mean(), rel=0.03)
    assert late.std() == pytest.approx(early.std(), rel=0.03)
