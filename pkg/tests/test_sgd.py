"""Tests for noisy and projected noisy SGD."""

import numpy as np
import pandas as pd
import pytest

from strict_saddle.analysis import coupling_closed_form
from strict_saddle.ica import SimpleSampler
from strict_saddle.objectives import correlation_objective, maxeig_objective, quadratic_objective
from strict_saddle.sgd import (
    SgdConfig,
    lr_schedule,
    noisy_sgd,
    projected_noisy_sgd,
    run_parallel,
    spawn_rngs,
    unit_sphere_noise,
)
from strict_saddle.tensor4 import OrthoBasis, make_orthogonal_tensor
from strict_saddle.utils import TRACE_COLUMNS


def _square(x, offset=0):
    return x * x + offset


class TestSgdConfig:
    def test_defaults(self):
        config = SgdConfig()
        assert config.eta == 0.01 and config.eta_max == 0.1

    @pytest.mark.parametrize(
        "kwargs",
        [{"eta": 0.0}, {"eta": 0.2}, {"iterations": 0}, {"schedule": "cosine"}, {"noise_scale": -1.0}, {"record_every": 0}],
    )
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            SgdConfig(**kwargs)


class TestLrSchedule:
    def test_constant(self):
        assert lr_schedule(SgdConfig(eta=0.02), 999) == 0.02

    def test_inverse_t(self):
        config = SgdConfig(eta=0.05, schedule="inverse_t")
        assert lr_schedule(config, 0) == 0.05
        assert lr_schedule(config, 9) == pytest.approx(0.005)

    def test_delayed_decay(self):
        config = SgdConfig(eta=0.01, schedule="inverse_t", decay_start=100, decay_scale=100.0)
        assert lr_schedule(config, 99) == 0.01
        assert lr_schedule(config, 100) == 0.01
        assert lr_schedule(config, 200) == pytest.approx(0.005)


class TestUnitSphereNoise:
    def test_unit_norm(self, rng):
        for dim in (1, 2, 7):
            assert np.linalg.norm(unit_sphere_noise(dim, rng)) == pytest.approx(1.0, abs=1e-12)

    def test_one_dimensional_signs(self, rng):
        draws = np.array([unit_sphere_noise(1, rng)[0] for _ in range(10_000)])
        assert set(np.unique(draws)) == {-1.0, 1.0}
        assert abs(np.mean(draws > 0) - 0.5) <= 0.05

    def test_mean_is_zero(self, rng):
        draws = np.array([unit_sphere_noise(3, rng) for _ in range(100_000)])
        np.testing.assert_allclose(draws.mean(axis=0), np.zeros(3), atol=0.01)

    def test_rejects_empty(self, rng):
        with pytest.raises(ValueError):
            unit_sphere_noise(0, rng)


class TestNoisySgd:
    def test_zero_objective_without_noise(self, rng):
        q = quadratic_objective(np.zeros(3), np.zeros(3), np.zeros((3, 3)))
        w0 = np.array([0.5, -1.0, 2.0])
        record = noisy_sgd(q, None, w0, SgdConfig(iterations=50, noise_scale=0.0), rng)
        for w in record.iterates:
            np.testing.assert_array_equal(w, w0)

    def test_geometric_decay(self, rng):
        q = quadratic_objective(np.zeros(2), np.zeros(2), np.eye(2))
        w0 = np.array([1.0, -2.0])
        config = SgdConfig(eta=0.05, iterations=40, noise_scale=0.0, record_every=1)
        record = noisy_sgd(q, None, w0, config, rng)
        np.testing.assert_allclose(record.final_point, (1 - 0.05) ** 40 * w0, rtol=1e-12)

    def test_matches_coupling_closed_form(self, rng):
        dim, eta, t = 4, 0.01, 300
        Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        H = Q @ np.diag([-0.5, 0.1, 0.4, 1.0]) @ Q.T
        H = 0.5 * (H + H.T)
        g = rng.standard_normal(dim)
        w0 = rng.standard_normal(dim)
        q = quadratic_objective(w0, g, H)
        sampler = lambda r: 0.1 * r.standard_normal(dim)  # noqa: E731
        config = SgdConfig(eta=eta, iterations=t, keep_perturbations=True, track_time=False)
        record = noisy_sgd(q, sampler, w0, config, rng)
        grad_t, disp_t = coupling_closed_form(g, H, np.array(record.perturbations), eta, t)
        np.testing.assert_allclose(record.final_point - w0, disp_t, atol=1e-10)
        np.testing.assert_allclose(q.gradient(record.final_point), grad_t, atol=1e-10)

    def test_rejects_constrained_objective(self, tensor3, rng):
        with pytest.raises(ValueError, match="projected_noisy_sgd"):
            noisy_sgd(maxeig_objective(tensor3), None, np.array([1.0, 0, 0]), SgdConfig(iterations=1), rng)

    def test_rejects_non_finite_start(self, rng):
        q = quadratic_objective(np.zeros(1), np.zeros(1), np.eye(1))
        with pytest.raises(ValueError, match="finite"):
            noisy_sgd(q, None, np.array([np.nan]), SgdConfig(iterations=1), rng)

    def test_divergence_is_recorded(self, rng):
        q = quadratic_objective(np.zeros(1), np.zeros(1), -50.0 * np.eye(1))
        record = noisy_sgd(q, None, np.ones(1), SgdConfig(eta=0.1, iterations=10_000, noise_scale=0.0), rng)
        assert record.status == "diverged"
        assert not record.completed
        assert record.steps < 10_000


class TestProjectedNoisySgd:
    def test_iterates_stay_feasible(self, tensor3, basis3, rng):
        problem = correlation_objective(tensor3)
        config = SgdConfig(iterations=500, record_every=5)
        record = projected_noisy_sgd(problem, SimpleSampler(basis3), problem.random_feasible(rng), config, rng)
        assert record.completed
        for w in record.iterates:
            assert np.max(np.abs(np.linalg.norm(problem.rows(w), axis=1) - 1.0)) <= 1e-10

    def test_fixed_at_minimum_without_noise(self, basis3, tensor3, rng):
        problem = correlation_objective(tensor3)
        U = (np.array([-1.0, 1.0, 1.0])[:, None] * basis3.vectors)[[0, 2, 1]].reshape(-1)
        record = projected_noisy_sgd(problem, None, U, SgdConfig(iterations=200, noise_scale=0.0), rng)
        np.testing.assert_allclose(record.final_point, U, atol=1e-12)

    def test_rejects_infeasible_start(self, tensor3, rng):
        with pytest.raises(ValueError, match="feasible"):
            projected_noisy_sgd(maxeig_objective(tensor3), None, np.array([2.0, 0, 0]), SgdConfig(iterations=1), rng)

    def test_deterministic_given_seed(self, basis3, tensor3):
        problem = correlation_objective(tensor3)
        sampler = SimpleSampler(basis3, batch_size=3)
        config = SgdConfig(iterations=300, track_time=False)
        runs = []
        for _ in range(2):
            rng = np.random.default_rng(7)
            runs.append(projected_noisy_sgd(problem, sampler, problem.random_feasible(rng), config, rng))
        np.testing.assert_array_equal(runs[0].final_point, runs[1].final_point)
        pd.testing.assert_frame_equal(runs[0].to_frame(), runs[1].to_frame())

    def test_noise_decomposition_bound(self, basis3, tensor3, rng):
        problem = correlation_objective(tensor3)
        config = SgdConfig(iterations=400, record_every=1)
        record = projected_noisy_sgd(problem, SimpleSampler(basis3), problem.random_feasible(rng), config, rng)
        assert record.noise_bound == pytest.approx(problem.oracle_bound + 1.0)
        assert record.noise_bound_violations == 0
        assert max(record.xi_norm) <= record.noise_bound

    def test_stop_below(self, rng):
        problem = maxeig_objective(make_orthogonal_tensor(OrthoBasis.standard(3)))
        saddle = np.array([1.0, 1.0, 0.0]) / np.sqrt(2)
        record = projected_noisy_sgd(problem, None, saddle, SgdConfig(iterations=10_000), rng, stop_below=-0.6)
        assert record.status == "stopped"
        assert problem.value(record.final_point) <= -0.6

    def test_stop_at_exactly_the_level(self, rng):
        q = quadratic_objective(np.zeros(3), np.zeros(3), np.zeros((3, 3)))
        record = noisy_sgd(q, None, np.ones(3), SgdConfig(iterations=50, noise_scale=0.0), rng, stop_below=0.0)
        assert record.status == "stopped"
        assert record.steps == 1

    @pytest.mark.slow
    def test_escapes_the_maxeig_saddle(self):
        problem = maxeig_objective(make_orthogonal_tensor(OrthoBasis.standard(10)))
        saddle = np.zeros(10)
        saddle[:2] = 1.0 / np.sqrt(2)
        config = SgdConfig(iterations=10_000, record_every=1000, track_time=False)
        records = [projected_noisy_sgd(problem, None, saddle, config, r, stop_below=-0.6) for r in spawn_rngs(11, 100)]
        assert sum(r.status == "stopped" for r in records) >= 95

    def test_large_gradient_step_decreases_f_on_average(self, rng):
        problem = maxeig_objective(make_orthogonal_tensor(OrthoBasis.standard(3)))
        w0 = np.array([0.9, 0.436, 0.0])
        w0 /= np.linalg.norm(w0)
        config = SgdConfig(eta=0.01, iterations=1, record_every=1, track_time=False)
        finals = [problem.value(projected_noisy_sgd(problem, None, w0, config, r).final_point) for r in spawn_rngs(1, 10_000)]
        assert np.mean(finals) < problem.value(w0)


class TestRunRecord:
    def test_csv_schema(self, tensor3, basis3, rng, tmp_path):
        problem = correlation_objective(tensor3)
        config = SgdConfig(iterations=100, record_every=10, track_time=False)
        record = projected_noisy_sgd(problem, SimpleSampler(basis3), problem.random_feasible(rng), config, rng)
        path = tmp_path / "trace.csv"
        record.to_csv(path)
        df = pd.read_csv(path)
        assert list(df.columns) == TRACE_COLUMNS
        assert df["iter"].tolist() == list(range(0, 101, 10))
        assert (df["elapsed_ms"] == 0).all()
        assert df.notna().all().all()

    def test_maxeig_trace_has_no_reconstruction(self, tensor3, rng):
        problem = maxeig_objective(tensor3)
        record = projected_noisy_sgd(problem, None, problem.random_feasible(rng), SgdConfig(iterations=20), rng)
        assert record.to_frame()["recon_error"].isna().all()


class TestParallel:
    def test_spawned_streams_differ(self):
        a, b = spawn_rngs(0, 2)
        assert a.standard_normal() != b.standard_normal()

    def test_spawn_is_reproducible(self):
        assert [r.integers(1000) for r in spawn_rngs(3, 4)] == [r.integers(1000) for r in spawn_rngs(3, 4)]

    def test_results_in_job_order(self):
        assert run_parallel(_square, [3, 1, 2], workers=2, offset=1) == [10, 2, 5]
        assert run_parallel(_square, [3, 1, 2]) == [9, 1, 4]
