# -*- coding: utf-8 -*-
"""
集合统计、ISI 拟合与参数扫描测试

标记为 slow 的测试运行完整规模的蒙特卡洛集合（N = 1000，100 个网络）。
"""

from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from analysis.ensemble import (
    EnsembleStats,
    ensemble,
    isi_geometric_fit,
    randomsum_approx_check,
    sweep,
    wald_check,
)
from data.defaults import ASYMPTOTE_PHI_GRID, DEFAULT_RUNS
from simulation.network_simulator import SimConfig, run_simulation
from theory.meanfield import (
    DeathRegimeError,
    asymptote,
    geometric_isi_pmf,
    moments,
    predict_isi,
    run_meanfield,
    window_frequency,
)
from theory.models import MeanFieldParams, WeightModel

SEED = 20240601


def small_config(**kwargs) -> SimConfig:
    values = dict(N=200, model=WeightModel(phi=5.0), T=30, seed=SEED)
    values.update(kwargs)
    return SimConfig(**values)


def stats_from_histogram(histogram) -> EnsembleStats:
    return EnsembleStats(runs=1, N=1, mean_activity=np.zeros(1), std_activity=np.zeros(1),
                         isi_histogram=histogram, mean_frequency=0.0, window_start=0,
                         network_asymptotes=np.zeros(1))


# ==================== 集合统计 ====================

def test_single_run_has_zero_spread():
    stats = ensemble(small_config(), runs=1)
    assert not stats.std_activity.any()
    assert not stats.standard_error().any()


def test_zero_coupling_activity():
    config = small_config(model=WeightModel(phi=0.0))
    stats = ensemble(config, runs=5)
    assert stats.mean_activity[0] == pytest.approx(0.15, abs=0.05)
    assert not stats.mean_activity[1:].any()
    assert stats.isi_histogram == {}
    assert stats.mean_frequency == 0.0


def test_mean_frequency_equals_window_average():
    stats = ensemble(small_config(gamma=0.4), runs=4, window_start=10)
    assert stats.mean_frequency == stats.mean_activity[10:].mean()
    assert stats.mean_frequency == window_frequency(stats.mean_activity, 10)


def test_statistics_ranges_and_histogram_keys():
    stats = ensemble(small_config(), runs=3)
    assert np.all((stats.mean_activity >= 0.0) & (stats.mean_activity <= 1.0))
    assert np.all(stats.std_activity >= 0.0)
    assert stats.isi_histogram and min(stats.isi_histogram) >= 1
    assert len(stats.network_asymptotes) == 3


def test_ensemble_is_reproducible():
    first = ensemble(small_config(gamma=0.5), runs=3)
    second = ensemble(small_config(gamma=0.5), runs=3)
    assert_array_equal(first.mean_activity, second.mean_activity)
    assert first.isi_histogram == second.isi_histogram


def test_parallel_reduction_matches_sequential():
    config = small_config(T=20)
    sequential = ensemble(config, runs=4, workers=1)
    parallel = ensemble(config, runs=4, workers=2)
    assert_array_equal(sequential.mean_activity, parallel.mean_activity)
    assert_array_equal(sequential.std_activity, parallel.std_activity)
    assert sequential.isi_histogram == parallel.isi_histogram


def test_ensemble_rejects_bad_arguments():
    with pytest.raises(ValueError):
        ensemble(small_config(), runs=0)
    with pytest.raises(ValueError):
        ensemble(small_config(), runs=1, window_start=31)


# ==================== ISI 拟合 ====================

def test_exact_geometric_histogram_has_zero_distance():
    counts = np.round(geometric_isi_pmf(0.5, 12) * 2 ** 12).astype(int)
    stats = stats_from_histogram({isi: int(c) for isi, c in enumerate(counts, start=1)})
    assert isi_geometric_fit(stats, 0.5) == pytest.approx(0.0, abs=1e-12)


def test_distance_is_bounded():
    stats = stats_from_histogram({1: 1, 2: 1, 3: 1})
    assert 0.0 < isi_geometric_fit(stats, 0.9) <= 1.0


def test_empty_histogram_signals_death():
    with pytest.raises(DeathRegimeError):
        isi_geometric_fit(stats_from_histogram({}), 0.4)


def test_death_regime_ensemble_has_no_isis():
    stats = ensemble(small_config(model=WeightModel(phi=1.0)), runs=3)
    with pytest.raises(DeathRegimeError):
        isi_geometric_fit(stats, 0.1)


# ==================== 扫描 ====================

def test_single_cell_sweep():
    report = sweep([5.0], [0.0], small_config(T=25), runs=1)
    assert len(report.asymptote_rows) == 1
    assert len(report.transient_rows) == 26
    row = report.asymptote_rows[0]
    assert row.abs_error == abs(row.predicted - row.simulated_mean)
    assert report.transients(5.0, 0.0)[0].x_pred == 0.15


def test_sweep_flags_failure_band(caplog):
    report = sweep([1.7], [0.0], small_config(T=25), runs=1)
    assert report.asymptote_rows[0].in_failure_band
    assert report.max_abs_error() == 0.0
    assert "1.7" in caplog.text


def test_sweep_death_rows_are_exact_zero():
    report = sweep([1.0], [0.0], small_config(T=50), runs=3)
    row = report.asymptote_rows[0]
    assert row.predicted == 0.0
    assert row.simulated_mean == 0.0
    assert report.isi_fits == []


def test_sweep_rejects_empty_grid():
    with pytest.raises(ValueError):
        sweep([], [0.0], small_config(), runs=1)


# ==================== 近似检验 ====================

def test_random_sum_degenerate_count():
    rows = randomsum_approx_check([10, 100], 1.0, WeightModel(phi=5.0), draws=1000, seed=SEED)
    assert all(row.error == pytest.approx(0.0, abs=1e-15) for row in rows)


def test_random_sum_constant_function():
    rows = randomsum_approx_check([100, 1000], 0.5, WeightModel(phi=1e12), draws=10_000, seed=SEED)
    assert all(row.error < 1e-9 for row in rows)


def test_random_sum_error_decreases_with_size():
    rows = randomsum_approx_check([10, 100, 1000], 0.15, WeightModel(phi=5.0), seed=SEED)
    for smaller, larger in zip(rows, rows[1:]):
        assert larger.error <= smaller.error + 3.0 * (smaller.standard_error + larger.standard_error)
    assert rows[-1].error < rows[0].error
    assert rows[-1].error < 1e-3


def test_random_sum_requires_ascending_sizes():
    with pytest.raises(ValueError):
        randomsum_approx_check([100, 10], 0.15, WeightModel())


# ==================== 完整规模对比 ====================

@pytest.fixture(scope="module")
def zero_leak_sweep():
    base = SimConfig(N=1000, model=WeightModel(phi=5.0), gamma=0.0, x0=0.15, T=50, seed=SEED)
    return sweep(ASYMPTOTE_PHI_GRID, [0.0], base, runs=DEFAULT_RUNS)


@pytest.mark.slow
def test_asymptote_agreement_without_leak(zero_leak_sweep):
    rows = zero_leak_sweep.asymptote_rows
    for row in rows:
        assert row.abs_error <= 0.02, f"phi={row.phi}"
        assert row.simulated_mean < 0.5
        assert row.predicted < 0.5
    simulated = [row.simulated_mean for row in rows]
    predicted = [row.predicted for row in rows]
    assert all(b >= a for a, b in zip(predicted, predicted[1:]))
    assert all(b >= a - 0.005 for a, b in zip(simulated, simulated[1:]))


@pytest.mark.slow
def test_transient_agreement_without_leak(zero_leak_sweep):
    rows = zero_leak_sweep.transients(5.0, 0.0)
    for row in rows[1:]:
        assert abs(row.x_pred - row.x_sim_mean) <= 3.0 * row.x_sim_se, f"t={row.t}"
    assert abs(rows[10].x_pred - rows[50].x_pred) < 0.01


@pytest.mark.slow
def test_full_leak_overestimates_slightly():
    base = SimConfig(N=1000, model=WeightModel(phi=5.0), gamma=1.0, x0=0.15, T=50, seed=SEED)
    row = sweep([5.0], [1.0], base, runs=DEFAULT_RUNS).asymptote_rows[0]
    assert row.predicted >= row.simulated_mean
    assert row.predicted - row.simulated_mean <= 0.05


@pytest.mark.slow
def test_isi_law_is_geometric():
    config = SimConfig(N=500, model=WeightModel(phi=5.0), x0=0.15, T=100, seed=SEED, annealed=True)
    stats = ensemble(config, runs=20, window_start=20)
    params = MeanFieldParams.from_sim_config(config)
    isi = predict_isi(asymptote(params), config.model)
    assert isi_geometric_fit(stats, isi.geometric_param) <= 0.05


@pytest.mark.slow
def test_quenched_isi_law_is_geometric_mixture():
    # 固定权重时各神经元发放概率不同，合并 ISI 是多个几何分布的混合
    config = SimConfig(N=500, model=WeightModel(phi=5.0), x0=0.15, T=100, seed=SEED)
    stats = ensemble(config, runs=20, window_start=20)
    isi = predict_isi(asymptote(MeanFieldParams.from_sim_config(config)), config.model)
    assert isi_geometric_fit(stats, isi.geometric_param) > 0.1


@pytest.mark.slow
def test_first_step_wald_identities():
    config = SimConfig(N=1000, model=WeightModel(phi=5.0), x0=0.15, seed=SEED)
    check = wald_check(config, trials=10_000)
    assert check.within(3.0)


@pytest.mark.slow
def test_homogeneous_limits_agree():
    for mu, expected in ((1.5, 0.0), (4.0, 1.0)):
        config = SimConfig(N=1000, model=WeightModel(phi=1e-6, mu=mu), x0=0.5, T=20, seed=SEED)
        stats = ensemble(config, runs=5, window_start=1)
        trace = run_meanfield(MeanFieldParams.from_sim_config(config))
        assert_allclose(stats.mean_activity[1:], expected, atol=0)
        assert_allclose(trace.x[1:], expected, atol=1e-12)


@pytest.mark.slow
@pytest.mark.parametrize("sparsity_p", [0.0, 0.5])
def test_sparse_connectivity_agreement(sparsity_p):
    model = WeightModel(phi=5.0, sparsity_p=sparsity_p)
    base = SimConfig(N=1000, model=model, gamma=0.5, x0=0.1, T=50, seed=SEED)
    row = sweep([5.0], [0.5], base, runs=DEFAULT_RUNS).asymptote_rows[0]
    assert row.abs_error <= 0.03


@pytest.mark.slow
@pytest.mark.parametrize("mu", [0.0, 1.0])
def test_nonzero_mean_agreement_with_leak(mu):
    base = SimConfig(N=1000, model=WeightModel(phi=5.0, mu=mu), gamma=0.5, x0=0.1, T=50, seed=SEED)
    row = sweep([5.0], [0.5], base, runs=DEFAULT_RUNS).asymptote_rows[0]
    assert row.predicted > 0.0
    assert row.abs_error <= 0.02


@pytest.mark.slow
def test_sweep_is_reproducible():
    base = small_config(T=25)
    first = sweep([3.0, 5.0], [0.0, 0.5], base, runs=3)
    second = sweep([3.0, 5.0], [0.0, 0.5], replace(base), runs=3)
    assert first.asymptote_rows == second.asymptote_rows
    assert first.transient_rows == second.transient_rows


@pytest.mark.slow
def test_third_step_variance_overestimates_monte_carlo():
    config = SimConfig(N=1000, model=WeightModel(phi=5.0), x0=0.15, T=3, seed=SEED)
    networks = 2000
    counts = np.array([run_simulation(config, index).spike_counts[3] for index in range(networks)], dtype=float)
    predicted = moments(MeanFieldParams.from_sim_config(config), config.N)

    assert counts.mean() == pytest.approx(predicted.expectation[3], rel=0.01)

    # 方差递推忽略同一网络内各发放批次之间的负协方差，结果系统性偏高
    mc_var = counts.var(ddof=1)
    var_se = np.sqrt((np.mean((counts - counts.mean()) ** 4) - mc_var ** 2) / networks)
    assert predicted.variance[3] > mc_var + 3.0 * var_se
    assert predicted.variance[3] < 1.4 * mc_var
