import numpy as np
import pytest
from joblib import delayed

from app.core.errors import ConfigError
from app.schemas.indicators import Dimension, IndicatorSettings, NormChange, PatternCode
from app.schemas.model import ModelParams
from app.schemas.run import RunConfig
from app.services.engine import SimulationService
from app.services.experiment import ExperimentService
from app.services.indicators import IndicatorService
from app.services.random_stream import GENERATOR_FAMILY, derive_seed
from app.services.regimes import REGIMES, RegimeService
from app.worker import replicate_pool

REPLICATES = 10


def seeds(name, count=REPLICATES):
    return [derive_seed("regime", name, replicate) for replicate in range(count)]


def final_report(config):
    result = SimulationService.run(config)
    snapshot = result.state.snapshot(config.params, GENERATOR_FAMILY)
    return result, IndicatorService.compute_report(snapshot, IndicatorSettings())


def replicate_reports(name, params, max_sweeps, snapshot_every=None, count=REPLICATES):
    configs = [
        RunConfig(
            params=params.model_copy(update={"seed": seed}),
            max_sweeps=max_sweeps,
            snapshot_every=snapshot_every or max_sweeps,
            capture_snapshots=False,
        )
        for seed in seeds(name, count)
    ]
    return replicate_pool(-1)(delayed(final_report)(config) for config in configs)


def test_presets_are_valid():
    """Test every preset builds a run configuration"""
    for name in REGIMES:
        config = RegimeService.regime_config(name)
        assert config.snapshot_every <= config.max_sweeps
        assert RegimeService.regime_values(name)["u_m"] == config.params.u_m


def test_preset_overrides():
    """Test overrides reach parameters and run settings"""
    config = RegimeService.regime_config("main-norm-flip", n_agents=100, seed=4, max_sweeps=50)
    assert config.params.n_agents == 100
    assert config.params.seed == 4
    assert config.params.u_m == 0.8
    assert config.max_sweeps == 50
    assert config.snapshot_every == 50


def test_unknown_preset():
    """Test an unknown preset is a configuration error"""
    with pytest.raises(ConfigError):
        RegimeService.regime_config("nope")
    with pytest.raises(ConfigError):
        RegimeService.regime_config("pure-bc", mu=0.9)


def test_pure_bounded_confidence_small():
    """Test the pure bounded-confidence preset reaches consensus at small scale"""
    for seed in seeds("pure-bc-small", 3):
        _, report = final_report(RegimeService.regime_config("pure-bc", n_agents=300, seed=seed, max_sweeps=200))
        assert report.max_cluster_share > 0.95
        assert report.avg_abs_main < 0.2


@pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
def test_pure_hsi_keeps_moving(seed):
    """Test an all-HSI population does not settle at small u_m and large u_s"""
    config = RegimeService.regime_config(
        "pure-hsi", n_agents=300, seed=seed, max_sweeps=60, snapshot_every=20, capture_snapshots=True
    )
    snapshots = SimulationService.run(config).snapshots
    assert [snapshot.sweep for snapshot in snapshots] == [0, 20, 40, 60]
    late, final = snapshots[-2], snapshots[-1]
    assert np.max(np.abs(final.secondary - late.secondary)) > 0.1


@pytest.mark.slow
def test_pure_bounded_confidence_consensus():
    """Test h = 0, u = 1 gives one cluster over 95% near the center"""
    params = ModelParams(n_agents=1000, h=0.0, u_m=1.0, u_s=1.0)
    outcomes = replicate_reports("pure-bc", params, 500)
    hits = sum(
        report.max_cluster_share > 0.95 and report.avg_abs_main < 0.05 and report.avg_abs_secondary < 0.05
        for _, report in outcomes
    )
    assert hits >= 9


@pytest.mark.slow
@pytest.mark.parametrize("bounded", [True, False])
def test_main_dimension_norm_flip(bounded):
    """Test the main norm dips to moderation and then polarizes, with or without confinement"""
    params = ModelParams(n_agents=2500, h=0.1, u_m=0.8, u_s=0.3, bounded=bounded)
    name = "main-norm-flip" if bounded else "main-norm-flip-unbounded"
    outcomes = replicate_reports(name, params, 100_000, snapshot_every=500)
    changes = [IndicatorService.interpret_norm_change(result.trajectory, Dimension.MAIN) for result, _ in outcomes]
    assert changes.count(NormChange.POLARIZED_AFTER_MODERATION) >= 6
    codes = [IndicatorService.classify_both(report)[0] for _, report in outcomes]
    assert ExperimentService.majority_code(codes, REPLICATES) == PatternCode.SINGLE_EXTREME



@pytest.mark.slow
def test_secondary_dimension_norm_flip():
    """Test rejecting HSI agents polarize the secondary norm under one main cluster"""
    params = ModelParams(n_agents=2500, h=0.1, u_m=0.7, u_s=1.0)
    outcomes = replicate_reports("secondary-norm-flip", params, 100_000, snapshot_every=1000)
    hits = sum(report.avg_abs_secondary > 0.5 and report.n_major_main == 1 for _, report in outcomes)
    assert hits >= 6


@pytest.mark.slow
@pytest.mark.parametrize("bounded", [True, False])
def test_frontier_between_centralization_and_polarization(bounded):
    """Test u_s below twice u_m centralizes and above it polarizes the secondary norm"""
    central = replicate_reports(
        f"frontier-low-{bounded}", ModelParams(n_agents=2000, h=0.1, u_m=0.25, u_s=0.3, bounded=bounded), 20_000
    )
    polar = replicate_reports(
        f"frontier-high-{bounded}", ModelParams(n_agents=2000, h=0.1, u_m=0.25, u_s=0.8, bounded=bounded), 20_000
    )
    assert sum(report.avg_abs_secondary < 0.4 for _, report in central) >= 7
    assert sum(report.avg_abs_secondary > 0.5 for _, report in polar) >= 7


@pytest.mark.slow
def test_hsi_agents_reduce_cluster_count():
    """Test a few HSI agents lower the number of major clusters, paired over seeds"""
    without = replicate_reports("cluster-count", ModelParams(n_agents=2000, h=0.0, u_m=0.2, u_s=0.2), 5000)
    with_hsi = replicate_reports("cluster-count", ModelParams(n_agents=2000, h=0.1, u_m=0.2, u_s=0.2), 5000)
    fewer = sum(b.n_major_clusters < a.n_major_clusters for (_, a), (_, b) in zip(without, with_hsi))
    assert fewer >= 8


@pytest.mark.slow
def test_replicate_spread_is_small():
    """Test avg_abs varies little across replicates at full population size"""
    params = ModelParams(n_agents=10_000, h=0.1, u_m=0.5, u_s=0.5)
    outcomes = replicate_reports("spread", params, 2000)
    values = np.array([[r.avg_abs_main, r.avg_abs_secondary] for _, r in outcomes])
    spread = values.std(axis=0)
    print(f"replicate std of avg_abs: main={spread[0]:.4f} secondary={spread[1]:.4f}")
    assert spread.max() < 0.15


@pytest.mark.slow
def test_secondary_long_transient():
    """Test one main cluster with several secondary sub-clusters at sweep 5000"""
    params = ModelParams(n_agents=1000, h=0.1, u_m=0.7, u_s=0.1)
    outcomes = replicate_reports("secondary-long-transient", params, 5000)
    hits = sum(report.n_major_main == 1 and report.n_major_secondary >= 2 for _, report in outcomes)
    assert hits >= 6
