import json

import pandas as pd
import pytest

from app.main import cli_main
from app.services.engine import SimulationService


def invoke(capsys, *argv):
    status = cli_main(list(argv))
    out = capsys.readouterr().out
    return status, (json.loads(out) if out.strip().startswith("{") else None)


@pytest.fixture
def base_cfg(tmp_path):
    path = tmp_path / "base.cfg"
    path.write_text("# small population\nn_agents=60\nh=0.2\nu_m=0.4, u_s=0.6\nmax_sweeps=6\nsnapshot_every=3\nseed=11\n")
    return path


def test_run_writes_time_series_and_snapshots(tmp_path, base_cfg, capsys):
    """Test run lays out a complete run directory"""
    out = tmp_path / "runs" / "a"
    status, response = invoke(capsys, "run", "--config", str(base_cfg), "--out", str(out))
    assert status == 0
    assert response["success"] is True
    assert response["command"] == "run"

    assert len((out / "timeseries.csv").read_text().splitlines()) == 4
    assert sorted(path.name for path in (out / "snapshots").iterdir()) == [
        "sweep_00000000.csv", "sweep_00000003.csv", "sweep_00000006.csv"
    ]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["n_agents"] == 60
    assert manifest["seed"] == 11
    assert manifest["generator"] == "numpy.PCG64/raw64-u53/v1"
    assert "cluster_epsilon" in manifest["applied_defaults"]
    assert manifest["stopped_at"] == 6


def test_run_is_byte_deterministic(tmp_path, base_cfg, capsys):
    """Test identical runs write identical files"""
    for name in ("a", "b"):
        assert invoke(capsys, "run", "--config", str(base_cfg), "--out", str(tmp_path / name))[0] == 0
    for relative in ("timeseries.csv", "manifest.json", "snapshots/sweep_00000006.csv"):
        assert (tmp_path / "a" / relative).read_bytes() == (tmp_path / "b" / relative).read_bytes()


def test_run_flags_override_config(tmp_path, base_cfg, capsys):
    """Test flags win over the configuration file"""
    out = tmp_path / "run"
    status, _ = invoke(capsys, "run", "--config", str(base_cfg), "--out", str(out), "--seed", "3",
                       "--unbounded", "--max-sweeps", "4", "--snapshot-every", "2", "--n-agents", "30")
    assert status == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 3
    assert manifest["config"]["bounded"] is False
    assert manifest["config"]["n_agents"] == 30
    assert manifest["snapshots"] == ["sweep_00000000.csv", "sweep_00000002.csv", "sweep_00000004.csv"]


def test_run_preset(tmp_path, capsys):
    """Test a preset supplies the whole configuration"""
    out = tmp_path / "preset"
    status, response = invoke(capsys, "run", "--preset", "pure-bc", "--out", str(out),
                              "--n-agents", "50", "--max-sweeps", "5")
    assert status == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["preset"] == "pure-bc"
    assert manifest["config"]["h"] == 0.0
    assert manifest["config"]["snapshot_every"] is None


def test_run_configuration_errors(tmp_path, capsys):
    """Test configuration problems exit with status 2 and a diagnostic"""
    bad = tmp_path / "bad.cfg"
    bad.write_text("mu=0.7\n")
    status, response = invoke(capsys, "run", "--config", str(bad), "--out", str(tmp_path / "x"))
    assert status == 2
    assert response["success"] is False
    assert "mu" in response["error"]

    status, _ = invoke(capsys, "run", "--out", str(tmp_path / "x"))
    assert status == 2
    status, _ = invoke(capsys, "run", "--config", str(tmp_path / "missing.cfg"), "--out", str(tmp_path / "x"))
    assert status == 2


def test_usage_errors(tmp_path, capsys):
    """Test unknown flags and commands are usage errors"""
    assert cli_main(["run", "--out", str(tmp_path / "x"), "--bogus"]) == 2
    assert "--bogus" in capsys.readouterr().err
    assert cli_main(["teleport"]) == 2
    assert cli_main([]) == 2


def test_classify_matches_the_run(tmp_path, base_cfg, capsys):
    """Test reclassification of stored snapshots equals the inline result"""
    out = tmp_path / "run"
    invoke(capsys, "run", "--config", str(base_cfg), "--out", str(out))
    manifest = json.loads((out / "manifest.json").read_text())

    status, response = invoke(capsys, "classify", "--snapshots", str(out))
    assert status == 0
    table = pd.read_csv(out / "classification.csv")
    assert len(table) == 3
    last = table.iloc[-1]
    assert last["pattern_main"] == manifest["pattern"]["main"]
    assert last["pattern_secondary"] == manifest["pattern"]["secondary"]
    assert last["n_major_clusters"] == manifest["final"]["n_major_clusters"]


def test_classify_with_new_epsilon(tmp_path, base_cfg, capsys):
    """Test classification can be redone with another linkage radius"""
    out = tmp_path / "run"
    invoke(capsys, "run", "--config", str(base_cfg), "--out", str(out))
    target = tmp_path / "reclassified"
    status, response = invoke(capsys, "classify", "--snapshots", str(out / "snapshots"),
                              "--cluster-epsilon", "0.05", "--out", str(target))
    assert status == 0
    table = pd.read_csv(target / "classification.csv")
    assert set(table["cluster_epsilon"]) == {0.05}
    assert response["data"]["snapshots"] == 3


def test_export_density(tmp_path, base_cfg, capsys):
    """Test density tables of one snapshot"""
    out = tmp_path / "run"
    invoke(capsys, "run", "--config", str(base_cfg), "--out", str(out))
    status, response = invoke(capsys, "export-density", "--snapshot", str(out / "snapshots" / "sweep_00000006.csv"),
                              "--bins", "10", "--out", str(tmp_path / "density"))
    assert status == 0
    main = pd.read_csv(tmp_path / "density" / "density_main.csv")
    assert len(main) == 10
    assert main["count"].sum() == 60


def test_sweep_writes_maps(tmp_path, capsys):
    """Test a small sweep writes cells, the h profile and all five maps per slice"""
    cfg = tmp_path / "grid.cfg"
    cfg.write_text("u_m_values=0.3 0.6\nu_s_values=0.4\nh_values=0.1\nsnapshot_every=2\n")
    out = tmp_path / "maps"
    status, response = invoke(capsys, "sweep", "--plan", "default", "--scale", "desk", "--config", str(cfg),
                              "--out", str(out), "--n-agents", "30", "--replicates", "2", "--max-sweeps", "2")
    assert status == 0
    assert response["data"]["cells"] == 4
    assert len(pd.read_csv(out / "cells.csv")) == 4
    assert (out / "h_profile.csv").exists()
    assert not (out / "failures.csv").exists()
    for case in ("bounded", "unbounded"):
        files = {path.name for path in (out / "maps" / case / "h0.1").iterdir()}
        assert len(files) == 10
        assert "majority_pattern_main_matrix.csv" in files

    manifest = json.loads((out / "manifest.json").read_text())
    defaults = manifest["applied_defaults"]
    assert defaults["cluster_epsilon"] == 0.02
    assert defaults["mu"] == 0.5
    assert defaults["min_major_coverage"] == 0.5
    assert defaults["boundedness_cases"] == ["bounded", "unbounded"]
    for given in ("n_agents", "replicates", "max_sweeps", "snapshot_every", "u_m_values", "h_values"):
        assert given not in defaults


def test_sweep_is_independent_of_parallelism(tmp_path, capsys):
    """Test sweep outputs do not depend on the worker count"""
    for workers in ("1", "2"):
        cfg = tmp_path / "grid.cfg"
        cfg.write_text("u_m_values=0.3\nu_s_values=0.4 0.8\nh_values=0.1\n")
        status, _ = invoke(capsys, "sweep", "--config", str(cfg), "--out", str(tmp_path / workers),
                           "--n-agents", "30", "--replicates", "2", "--max-sweeps", "2",
                           "--unbounded", "--parallelism", workers)
        assert status == 0
    for name in ("cells.csv", "manifest.json", "h_profile.csv"):
        assert (tmp_path / "1" / name).read_bytes() == (tmp_path / "2" / name).read_bytes()


def test_sweep_partial_failure(tmp_path, capsys, monkeypatch):
    """Test failed replicates exit with status 3 after writing results"""
    real_run = SimulationService.run

    def flaky_run(config, *args, **kwargs):
        if config.params.u_s == 0.8:
            raise RuntimeError("boom")
        return real_run(config, *args, **kwargs)

    monkeypatch.setattr(SimulationService, "run", staticmethod(flaky_run))
    cfg = tmp_path / "grid.cfg"
    cfg.write_text("u_m_values=0.3\nu_s_values=0.4 0.8\nh_values=0.1\nbounded=true\n")
    out = tmp_path / "failed"
    status, response = invoke(capsys, "sweep", "--config", str(cfg), "--out", str(out),
                              "--n-agents", "30", "--replicates", "2", "--max-sweeps", "2")
    assert status == 3
    assert response["success"] is False
    assert response["data"]["failed_cells"] == ["u_m=0.3 u_s=0.8 h=0.1 bounded"]
    assert len(pd.read_csv(out / "failures.csv")) == 2
    assert (out / "cells.csv").exists()


def test_classify_reuses_run_settings(tmp_path, capsys):
    """Test reclassification without a config file uses the settings the run was made with"""
    cfg = tmp_path / "custom.cfg"
    cfg.write_text("n_agents=60, h=0.2, u_m=0.4, u_s=0.6, max_sweeps=6, snapshot_every=3, seed=5\n"
                   "cluster_epsilon=0.05\ncount_basis=dimension\nsingle_moderate_max=0.3\n")
    out = tmp_path / "run"
    assert invoke(capsys, "run", "--config", str(cfg), "--out", str(out))[0] == 0
    manifest = json.loads((out / "manifest.json").read_text())

    status, _ = invoke(capsys, "classify", "--snapshots", str(out))
    assert status == 0
    table = pd.read_csv(out / "classification.csv")
    assert set(table["cluster_epsilon"]) == {0.05}
    last = table.iloc[-1]
    assert last["pattern_main"] == manifest["pattern"]["main"]
    assert last["pattern_secondary"] == manifest["pattern"]["secondary"]
    assert last["n_major_clusters"] == manifest["final"]["n_major_clusters"]

    target = tmp_path / "override"
    status, _ = invoke(capsys, "classify", "--snapshots", str(out), "--cluster-epsilon", "0.02", "--out", str(target))
    assert status == 0
    assert set(pd.read_csv(target / "classification.csv")["cluster_epsilon"]) == {0.02}
