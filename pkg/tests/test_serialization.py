import json

import numpy as np
import pytest

from app.core.errors import SerializationError
from app.schemas.model import ModelParams
from app.schemas.run import RunConfig, Snapshot, TrajectoryRecord
from app.services.engine import SimulationService
from app.services.indicators import IndicatorService
from app.services.serialization import SerializationService


def make_records(count):
    return [
        TrajectoryRecord(
            sweep=100 * k, avg_abs_main=0.1 / (k + 3), avg_abs_secondary=2 / 3, n_clusters=k, max_cluster_share=0.5
        )
        for k in range(count)
    ]


def test_write_timeseries_lines(tmp_path):
    """Test a header plus one line per record"""
    path = SerializationService.write_timeseries(make_records(3), tmp_path / "timeseries.csv")
    lines = path.read_text().splitlines()
    assert len(lines) == 4
    assert lines[0] == "sweep,avg_abs_main,avg_abs_secondary,n_clusters,max_cluster_share"


def test_timeseries_reserializes_to_identical_bytes(tmp_path):
    """Test reading and writing back a time series keeps every byte"""
    first = SerializationService.write_timeseries(make_records(5), tmp_path / "a.csv")
    records = SerializationService.read_timeseries(first)
    assert records == make_records(5)
    second = SerializationService.write_timeseries(records, tmp_path / "b.csv")
    assert first.read_bytes() == second.read_bytes()


def test_write_timeseries_rejects_empty(tmp_path):
    """Test an empty record list is an error"""
    with pytest.raises(SerializationError):
        SerializationService.write_timeseries([], tmp_path / "empty.csv")


def test_write_errors_name_the_path(tmp_path):
    """Test write failures carry the destination"""
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(SerializationError) as exc_info:
        SerializationService.write_timeseries(make_records(1), blocker / "timeseries.csv")
    assert str(blocker) in str(exc_info.value)


def test_snapshot_round_trip(tmp_path):
    """Test snapshots keep full precision, involvement and parameters"""
    params = ModelParams(n_agents=40, h=0.25, u_m=0.3, u_s=0.7, bounded=False, seed=2 ** 63 + 5)
    result = SimulationService.run(RunConfig(params=params, max_sweeps=4, snapshot_every=2))
    original = result.snapshots[-1]
    path = SerializationService.write_snapshot(original, tmp_path / SerializationService.snapshot_filename(original.sweep))
    assert path.name == "sweep_00000004.csv"

    restored = SerializationService.read_snapshot(path)
    assert restored.sweep == 4
    assert restored.params == params
    assert restored.generator == original.generator
    assert np.array_equal(restored.main, original.main)
    assert np.array_equal(restored.secondary, original.secondary)
    assert np.array_equal(restored.hsi, original.hsi)
    assert SerializationService.write_snapshot(restored, tmp_path / "again.csv").read_bytes() == path.read_bytes()


def test_snapshot_header_carries_provenance(tmp_path):
    """Test the header holds format version, parameters and generator"""
    snapshot = Snapshot.from_points([(0.1, 0.2), (0.3, 0.4)], generator="test")
    lines = SerializationService.write_snapshot(snapshot, tmp_path / "s.csv").read_text().splitlines()
    metadata = json.loads(lines[1][2:])
    assert metadata["format_version"] == 1
    assert metadata["generator"] == "test"
    assert metadata["params"]["n_agents"] == 2
    assert lines[2] == "index,involvement,main,secondary"


def test_read_snapshot_validates(tmp_path):
    """Test foreign files and truncated snapshots are rejected"""
    foreign = tmp_path / "foreign.csv"
    foreign.write_text("a,b\n1,2\n")
    with pytest.raises(SerializationError):
        SerializationService.read_snapshot(foreign)

    snapshot = Snapshot.from_points([(0.1, 0.2), (0.3, 0.4), (0.5, 0.6)])
    path = SerializationService.write_snapshot(snapshot, tmp_path / "s.csv")
    path.write_text("\n".join(path.read_text().splitlines()[:-1]) + "\n")
    with pytest.raises(SerializationError):
        SerializationService.read_snapshot(path)


def test_list_snapshots(tmp_path):
    """Test run directories and snapshot folders list files in sweep order"""
    for sweep in (20, 0, 10):
        SerializationService.write_snapshot(Snapshot.from_points([(0.0, 0.0), (1.0, 1.0)], sweep=sweep),
                       tmp_path / "snapshots" / SerializationService.snapshot_filename(sweep))
    names = [path.name for path in SerializationService.list_snapshots(tmp_path)]
    assert names == ["sweep_00000000.csv", "sweep_00000010.csv", "sweep_00000020.csv"]
    assert SerializationService.list_snapshots(tmp_path / "snapshots" / names[0])[0].name == names[0]
    with pytest.raises(SerializationError):
        SerializationService.list_snapshots(tmp_path / "missing")


def test_write_manifest(tmp_path):
    """Test manifests are sorted JSON with the format version"""
    path = SerializationService.write_manifest({"seed": 3, "command": "run"}, tmp_path / "manifest.json")
    body = json.loads(path.read_text())
    assert body["format_version"] == 1
    assert body["project"] == "hsi-norms"
    assert list(body) == sorted(body)
    assert SerializationService.read_manifest(path) == body


def test_read_manifest_rejects_garbage(tmp_path):
    """Test a manifest that is not a JSON object is a serialization error"""
    path = tmp_path / "manifest.json"
    path.write_text("[1, 2]")
    with pytest.raises(SerializationError):
        SerializationService.read_manifest(path)
    path.write_text("{oops")
    with pytest.raises(SerializationError):
        SerializationService.read_manifest(path)


def test_write_density(tmp_path):
    """Test density tables per dimension and the grid"""
    histogram = IndicatorService.density_histogram(np.zeros((4, 2)), bins=2)
    paths = SerializationService.write_density(histogram, tmp_path)
    assert [path.name for path in paths] == ["density_main.csv", "density_secondary.csv", "density_grid.csv"]
    assert (tmp_path / "density_main.csv").read_text().splitlines() == [
        "bin_low,bin_high,count", "-1,0,0", "0,1,4"
    ]
