"""
File formats: time series, snapshots, run manifests, pattern cells, phase
maps and density tables. All tables are comma-separated text with a header
row; floats are written with 17 significant digits so that files round-trip
losslessly and re-serialize to identical bytes.
"""
import io
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import numpy as np
import pandas as pd

from app.core.config import settings
from app.core.errors import SerializationError
from app.schemas.experiment import PatternCell, PhaseMap
from app.schemas.indicators import DensityHistogram
from app.schemas.model import Involvement, ModelParams
from app.schemas.run import Snapshot, TrajectoryRecord
from app.services.experiment import ExperimentService

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

FLOAT_FORMAT = "%.17g"
SNAPSHOT_MAGIC = "# hsi-norms snapshot"


def _write_text(path: PathLike, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
    except OSError as e:
        raise SerializationError(f"Cannot write file: {e.strerror}", path=str(path)) from e
    return path


def _read_text(path: PathLike) -> str:
    try:
        with open(path, "r", encoding="utf-8", newline="") as handle:
            return handle.read()
    except OSError as e:
        raise SerializationError(f"Cannot read file: {e.strerror}", path=str(path)) from e


class SerializationService:
    """Service reading and writing run and sweep artifacts"""

    @staticmethod
    def frame_to_csv(frame: pd.DataFrame, index: bool = False) -> str:
        return frame.to_csv(index=index, float_format=FLOAT_FORMAT, lineterminator="\n")

    @staticmethod
    def write_timeseries(records: Sequence[TrajectoryRecord], destination: PathLike) -> Path:
        """
        Write trajectory records as a header row followed by one row per record

        Args:
            records: Records of a run, in sweep order
            destination: Target file

        Returns:
            The written path
        """
        if not records:
            raise SerializationError("No trajectory records to write", path=str(destination))
        frame = pd.DataFrame([record.model_dump() for record in records], columns=list(TrajectoryRecord.COLUMNS))
        return _write_text(destination, SerializationService.frame_to_csv(frame))

    @staticmethod
    def read_timeseries(source: PathLike) -> List[TrajectoryRecord]:
        frame = pd.read_csv(io.StringIO(_read_text(source)), float_precision="round_trip")
        missing = set(TrajectoryRecord.COLUMNS) - set(frame.columns)
        if missing:
            raise SerializationError(f"Time series lacks columns {sorted(missing)}", path=str(source))
        return [TrajectoryRecord(**row) for row in frame.to_dict(orient="records")]

    @staticmethod
    def snapshot_filename(sweep: int) -> str:
        return f"sweep_{sweep:08d}.csv"

    @staticmethod
    def snapshot_metadata(snapshot: Snapshot) -> Dict[str, Any]:
        return {
            "format_version": settings.FORMAT_VERSION,
            "generator": snapshot.generator,
            "params": snapshot.params.model_dump(mode="json"),
            "sweep": snapshot.sweep,
        }

    @staticmethod
    def write_snapshot(snapshot: Snapshot, destination: PathLike) -> Path:
        """
        Write a snapshot: header comment lines (format version, parameters,
        generator, sweep) followed by one row per agent

        Args:
            snapshot: Population state to write
            destination: Target file

        Returns:
            The written path
        """
        frame = pd.DataFrame(
            {
                "index": np.arange(snapshot.n_agents),
                "involvement": np.where(snapshot.hsi, Involvement.HSI.value, Involvement.NON_HSI.value),
                "main": snapshot.main,
                "secondary": snapshot.secondary,
            }
        )
        metadata = json.dumps(SerializationService.snapshot_metadata(snapshot), sort_keys=True)
        header = f"{SNAPSHOT_MAGIC}\n# {metadata}\n"
        return _write_text(destination, header + SerializationService.frame_to_csv(frame))

    @staticmethod
    def read_snapshot(source: PathLike) -> Snapshot:
        """
        Read a snapshot written by write_snapshot

        Args:
            source: Snapshot file

        Returns:
            The snapshot, agents in index order
        """
        text = _read_text(source)
        lines = text.split("\n", 2)
        if len(lines) < 3 or lines[0] != SNAPSHOT_MAGIC or not lines[1].startswith("# "):
            raise SerializationError("Not a snapshot file", path=str(source))
        try:
            metadata = json.loads(lines[1][2:])
            frame = pd.read_csv(io.StringIO(lines[2]), float_precision="round_trip")
            params = ModelParams(**metadata["params"])
        except (ValueError, KeyError) as e:
            raise SerializationError(f"Malformed snapshot: {e}", path=str(source)) from e
        if len(frame) != params.n_agents:
            raise SerializationError(
                f"Snapshot holds {len(frame)} rows for n_agents={params.n_agents}", path=str(source)
            )
        frame = frame.sort_values("index")
        return Snapshot(
            sweep=int(metadata["sweep"]),
            params=params,
            generator=metadata.get("generator", ""),
            main=frame["main"].to_numpy(dtype=np.float64),
            secondary=frame["secondary"].to_numpy(dtype=np.float64),
            hsi=(frame["involvement"] == Involvement.HSI.value).to_numpy(),
        )

    @staticmethod
    def list_snapshots(directory: PathLike) -> List[Path]:
        """Snapshot files of a run directory (or of its snapshots/ folder), in sweep order"""
        directory = Path(directory)
        if (directory / "snapshots").is_dir():
            directory = directory / "snapshots"
        if directory.is_file():
            return [directory]
        if not directory.is_dir():
            raise SerializationError("No such snapshot directory", path=str(directory))
        return sorted(directory.glob("sweep_*.csv"))

    @staticmethod
    def write_manifest(payload: Dict[str, Any], destination: PathLike) -> Path:
        body = {"format_version": settings.FORMAT_VERSION, "project": settings.PROJECT_NAME, **payload}
        return _write_text(destination, json.dumps(body, sort_keys=True, indent=2, default=str) + "\n")

    @staticmethod
    def read_manifest(source: PathLike) -> Dict[str, Any]:
        try:
            manifest = json.loads(_read_text(source))
        except ValueError as e:
            raise SerializationError(f"Malformed manifest: {e}", path=str(source)) from e
        if not isinstance(manifest, dict):
            raise SerializationError("Malformed manifest: not an object", path=str(source))
        return manifest

    @staticmethod
    def write_pattern_cells(cells: Sequence[PatternCell], destination: PathLike) -> Path:
        return _write_text(destination, SerializationService.frame_to_csv(ExperimentService.cells_frame(cells)))

    @staticmethod
    def write_failures(cells: Sequence[PatternCell], destination: PathLike) -> Path:
        rows = [
            {"u_m": cell.u_m, "u_s": cell.u_s, "h": cell.h, "bounded": cell.bounded, "failure": failure}
            for cell in cells
            for failure in cell.failures
        ]
        frame = pd.DataFrame(rows, columns=["u_m", "u_s", "h", "bounded", "failure"])
        return _write_text(destination, SerializationService.frame_to_csv(frame))

    @staticmethod
    def write_phase_map(phase_map: PhaseMap, directory: PathLike) -> List[Path]:
        """Long form (u_m, u_s, value, missing) and the dense u_s x u_m matrix"""
        directory = Path(directory)
        name = phase_map.quantity.value
        to_csv = SerializationService.frame_to_csv
        return [
            _write_text(directory / f"{name}_long.csv", to_csv(phase_map.long)),
            _write_text(directory / f"{name}_matrix.csv", to_csv(phase_map.matrix, index=True)),
        ]

    @staticmethod
    def write_frame(frame: pd.DataFrame, destination: PathLike) -> Path:
        return _write_text(destination, SerializationService.frame_to_csv(frame))

    @staticmethod
    def write_density(histogram: DensityHistogram, directory: PathLike) -> List[Path]:
        """
        Write the two 1D density tables and the 2D grid

        Args:
            histogram: Counts and edges from the density histogram
            directory: Target directory

        Returns:
            Paths of density_main.csv, density_secondary.csv and density_grid.csv
        """
        directory = Path(directory)
        to_csv = SerializationService.frame_to_csv
        paths = []
        for name, edges, counts in (
            ("main", histogram.edges_main, histogram.counts_main),
            ("secondary", histogram.edges_secondary, histogram.counts_secondary),
        ):
            frame = pd.DataFrame({"bin_low": edges[:-1], "bin_high": edges[1:], "count": counts})
            paths.append(_write_text(directory / f"density_{name}.csv", to_csv(frame)))

        grid = pd.DataFrame(
            histogram.grid,
            index=pd.Index(histogram.edges_main[:-1], name="main_low"),
            columns=[FLOAT_FORMAT % edge for edge in histogram.edges_secondary[:-1]],
        )
        paths.append(_write_text(directory / "density_grid.csv", to_csv(grid, index=True)))
        return paths
