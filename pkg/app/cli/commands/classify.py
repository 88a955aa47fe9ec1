import argparse
import logging
from pathlib import Path
from typing import Dict

import pandas as pd

from app.cli.deps import flag_values, read_config_file
from app.core.config import build_config, read_pairs
from app.core.errors import SerializationError
from app.schemas.base import CommandResponse
from app.services.experiment import INDICATOR_KEYS, THRESHOLD_KEYS
from app.services.indicators import IndicatorService
from app.services.serialization import SerializationService

logger = logging.getLogger(__name__)


def register(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--snapshots", required=True, help="Run directory, snapshots folder or single snapshot file")
    parser.add_argument("--config", help="key=value file with clustering settings and classifier thresholds")
    parser.add_argument("--cluster-epsilon", type=float)
    parser.add_argument("--out", help="Output directory (defaults to the snapshot location)")


def run_directory(first_snapshot: Path) -> Path:
    folder = first_snapshot.parent
    return folder.parent if folder.name == "snapshots" else folder


def manifest_settings(directory: Path) -> Dict[str, object]:
    """Clustering settings and thresholds a run was classified with, if its manifest is present"""
    path = directory / "manifest.json"
    if not path.is_file():
        return {}
    config = SerializationService.read_manifest(path).get("config")
    if not isinstance(config, dict):
        return {}
    return {key: config[key] for key in INDICATOR_KEYS + THRESHOLD_KEYS if key in config}


def execute(args: argparse.Namespace) -> CommandResponse:
    paths = SerializationService.list_snapshots(args.snapshots)
    if not paths:
        raise SerializationError("No snapshot files found", path=args.snapshots)

    directory = run_directory(paths[0])
    stored = manifest_settings(directory)
    if stored:
        logger.info(f"Using clustering settings and thresholds of {directory / 'manifest.json'}")
    pairs = read_pairs(read_config_file(args.config))
    rows = []
    for path in paths:
        snapshot = SerializationService.read_snapshot(path)
        params = snapshot.params
        # unset model keys come from the parameters stored with the snapshot
        document = build_config({
            "n_agents": params.n_agents, "h": params.h, "u_m": params.u_m, "u_s": params.u_s,
            "mu": params.mu, "bounded": params.bounded, "seed": params.seed,
            **stored,
            **pairs,
            **flag_values(cluster_epsilon=args.cluster_epsilon),
        })
        report = IndicatorService.compute_report(snapshot, document.indicator_settings())
        main_code, secondary_code = IndicatorService.classify_both(report, document.thresholds())
        rows.append({
            "file": path.name,
            "sweep": snapshot.sweep,
            "n_agents": params.n_agents,
            "h": params.h,
            "u_m": params.u_m,
            "u_s": params.u_s,
            "bounded": params.bounded,
            "seed": params.seed,
            "cluster_epsilon": document.cluster_epsilon,
            **report.summary(),
            "pattern_main": int(main_code),
            "pattern_secondary": int(secondary_code),
        })
        logger.debug(f"{path.name}: patterns ({main_code.name}, {secondary_code.name})")

    out = Path(args.out) if args.out else directory
    destination = SerializationService.write_frame(pd.DataFrame(rows), out / "classification.csv")
    logger.info(f"Classified {len(rows)} snapshot(s) into {destination}")
    return CommandResponse.success_response(
        command="classify",
        data={"out": str(destination), "snapshots": len(rows), "last": rows[-1]},
        message=f"Classified {len(rows)} snapshot(s)",
    )
