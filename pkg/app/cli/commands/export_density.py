import argparse
import logging
from pathlib import Path

from app.cli.deps import positive_int
from app.schemas.base import CommandResponse
from app.services.indicators import IndicatorService
from app.services.serialization import SerializationService

logger = logging.getLogger(__name__)


def register(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--snapshot", required=True, help="Snapshot file")
    parser.add_argument("--bins", type=positive_int, default=50)
    parser.add_argument("--out", required=True, help="Output directory")


def execute(args: argparse.Namespace) -> CommandResponse:
    snapshot = SerializationService.read_snapshot(args.snapshot)
    bounds = IndicatorService.density_bounds(snapshot)
    histogram = IndicatorService.density_histogram(snapshot, bins=args.bins, bounds=bounds)
    written = SerializationService.write_density(histogram, Path(args.out))
    logger.info(f"Wrote density tables of sweep {snapshot.sweep} to {args.out}")
    return CommandResponse.success_response(
        command="export-density",
        data={"files": [str(path) for path in written], "sweep": snapshot.sweep, "bounds": bounds},
        message=f"Density tables written ({args.bins} bins)",
    )
