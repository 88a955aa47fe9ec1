import argparse
import logging
from pathlib import Path

from app.cli.deps import flag_values, positive_int, read_config_file
from app.core.config import build_config, read_pairs
from app.core.errors import ConfigError
from app.schemas.base import CommandResponse
from app.schemas.indicators import Dimension
from app.schemas.run import Snapshot
from app.services.engine import SimulationService
from app.services.indicators import IndicatorService
from app.services.random_stream import GENERATOR_FAMILY
from app.services.regimes import REGIMES, RegimeService
from app.services.serialization import SerializationService

logger = logging.getLogger(__name__)


def register(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value configuration file")
    parser.add_argument("--preset", choices=sorted(REGIMES), help="Named regime used as the base configuration")
    parser.add_argument("--out", required=True, help="Run directory")
    parser.add_argument("--seed", type=int, help="Replicate seed")
    parser.add_argument("--unbounded", action="store_true", help="Do not clamp attitudes to [-1, +1]")
    parser.add_argument("--max-sweeps", type=positive_int)
    parser.add_argument("--snapshot-every", type=positive_int)
    parser.add_argument("--cluster-epsilon", type=float)
    parser.add_argument("--n-agents", type=int)


def execute(args: argparse.Namespace) -> CommandResponse:
    if args.config is None and args.preset is None:
        raise ConfigError("run needs --config or --preset")

    pairs = read_pairs(read_config_file(args.config))
    overrides = flag_values(
        seed=args.seed,
        bounded=False if args.unbounded else None,
        max_sweeps=args.max_sweeps,
        snapshot_every=args.snapshot_every,
        cluster_epsilon=args.cluster_epsilon,
        n_agents=args.n_agents,
    )
    base = RegimeService.regime_values(args.preset) if args.preset else {}
    if "max_sweeps" in pairs or "max_sweeps" in overrides:
        base.pop("snapshot_every", None)
    document = build_config({**base, **pairs, **overrides})

    out = Path(args.out)
    snapshot_dir = out / "snapshots"
    written = []

    def store(snapshot: Snapshot) -> None:
        path = snapshot_dir / SerializationService.snapshot_filename(snapshot.sweep)
        written.append(SerializationService.write_snapshot(snapshot, path))

    indicator_settings = document.indicator_settings()
    thresholds = document.thresholds()
    result = SimulationService.run(
        document.to_run_config(capture_snapshots=False), indicator_settings, on_snapshot=store
    )

    final = result.state.snapshot(document.to_params(), GENERATOR_FAMILY)
    report = IndicatorService.compute_report(final, indicator_settings)
    main_code, secondary_code = IndicatorService.classify_both(report, thresholds)
    timeseries = SerializationService.write_timeseries(result.trajectory, out / "timeseries.csv")

    summary = {
        "stopped_at": result.stopped_at,
        "converged": result.converged,
        "final": report.summary(),
        "pattern": {Dimension.MAIN.value: int(main_code), Dimension.SECONDARY.value: int(secondary_code)},
        "norm_change": {
            dimension.value: IndicatorService.interpret_norm_change(result.trajectory, dimension, thresholds).value
            for dimension in Dimension
        },
    }
    manifest = SerializationService.write_manifest(
        {
            "command": "run",
            "preset": args.preset,
            "config": document.model_dump(mode="json"),
            "applied_defaults": document.applied_defaults,
            "generator": GENERATOR_FAMILY,
            "seed": document.seed,
            "records": len(result.trajectory),
            "snapshots": [path.name for path in written],
            **summary,
        },
        out / "manifest.json",
    )
    logger.info(f"Wrote {timeseries}, {len(written)} snapshot(s) and {manifest}")
    return CommandResponse.success_response(
        command="run",
        data={"out": str(out), **summary},
        message=f"Run finished at sweep {result.stopped_at}",
    )
