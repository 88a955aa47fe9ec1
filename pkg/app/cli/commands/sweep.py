import argparse
import logging
from pathlib import Path

from app.cli.deps import flag_values, positive_int, read_config_file
from app.core.config import build_config, read_pairs, settings
from app.core.errors import SweepFailedError
from app.schemas.base import CommandResponse
from app.schemas.experiment import Boundedness, PhaseQuantity
from app.services.experiment import PLANS, ExperimentService
from app.services.random_stream import GENERATOR_FAMILY
from app.services.serialization import SerializationService

logger = logging.getLogger(__name__)

# single-value keys and the plan entries they set
GRID_ALIASES = {"u_m": "u_m_values", "u_s": "u_s_values", "h": "h_values", "bounded": "boundedness_cases"}


def register(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--plan", choices=sorted(PLANS), default="default")
    parser.add_argument("--scale", choices=["paper", "desk"], default="paper",
                        help="desk lowers the population size and the replicate count")
    parser.add_argument("--out", required=True, help="Output directory")
    parser.add_argument("--config", help="key=value file overriding plan grids, thresholds and run settings")
    parser.add_argument("--parallelism", type=positive_int, default=settings.DEFAULT_PARALLELISM)
    parser.add_argument("--seed", type=int, help="Base seed of the plan")
    parser.add_argument("--max-sweeps", type=positive_int)
    parser.add_argument("--replicates", type=positive_int)
    parser.add_argument("--n-agents", type=int)
    parser.add_argument("--cluster-epsilon", type=float)
    parser.add_argument("--unbounded", action="store_true", help="Run the unbounded case only")


def execute(args: argparse.Namespace) -> CommandResponse:
    plan = ExperimentService.scale_plan(PLANS[args.plan](), args.scale)

    pairs = read_pairs(read_config_file(args.config))
    overrides = flag_values(
        base_seed=args.seed,
        max_sweeps=args.max_sweeps,
        replicates=args.replicates,
        n_agents=args.n_agents,
        cluster_epsilon=args.cluster_epsilon,
        bounded=False if args.unbounded else None,
    )
    placeholders = {"u_m": plan.u_m_values[0], "u_s": plan.u_s_values[0]}
    document = build_config({**placeholders, **pairs, **overrides})
    explicit = set(pairs) | set(overrides)
    plan = ExperimentService.apply_config(plan, document, keys=explicit)
    given = explicit | {GRID_ALIASES[key] for key in explicit if key in GRID_ALIASES}
    applied_defaults = {
        key: value for key, value in ExperimentService.plan_values(plan).items() if key not in given
    }

    cells = ExperimentService.execute_plan(plan, parallelism=args.parallelism)

    out = Path(args.out)
    written = [SerializationService.write_pattern_cells(cells, out / "cells.csv")]
    written.append(SerializationService.write_frame(ExperimentService.emit_h_profile(cells), out / "h_profile.csv"))
    failed = [cell for cell in cells if cell.voided]
    if failed:
        written.append(SerializationService.write_failures(failed, out / "failures.csv"))

    for (h, bounded), slice_cells in ExperimentService.group_by_slice(cells).items():
        case = Boundedness.BOUNDED if bounded else Boundedness.UNBOUNDED
        directory = out / "maps" / case.value / f"h{h:g}"
        for quantity in PhaseQuantity:
            phase_map = ExperimentService.emit_phase_map(slice_cells, quantity)
            written.extend(SerializationService.write_phase_map(phase_map, directory))

    SerializationService.write_manifest(
        {
            "command": "sweep",
            "plan": args.plan,
            "scale": args.scale,
            "generator": GENERATOR_FAMILY,
            "experiment": plan.model_dump(mode="json"),
            "applied_defaults": applied_defaults,
            "cells": len(cells),
            "voided_cells": [cell.coordinates for cell in failed],
        },
        out / "manifest.json",
    )
    logger.info(f"Wrote {len(written) + 1} files under {out}")

    if failed:
        raise SweepFailedError([cell.coordinates for cell in failed])
    return CommandResponse.success_response(
        command="sweep",
        data={"out": str(out), "cells": len(cells), "runs": plan.n_runs},
        message=f"Sweep finished: {len(cells)} cells",
    )
