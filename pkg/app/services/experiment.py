"""
Experimental design: the (u_m, u_s) grid with replicates, h variation and
the bounded/unbounded pair, aggregated into pattern cells and phase maps.
"""
import logging
import math
from collections import Counter, defaultdict
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import delayed

from app.core.config import ConfigDocument, settings
from app.core.errors import GridError
from app.schemas.experiment import (
    Boundedness,
    ExperimentPlan,
    PatternCell,
    PhaseMap,
    PhaseQuantity,
    ReplicateJob,
    ReplicateOutcome,
)
from app.schemas.indicators import ClassifierThresholds, IndicatorSettings, PatternCode
from app.schemas.model import ModelParams
from app.schemas.run import RunConfig
from app.services.random_stream import derive_seed
from app.tasks.replicates import simulate_replicate
from app.worker import replicate_pool

logger = logging.getLogger(__name__)

CellKey = Tuple[int, int, int, Boundedness]

PARAM_KEYS = ("n_agents", "mu")
RUN_KEYS = ("max_sweeps", "snapshot_every", "convergence_eps", "convergence_window")
INDICATOR_KEYS = ("cluster_epsilon", "major_share_threshold")
THRESHOLD_KEYS = (
    "single_moderate_max", "moderate_margin", "dip_threshold", "rise_threshold", "count_basis", "min_major_coverage",
)


def _cell_value(cell: PatternCell, quantity: PhaseQuantity) -> float:
    if cell.voided:
        return float("nan")
    if quantity is PhaseQuantity.MEAN_AVG_ABS_MAIN:
        return cell.mean_avg_abs[0]
    if quantity is PhaseQuantity.MEAN_AVG_ABS_SECONDARY:
        return cell.mean_avg_abs[1]
    if quantity is PhaseQuantity.MAJORITY_PATTERN_MAIN:
        return float(cell.majority_pattern[0])
    if quantity is PhaseQuantity.MAJORITY_PATTERN_SECONDARY:
        return float(cell.majority_pattern[1])
    return cell.mean_n_major


class ExperimentService:
    """Service building experiment plans, running them and emitting phase maps"""

    @staticmethod
    def threshold_grid(step: float = 0.05, stop: float = 1.0) -> List[float]:
        """step, 2 * step, ..., stop, rounded to clean decimals"""
        count = int(round(stop / step))
        return [round(step * k, 10) for k in range(1, count + 1)]

    @staticmethod
    def build_default_plan() -> ExperimentPlan:
        grid = ExperimentService.threshold_grid()
        template = RunConfig(
            params=ModelParams(n_agents=10_000, h=0.1, u_m=grid[0], u_s=grid[0], mu=0.5),
            max_sweeps=settings.MAP_MAX_SWEEPS,
            snapshot_every=1000,
            capture_snapshots=False,
        )
        return ExperimentPlan(
            u_m_values=grid,
            u_s_values=grid,
            h_values=[0.1],
            replicates=10,
            run_config_template=template,
        )

    @staticmethod
    def build_h_sweep_plan() -> ExperimentPlan:
        """h sensitivity at small u_m and large u_s, where HSI agents may keep moving"""
        template = RunConfig(
            params=ModelParams(n_agents=5000, h=0.0, u_m=0.05, u_s=1.1, mu=0.5),
            max_sweeps=settings.MAP_MAX_SWEEPS,
            snapshot_every=1000,
            capture_snapshots=False,
        )
        return ExperimentPlan(
            u_m_values=[0.05],
            u_s_values=[1.1],
            h_values=[round(0.05 * k, 10) for k in range(21)],
            replicates=10,
            run_config_template=template,
        )

    @staticmethod
    def scale_plan(
        plan: ExperimentPlan,
        scale: str = "paper",
        n_agents: Optional[int] = None,
        replicates: Optional[int] = None,
        max_sweeps: Optional[int] = None,
    ) -> ExperimentPlan:
        """
        Rescale a plan for the available compute

        Args:
            plan: Plan to rescale
            scale: "paper" keeps the plan sizes, "desk" lowers N and the replicate count
            n_agents: Explicit population size, wins over the scale
            replicates: Explicit replicate count, wins over the scale
            max_sweeps: Explicit horizon; the cadence is capped to it

        Returns:
            The rescaled plan
        """
        if scale not in ("paper", "desk"):
            raise ValueError(f"Unknown scale: {scale}")
        template = plan.run_config_template
        params_update = {}
        plan_update = {}
        if scale == "desk":
            params_update["n_agents"] = settings.DESK_N_AGENTS
            plan_update["replicates"] = settings.DESK_REPLICATES
        if n_agents is not None:
            params_update["n_agents"] = n_agents
        if replicates is not None:
            plan_update["replicates"] = replicates

        run_update = {}
        if params_update:
            run_update["params"] = ModelParams(**{**template.params.model_dump(), **params_update})
        if max_sweeps is not None:
            run_update["max_sweeps"] = max_sweeps
            run_update["snapshot_every"] = min(template.snapshot_every, max_sweeps)
        if run_update:
            plan_update["run_config_template"] = RunConfig(**{**template.model_dump(), **run_update})
        return ExperimentPlan(**{**plan.model_dump(), **plan_update})

    @staticmethod
    def apply_config(plan: ExperimentPlan, document: ConfigDocument, keys: Iterable[str]) -> ExperimentPlan:
        """
        Overlay the given keys of a configuration document on a plan

        Single u_m, u_s or h values become one-value grids unless the matching
        *_values key is also given; bounded restricts the plan to that
        boundedness case. Per-run seeds always derive from base_seed.

        Args:
            plan: Plan to update
            document: Validated configuration
            keys: Keys set explicitly by the configuration text or flags

        Returns:
            The updated plan
        """
        keys = set(keys)
        template = plan.run_config_template
        update: Dict[str, object] = {}

        for single, grid in (("u_m", "u_m_values"), ("u_s", "u_s_values"), ("h", "h_values")):
            if grid in keys:
                update[grid] = getattr(document, grid)
            elif single in keys:
                update[grid] = [getattr(document, single)]
        for key in ("replicates", "base_seed"):
            if key in keys:
                update[key] = getattr(document, key)
        if "bounded" in keys:
            update["boundedness_cases"] = [Boundedness.BOUNDED if document.bounded else Boundedness.UNBOUNDED]

        params = {**template.params.model_dump(), **{key: getattr(document, key) for key in PARAM_KEYS if key in keys}}
        run_fields = {key: getattr(document, key) for key in RUN_KEYS if key in keys}
        if "max_sweeps" in keys and "snapshot_every" not in keys:
            run_fields["snapshot_every"] = min(template.snapshot_every, document.max_sweeps)
        update["run_config_template"] = RunConfig(
            **{**template.model_dump(), **run_fields, "params": ModelParams(**params)}
        )
        indicator_fields = {key: getattr(document, key) for key in INDICATOR_KEYS if key in keys}
        threshold_fields = {key: getattr(document, key) for key in THRESHOLD_KEYS if key in keys}
        update["indicator_settings"] = IndicatorSettings(**{**plan.indicator_settings.model_dump(), **indicator_fields})
        update["thresholds"] = ClassifierThresholds(**{**plan.thresholds.model_dump(), **threshold_fields})
        return ExperimentPlan(**{**plan.model_dump(), **update})

    @staticmethod
    def plan_values(plan: ExperimentPlan) -> Dict[str, object]:
        """Effective value of every configuration key a plan honours"""
        template = plan.run_config_template
        values: Dict[str, object] = {key: getattr(template.params, key) for key in PARAM_KEYS}
        values.update({key: getattr(template, key) for key in RUN_KEYS})
        values.update({key: getattr(plan.indicator_settings, key) for key in INDICATOR_KEYS})
        values.update({key: getattr(plan.thresholds, key) for key in THRESHOLD_KEYS})
        values.update({
            "replicates": plan.replicates,
            "base_seed": plan.base_seed,
            "u_m_values": list(plan.u_m_values),
            "u_s_values": list(plan.u_s_values),
            "h_values": list(plan.h_values),
            "boundedness_cases": [case.value for case in plan.boundedness_cases],
        })
        return values

    @staticmethod
    def plan_jobs(plan: ExperimentPlan) -> List[ReplicateJob]:
        """Every (cell, replicate, boundedness) run in deterministic cell order"""
        template = plan.run_config_template
        base_params = template.params.model_dump()
        jobs = []
        for h_index, h in enumerate(plan.h_values):
            for u_m_index, u_m in enumerate(plan.u_m_values):
                for u_s_index, u_s in enumerate(plan.u_s_values):
                    for boundedness in plan.boundedness_cases:
                        for replicate in range(plan.replicates):
                            seed = derive_seed(
                                plan.base_seed, u_m_index, u_s_index, h_index, replicate, boundedness.value
                            )
                            params = ModelParams(
                                **{**base_params, "h": h, "u_m": u_m, "u_s": u_s,
                                   "bounded": boundedness.flag, "seed": seed}
                            )
                            jobs.append(
                                ReplicateJob(
                                    u_m_index=u_m_index,
                                    u_s_index=u_s_index,
                                    h_index=h_index,
                                    replicate=replicate,
                                    boundedness=boundedness,
                                    run_config=RunConfig(**{**template.model_dump(), "params": params}),
                                    indicator_settings=plan.indicator_settings,
                                    thresholds=plan.thresholds,
                                )
                            )
        return jobs

    @staticmethod
    def majority_code(codes: Sequence[PatternCode], replicates: int) -> PatternCode:
        """Code reached by at least half of the replicates, otherwise UNCLASSIFIED"""
        if not codes:
            return PatternCode.UNCLASSIFIED
        needed = math.ceil(replicates / 2)
        code, count = min(Counter(codes).items(), key=lambda item: (-item[1], int(item[0])))
        return code if count >= needed else PatternCode.UNCLASSIFIED

    @staticmethod
    def aggregate_cell(plan: ExperimentPlan, key: CellKey, outcomes: List[ReplicateOutcome]) -> PatternCell:
        u_m_index, u_s_index, h_index, boundedness = key
        outcomes = sorted(outcomes, key=lambda outcome: outcome.job.replicate)
        succeeded = [outcome for outcome in outcomes if not outcome.failed]
        failures = [f"{outcome.job.describe()}: {outcome.error}" for outcome in outcomes if outcome.failed]

        if succeeded:
            values = np.array([[o.report.avg_abs_main, o.report.avg_abs_secondary] for o in succeeded])
            mean = values.mean(axis=0)
            std = values.std(axis=0)
            mean_n_major = float(np.mean([o.report.n_major_clusters for o in succeeded]))
        else:
            mean = std = np.full(2, np.nan)
            mean_n_major = float("nan")

        majority = None
        if not failures:
            majority = (
                ExperimentService.majority_code([o.codes[0] for o in succeeded], plan.replicates),
                ExperimentService.majority_code([o.codes[1] for o in succeeded], plan.replicates),
            )

        cell = PatternCell(
            u_m=plan.u_m_values[u_m_index],
            u_s=plan.u_s_values[u_s_index],
            h=plan.h_values[h_index],
            bounded=boundedness.flag,
            per_replicate=[(o.report, o.codes) for o in succeeded],
            mean_avg_abs=(float(mean[0]), float(mean[1])),
            std_avg_abs=(float(std[0]), float(std[1])),
            mean_n_major=mean_n_major,
            majority_pattern=majority,
            seeds=[o.job.seed for o in outcomes],
            failures=failures,
        )
        if cell.voided:
            logger.warning(f"Cell {cell.coordinates} voided by {len(failures)} failed replicate(s)")
        elif max(cell.std_avg_abs) > settings.REPLICATE_STD_BAND:
            logger.warning(
                f"Cell {cell.coordinates}: replicate std of avg_abs {max(cell.std_avg_abs):.3f} "
                f"exceeds {settings.REPLICATE_STD_BAND}"
            )
        return cell

    @staticmethod
    def execute_plan(plan: ExperimentPlan, parallelism: int = 1) -> List[PatternCell]:
        """
        Run every replicate of the plan and aggregate per cell

        Results do not depend on parallelism: seeds come from cell coordinates
        and aggregation follows plan order.

        Args:
            plan: Plan to execute
            parallelism: Worker processes; 1 runs in-process

        Returns:
            One pattern cell per (h, u_m, u_s, boundedness), in plan order
        """
        if parallelism < 1:
            raise ValueError(f"Parallelism must be a positive integer, got {parallelism}")
        jobs = ExperimentService.plan_jobs(plan)
        logger.info(f"Executing plan: {plan.n_cells} cells, {len(jobs)} runs, parallelism={parallelism}")

        if parallelism == 1:
            outcomes = [simulate_replicate(job) for job in jobs]
        else:
            outcomes = replicate_pool(parallelism)(delayed(simulate_replicate)(job) for job in jobs)

        by_cell: Dict[CellKey, List[ReplicateOutcome]] = defaultdict(list)
        for outcome in outcomes:
            by_cell[outcome.job.cell_key].append(outcome)

        cells = []
        for key, cell_outcomes in by_cell.items():
            cell = ExperimentService.aggregate_cell(plan, key, cell_outcomes)
            logger.info(f"Cell {cell.coordinates}: majority pattern {cell.majority_pattern}")
            cells.append(cell)
        return cells

    @staticmethod
    def emit_phase_map(cells: Sequence[PatternCell], quantity: PhaseQuantity) -> PhaseMap:
        """
        Dense (u_m, u_s) table of one quantity

        Args:
            cells: Cells of a single (h, boundedness) slice forming a full grid
            quantity: Quantity to map; voided cells are missing

        Returns:
            Long-form table and the u_s x u_m matrix
        """
        if not cells:
            raise GridError("No cells to map")
        slices = {(cell.h, cell.bounded) for cell in cells}
        if len(slices) != 1:
            raise GridError(f"Cells span {len(slices)} (h, boundedness) slices; map one slice at a time")
        h, bounded = slices.pop()

        u_m_values = sorted({cell.u_m for cell in cells})
        u_s_values = sorted({cell.u_s for cell in cells})
        coordinates = Counter((cell.u_m, cell.u_s) for cell in cells)
        if len(cells) != len(u_m_values) * len(u_s_values) or max(coordinates.values()) > 1:
            raise GridError(
                f"Ragged grid: {len(cells)} cells for {len(u_m_values)} u_m x {len(u_s_values)} u_s values"
            )

        long = pd.DataFrame(
            {
                "u_m": [cell.u_m for cell in cells],
                "u_s": [cell.u_s for cell in cells],
                "value": [_cell_value(cell, quantity) for cell in cells],
                "missing": [cell.voided for cell in cells],
            }
        ).sort_values(["u_m", "u_s"], ignore_index=True)
        matrix = long.pivot(index="u_s", columns="u_m", values="value")
        return PhaseMap(quantity=quantity, h=h, bounded=bounded, long=long, matrix=matrix)

    @staticmethod
    def group_by_slice(cells: Iterable[PatternCell]) -> Dict[Tuple[float, bool], List[PatternCell]]:
        slices: Dict[Tuple[float, bool], List[PatternCell]] = defaultdict(list)
        for cell in cells:
            slices[(cell.h, cell.bounded)].append(cell)
        return dict(sorted(slices.items(), key=lambda item: (item[0][0], not item[0][1])))

    @staticmethod
    def cells_frame(cells: Sequence[PatternCell]) -> pd.DataFrame:
        rows = []
        for cell in cells:
            main_code, secondary_code = cell.majority_pattern or (None, None)
            rows.append(
                {
                    "u_m": cell.u_m,
                    "u_s": cell.u_s,
                    "h": cell.h,
                    "bounded": cell.bounded,
                    "replicates": len(cell.per_replicate),
                    "mean_avg_abs_main": cell.mean_avg_abs[0],
                    "mean_avg_abs_secondary": cell.mean_avg_abs[1],
                    "std_avg_abs_main": cell.std_avg_abs[0],
                    "std_avg_abs_secondary": cell.std_avg_abs[1],
                    "mean_n_major_clusters": cell.mean_n_major,
                    "majority_pattern_main": None if main_code is None else int(main_code),
                    "majority_pattern_secondary": None if secondary_code is None else int(secondary_code),
                    "voided": cell.voided,
                }
            )
        frame = pd.DataFrame(rows)
        for column in ("majority_pattern_main", "majority_pattern_secondary"):
            frame[column] = frame[column].astype("Int64")
        return frame

    @staticmethod
    def emit_h_profile(cells: Sequence[PatternCell]) -> pd.DataFrame:
        """Secondary-dimension polarization and major-cluster count as functions of h"""
        frame = ExperimentService.cells_frame(cells)
        columns = ["h", "bounded", "u_m", "u_s", "mean_avg_abs_secondary", "std_avg_abs_secondary",
                   "mean_n_major_clusters", "voided"]
        return frame[columns].sort_values(["bounded", "h", "u_m", "u_s"], ascending=[False, True, True, True],
                                          ignore_index=True)


PLANS = {
    "default": ExperimentService.build_default_plan,
    "h-sweep": ExperimentService.build_h_sweep_plan,
}
