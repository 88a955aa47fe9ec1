"""
Single simulation: population initialization, random pair scheduling,
simultaneous updates and capture of records and snapshots.

Time is counted in sweeps; one sweep is N pair draws.

Random stream consumption order, per replicate generator:
  init_population   main then secondary of agent 0, agent 1, ...
  interaction_step  index i, index j (redrawn while j == i), X's sign if
                    X's tie branch fires, Y's sign if Y's tie branch fires
"""
import logging
from typing import Callable, List, Optional

import numpy as np

from app.core.errors import SimulationError
from app.schemas.indicators import IndicatorSettings
from app.schemas.model import Attitude, ModelParams
from app.schemas.run import PopulationState, RunConfig, RunResult, Snapshot, TrajectoryRecord
from app.services.indicators import IndicatorService
from app.services.influence import InfluenceService
from app.services.random_stream import RandomStream

logger = logging.getLogger(__name__)

SnapshotSink = Callable[[Snapshot], None]


class SimulationService:
    """Service running one replicate of the mixed population"""

    @staticmethod
    def init_population(params: ModelParams, rng: RandomStream) -> PopulationState:
        """
        Draw uniform attitudes in [-1, +1]; the first round(h * N) agents are HSI

        Args:
            params: Model parameters
            rng: Replicate generator, consumed main then secondary per agent

        Returns:
            The initial population at sweep 0
        """
        if params.n_agents < 2:
            raise SimulationError(f"A population needs at least 2 agents, got {params.n_agents}")
        main: List[float] = []
        secondary: List[float] = []
        for _ in range(params.n_agents):
            main.append(rng.uniform_between(-1.0, 1.0))
            secondary.append(rng.uniform_between(-1.0, 1.0))
        n_hsi = params.n_hsi
        hsi = [index < n_hsi for index in range(params.n_agents)]
        return PopulationState(main=main, secondary=secondary, hsi=hsi)

    @staticmethod
    def influence(is_hsi: bool, agent: Attitude, peer: Attitude, params: ModelParams, rng: RandomStream) -> Attitude:
        if is_hsi:
            updated = InfluenceService.influence_on_hsi(agent, peer, params, rng.sign)
        else:
            updated = InfluenceService.influence_on_non_hsi(agent, peer, params)
        return InfluenceService.clamp(updated, params)

    @staticmethod
    def interaction_step(state: PopulationState, params: ModelParams, rng: RandomStream) -> PopulationState:
        """
        Draw a pair and update both agents from their pre-update attitudes

        Args:
            state: Population, mutated in place
            params: Model parameters
            rng: Replicate generator

        Returns:
            The same state, with pair_draws incremented
        """
        n = len(state.main)
        i = rng.index(n)
        j = rng.index(n)
        while j == i:
            j = rng.index(n)

        x = Attitude(state.main[i], state.secondary[i])
        y = Attitude(state.main[j], state.secondary[j])
        x_new = SimulationService.influence(state.hsi[i], x, y, params, rng)
        y_new = SimulationService.influence(state.hsi[j], y, x, params, rng)

        state.main[i], state.secondary[i] = x_new
        state.main[j], state.secondary[j] = y_new
        state.pair_draws += 1
        return state

    @staticmethod
    def run_sweep(state: PopulationState, params: ModelParams, rng: RandomStream) -> None:
        step = SimulationService.interaction_step
        for _ in range(len(state.main)):
            step(state, params, rng)
        state.sweep += 1

    @staticmethod
    def run(
        config: RunConfig,
        indicator_settings: IndicatorSettings = IndicatorSettings(),
        on_snapshot: Optional[SnapshotSink] = None,
    ) -> RunResult:
        """
        Run until max_sweeps, or earlier once no coordinate moved by more than
        convergence_eps over the trailing convergence_window sweeps.

        A record is taken at sweep 0, every snapshot_every sweeps, and at the
        final sweep. Snapshots follow the same cadence.

        Args:
            config: Parameters, horizon, cadence and stopping rule
            indicator_settings: Clustering settings of the trajectory records
            on_snapshot: Sink receiving each snapshot; without it snapshots are
                kept in the result when capture_snapshots is set

        Returns:
            Final state, trajectory, kept snapshots and convergence flag
        """
        params = config.params
        rng = RandomStream(params.seed)
        state = SimulationService.init_population(params, rng)
        trajectory: List[TrajectoryRecord] = []
        snapshots: List[Snapshot] = []

        def capture() -> None:
            snapshot = state.snapshot(params, rng.family)
            record = IndicatorService.trajectory_record(snapshot, indicator_settings)
            trajectory.append(record)
            logger.debug(
                f"sweep {record.sweep}: avg_abs=({record.avg_abs_main:.4f}, {record.avg_abs_secondary:.4f}) "
                f"major clusters={record.n_clusters}"
            )
            if on_snapshot is not None:
                on_snapshot(snapshot)
            elif config.capture_snapshots:
                snapshots.append(snapshot)

        watch_convergence = config.convergence_eps > 0
        reference = np.array([state.main, state.secondary]) if watch_convergence else None
        still_since = 0
        converged = False

        logger.info(
            f"Starting run: N={params.n_agents} h={params.h:g} u_m={params.u_m:g} u_s={params.u_s:g} "
            f"mu={params.mu:g} bounded={params.bounded} seed={params.seed} max_sweeps={config.max_sweeps}"
        )
        capture()
        while state.sweep < config.max_sweeps:
            SimulationService.run_sweep(state, params, rng)

            if watch_convergence:
                current = np.array([state.main, state.secondary])
                if np.max(np.abs(current - reference)) > config.convergence_eps:
                    reference = current
                    still_since = state.sweep
                elif state.sweep - still_since >= config.convergence_window:
                    converged = True

            if state.sweep % config.snapshot_every == 0:
                capture()
            if converged:
                break

        if trajectory[-1].sweep != state.sweep:
            capture()

        logger.info(
            f"Run finished at sweep {state.sweep} ({state.pair_draws} pair draws, converged={converged})"
        )
        return RunResult(state=state, trajectory=trajectory, snapshots=snapshots, converged=converged)
