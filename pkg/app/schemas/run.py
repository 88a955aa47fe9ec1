from dataclasses import dataclass, field
from typing import ClassVar, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from app.schemas.model import Agent, Attitude, Involvement, ModelParams


class RunConfig(BaseModel):
    params: ModelParams
    max_sweeps: int = Field(100_000, gt=0)
    snapshot_every: int = Field(100, gt=0, description="Sweeps between captured records and snapshots")
    convergence_eps: float = Field(0.0, ge=0.0, allow_inf_nan=False, description="0 disables early stop")
    convergence_window: int = Field(100, gt=0, description="Sweeps without movement before early stop")
    capture_snapshots: bool = True

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def check_cadence(self) -> "RunConfig":
        if self.snapshot_every > self.max_sweeps:
            raise ValueError("snapshot_every must not exceed max_sweeps")
        return self


class TrajectoryRecord(BaseModel):
    sweep: int = Field(..., ge=0)
    avg_abs_main: float = Field(..., ge=0.0)
    avg_abs_secondary: float = Field(..., ge=0.0)
    n_clusters: int = Field(..., ge=0)
    max_cluster_share: float = Field(..., ge=0.0, le=1.0)

    model_config = {"frozen": True}

    COLUMNS: ClassVar[Tuple[str, ...]] = ("sweep", "avg_abs_main", "avg_abs_secondary", "n_clusters", "max_cluster_share")


@dataclass
class PopulationState:
    """Mutable population; attitudes are kept as plain lists for the update loop"""
    main: List[float]
    secondary: List[float]
    hsi: List[bool]
    sweep: int = 0
    pair_draws: int = 0

    @property
    def n_agents(self) -> int:
        return len(self.main)

    @property
    def n_hsi(self) -> int:
        return sum(self.hsi)

    def attitude(self, index: int) -> Attitude:
        return Attitude(self.main[index], self.secondary[index])

    @property
    def agents(self) -> List[Agent]:
        return [
            Agent(Attitude(m, s), Involvement.HSI if flag else Involvement.NON_HSI)
            for m, s, flag in zip(self.main, self.secondary, self.hsi)
        ]

    def snapshot(self, params: ModelParams, generator: str) -> "Snapshot":
        return Snapshot(
            sweep=self.sweep,
            params=params,
            generator=generator,
            main=np.array(self.main, dtype=np.float64),
            secondary=np.array(self.secondary, dtype=np.float64),
            hsi=np.array(self.hsi, dtype=bool),
        )


@dataclass(frozen=True)
class Snapshot:
    """Full per-agent state at one sweep"""
    sweep: int
    params: ModelParams
    generator: str
    main: np.ndarray
    secondary: np.ndarray
    hsi: np.ndarray

    @property
    def n_agents(self) -> int:
        return int(self.main.shape[0])

    @property
    def points(self) -> np.ndarray:
        return np.column_stack((self.main, self.secondary))

    @classmethod
    def from_points(cls, points, hsi=None, params: Optional[ModelParams] = None, sweep: int = 0,
                    generator: str = "") -> "Snapshot":
        points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        flags = np.zeros(len(points), dtype=bool) if hsi is None else np.asarray(hsi, dtype=bool)
        if params is None:
            params = ModelParams(n_agents=max(len(points), 2), u_m=1.0, u_s=1.0)
        return cls(sweep=sweep, params=params, generator=generator,
                   main=points[:, 0].copy(), secondary=points[:, 1].copy(), hsi=flags)


@dataclass
class RunResult:
    state: PopulationState
    trajectory: List[TrajectoryRecord]
    snapshots: List[Snapshot] = field(default_factory=list)
    converged: bool = False

    @property
    def stopped_at(self) -> int:
        return self.state.sweep
