from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import pandas as pd
from pydantic import BaseModel, Field, field_validator

from app.schemas.indicators import ClassifierThresholds, IndicatorReport, IndicatorSettings, PatternCode
from app.schemas.run import RunConfig


class Boundedness(str, Enum):
    BOUNDED = "bounded"
    UNBOUNDED = "unbounded"

    @property
    def flag(self) -> bool:
        return self is Boundedness.BOUNDED


class PhaseQuantity(str, Enum):
    MEAN_AVG_ABS_MAIN = "mean_avg_abs_main"
    MEAN_AVG_ABS_SECONDARY = "mean_avg_abs_secondary"
    MAJORITY_PATTERN_MAIN = "majority_pattern_main"
    MAJORITY_PATTERN_SECONDARY = "majority_pattern_secondary"
    N_MAJOR_CLUSTERS = "n_major_clusters"


class ExperimentPlan(BaseModel):
    u_m_values: List[float] = Field(..., min_length=1)
    u_s_values: List[float] = Field(..., min_length=1)
    h_values: List[float] = Field(..., min_length=1)
    replicates: int = Field(10, ge=1)
    base_seed: int = Field(0, ge=0, lt=2**64)
    run_config_template: RunConfig
    boundedness_cases: List[Boundedness] = Field(
        default_factory=lambda: [Boundedness.BOUNDED, Boundedness.UNBOUNDED], min_length=1
    )
    indicator_settings: IndicatorSettings = Field(default_factory=IndicatorSettings)
    thresholds: ClassifierThresholds = Field(default_factory=ClassifierThresholds)

    @field_validator("u_m_values", "u_s_values")
    @classmethod
    def validate_thresholds(cls, v):
        if any(not value > 0 for value in v):
            raise ValueError("Threshold values must be greater than 0")
        return v

    @field_validator("h_values")
    @classmethod
    def validate_h(cls, v):
        if any(not 0 <= value <= 1 for value in v):
            raise ValueError("h values must lie in [0, 1]")
        return v

    @property
    def n_cells(self) -> int:
        return len(self.u_m_values) * len(self.u_s_values) * len(self.h_values) * len(self.boundedness_cases)

    @property
    def n_runs(self) -> int:
        return self.n_cells * self.replicates


class ReplicateJob(BaseModel):
    """One (cell, replicate, boundedness) simulation, self-contained for a worker process"""
    u_m_index: int
    u_s_index: int
    h_index: int
    replicate: int
    boundedness: Boundedness
    run_config: RunConfig
    indicator_settings: IndicatorSettings
    thresholds: ClassifierThresholds

    model_config = {"frozen": True}

    @property
    def seed(self) -> int:
        return self.run_config.params.seed

    @property
    def cell_key(self) -> Tuple[int, int, int, Boundedness]:
        return (self.u_m_index, self.u_s_index, self.h_index, self.boundedness)

    def describe(self) -> str:
        p = self.run_config.params
        return f"u_m={p.u_m:g} u_s={p.u_s:g} h={p.h:g} {self.boundedness.value} replicate={self.replicate}"


@dataclass(frozen=True)
class ReplicateOutcome:
    job: ReplicateJob
    report: Optional[IndicatorReport] = None
    codes: Optional[Tuple[PatternCode, PatternCode]] = None
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class PatternCell:
    u_m: float
    u_s: float
    h: float
    bounded: bool
    per_replicate: List[Tuple[IndicatorReport, Tuple[PatternCode, PatternCode]]]
    mean_avg_abs: Tuple[float, float]
    std_avg_abs: Tuple[float, float]
    mean_n_major: float
    majority_pattern: Optional[Tuple[PatternCode, PatternCode]]
    seeds: List[int] = field(default_factory=list)
    failures: List[str] = field(default_factory=list)

    @property
    def voided(self) -> bool:
        return bool(self.failures)

    @property
    def coordinates(self) -> str:
        boundedness = "bounded" if self.bounded else "unbounded"
        return f"u_m={self.u_m:g} u_s={self.u_s:g} h={self.h:g} {boundedness}"


@dataclass(frozen=True)
class PhaseMap:
    quantity: PhaseQuantity
    h: float
    bounded: bool
    long: pd.DataFrame
    matrix: pd.DataFrame

    @property
    def n_missing(self) -> int:
        return int(self.long["missing"].sum())
