from dataclasses import dataclass, replace
from enum import Enum, IntEnum
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field

from app.schemas.model import Attitude


class Dimension(str, Enum):
    MAIN = "main"
    SECONDARY = "secondary"


class PatternCode(IntEnum):
    """Taxonomy of final states, one code per dimension"""
    SINGLE_MODERATE = 0
    SINGLE_EXTREME = 1
    BIPOLARIZATION = 2
    SEVERAL_POLARIZED = 3
    SEVERAL_MODERATE = 4
    UNCLASSIFIED = 5


class NormChange(str, Enum):
    NO_CHANGE = "no_change"
    MODERATED = "moderated"
    POLARIZED_AFTER_MODERATION = "polarized_after_moderation"
    POLARIZED_DIRECTLY = "polarized_directly"


class IndicatorSettings(BaseModel):
    cluster_epsilon: float = Field(0.02, gt=0.0, allow_inf_nan=False, description="Single-linkage radius")
    major_share_threshold: float = Field(0.02, ge=0.0, lt=1.0, description="Share above which a cluster is major")

    model_config = {"frozen": True}


class ClassifierThresholds(BaseModel):
    """Calibration constants of the pattern and norm-change classifiers"""
    single_moderate_max: float = Field(0.15, ge=0.0)
    moderate_margin: float = Field(0.1, ge=0.0)
    dip_threshold: float = Field(0.2, ge=0.0)
    rise_threshold: float = Field(0.5, ge=0.0)
    odd_baseline: float = Field(0.4, ge=0.0)
    even_baseline: float = Field(0.5, ge=0.0)
    count_basis: Literal["joint", "dimension"] = "joint"
    min_major_coverage: float = Field(
        0.5, ge=0.0, le=1.0,
        description="Population share the major clusters must hold together; below it a state is unclassified",
    )

    model_config = {"frozen": True}


@dataclass(frozen=True, eq=False)
class Cluster:
    centroid: Attitude
    share: float
    size: int
    # int32 agent indices; None once the report is compacted
    member_indices: Optional[np.ndarray] = None


@dataclass(frozen=True)
class IndicatorReport:
    clusters: List[Cluster]
    n_clusters: int
    max_cluster_share: float
    n_major_clusters: int
    major_coverage: float
    avg_abs_main: float
    avg_abs_secondary: float
    n_major_main: int
    n_major_secondary: int

    def avg_abs(self, dimension: Dimension) -> float:
        return self.avg_abs_main if dimension is Dimension.MAIN else self.avg_abs_secondary

    def n_major_on(self, dimension: Dimension) -> int:
        return self.n_major_main if dimension is Dimension.MAIN else self.n_major_secondary

    def compact(self, min_share: float) -> "IndicatorReport":
        """Copy keeping only clusters above min_share, without their member indices"""
        kept = [replace(cluster, member_indices=None) for cluster in self.clusters if cluster.share > min_share]
        return replace(self, clusters=kept)

    def summary(self) -> dict:
        return {
            "n_clusters": self.n_clusters,
            "n_major_clusters": self.n_major_clusters,
            "n_major_main": self.n_major_main,
            "n_major_secondary": self.n_major_secondary,
            "max_cluster_share": self.max_cluster_share,
            "major_coverage": self.major_coverage,
            "avg_abs_main": self.avg_abs_main,
            "avg_abs_secondary": self.avg_abs_secondary,
        }


@dataclass(frozen=True)
class DensityHistogram:
    edges_main: np.ndarray
    edges_secondary: np.ndarray
    counts_main: np.ndarray
    counts_secondary: np.ndarray
    grid: np.ndarray
