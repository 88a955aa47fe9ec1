from .model import Agent, Attitude, Involvement, ModelParams
from .run import PopulationState, RunConfig, RunResult, Snapshot, TrajectoryRecord
from .indicators import (
    ClassifierThresholds, Cluster, DensityHistogram, Dimension, IndicatorReport,
    IndicatorSettings, NormChange, PatternCode
)
from .experiment import (
    Boundedness, ExperimentPlan, PatternCell, PhaseMap, PhaseQuantity, ReplicateJob, ReplicateOutcome
)
from .base import CommandResponse

__all__ = [
    "Agent", "Attitude", "Involvement", "ModelParams",
    "PopulationState", "RunConfig", "RunResult", "Snapshot", "TrajectoryRecord",
    "ClassifierThresholds", "Cluster", "DensityHistogram", "Dimension", "IndicatorReport",
    "IndicatorSettings", "NormChange", "PatternCode",
    "Boundedness", "ExperimentPlan", "PatternCell", "PhaseMap", "PhaseQuantity", "ReplicateJob",
    "ReplicateOutcome",
    "CommandResponse",
]
