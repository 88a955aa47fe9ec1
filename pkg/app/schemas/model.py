import math
from enum import Enum
from typing import NamedTuple

from pydantic import BaseModel, Field


class Involvement(str, Enum):
    """Whether an agent treats the main issue as self-defining"""
    HSI = "hsi"
    NON_HSI = "non_hsi"


class Attitude(NamedTuple):
    """Position of one agent on the main and the secondary issue"""
    main: float
    secondary: float


class Agent(NamedTuple):
    attitude: Attitude
    involvement: Involvement

    @property
    def is_hsi(self) -> bool:
        return self.involvement is Involvement.HSI


class ModelParams(BaseModel):
    """Full parameter set of one simulated population"""
    n_agents: int = Field(10000, ge=2, description="Population size N")
    h: float = Field(0.1, ge=0.0, le=1.0, allow_inf_nan=False, description="Proportion of HSI agents")
    u_m: float = Field(..., gt=0.0, allow_inf_nan=False, description="Main-dimension threshold")
    u_s: float = Field(..., gt=0.0, allow_inf_nan=False, description="Secondary-dimension threshold")
    mu: float = Field(0.5, gt=0.0, le=0.5, allow_inf_nan=False, description="Influence intensity")
    bounded: bool = Field(True, description="Confine both attitudes to [-1, +1]")
    seed: int = Field(0, ge=0, lt=2**64, description="Replicate generator seed")

    model_config = {"frozen": True}

    @property
    def n_hsi(self) -> int:
        """Exact HSI head count, round(h * N) with halves rounded up"""
        return int(math.floor(self.h * self.n_agents + 0.5))
