import re
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings

from app.core.errors import ConfigError
from app.schemas.indicators import ClassifierThresholds, IndicatorSettings
from app.schemas.model import ModelParams
from app.schemas.run import RunConfig


class Settings(BaseSettings):
    # Project
    PROJECT_NAME: str = "hsi-norms"
    VERSION: str = "1.0.0"
    FORMAT_VERSION: int = 1

    # Logging
    LOG_LEVEL: str = "INFO"

    # Replicate pool
    WORKER_BACKEND: str = "loky"
    DEFAULT_PARALLELISM: int = 1

    # Experiment presets
    MAP_MAX_SWEEPS: int = 100_000
    DESK_N_AGENTS: int = 1000
    DESK_REPLICATES: int = 5
    REPLICATE_STD_BAND: float = 0.15

    model_config = {
        "case_sensitive": True
    }

    @classmethod
    def settings_customise_sources(
        cls, settings_cls, init_settings, env_settings, dotenv_settings, file_secret_settings
    ):
        # every run is reproducible from flags and config files alone
        return (init_settings,)


settings = Settings()


# Legal ranges quoted in configuration errors
RANGES: Dict[str, str] = {
    "n_agents": "an integer >= 2",
    "h": "[0, 1]",
    "u_m": "(0, inf)",
    "u_s": "(0, inf)",
    "mu": "(0, 0.5]",
    "bounded": "true or false",
    "seed": "[0, 2^64)",
    "max_sweeps": "an integer >= 1",
    "snapshot_every": "an integer in [1, max_sweeps]",
    "convergence_eps": "[0, inf)",
    "convergence_window": "an integer >= 1",
    "cluster_epsilon": "(0, inf)",
    "major_share_threshold": "[0, 1)",
    "single_moderate_max": "[0, inf)",
    "moderate_margin": "[0, inf)",
    "dip_threshold": "[0, inf)",
    "rise_threshold": "[0, inf)",
    "count_basis": "joint or dimension",
    "min_major_coverage": "[0, 1]",
    "replicates": "an integer >= 1",
    "base_seed": "[0, 2^64)",
    "u_m_values": "a list of values > 0",
    "u_s_values": "a list of values > 0",
    "h_values": "a list of values in [0, 1]",
    "histogram_bins": "an integer >= 2",
}

GRID_KEYS = ("u_m_values", "u_s_values", "h_values")


def parse_grid(text: str) -> List[float]:
    """Values separated by whitespace or ';', or a start:stop:step range"""
    text = text.strip()
    if ":" in text:
        start, stop, step = (float(part) for part in text.split(":"))
        if step <= 0:
            raise ValueError("range step must be > 0")
        count = int(round((stop - start) / step))
        return [round(start + k * step, 10) for k in range(count + 1)]
    return [float(part) for part in re.split(r"[\s;]+", text) if part]


class ConfigDocument(BaseModel):
    """Flat key=value configuration of a run, a sweep or a reclassification"""
    n_agents: int = Field(10_000, ge=2)
    h: float = Field(0.1, ge=0.0, le=1.0, allow_inf_nan=False)
    u_m: float = Field(..., gt=0.0, allow_inf_nan=False)
    u_s: float = Field(..., gt=0.0, allow_inf_nan=False)
    mu: float = Field(0.5, gt=0.0, le=0.5, allow_inf_nan=False)
    bounded: bool = True
    seed: int = Field(0, ge=0, lt=2**64)
    max_sweeps: int = Field(100_000, ge=1)
    snapshot_every: Optional[int] = Field(None, ge=1, description="Defaults to min(100, max_sweeps)")
    convergence_eps: float = Field(0.0, ge=0.0, allow_inf_nan=False)
    convergence_window: int = Field(100, ge=1)
    cluster_epsilon: float = Field(0.02, gt=0.0, allow_inf_nan=False)
    major_share_threshold: float = Field(0.02, ge=0.0, lt=1.0)
    single_moderate_max: float = Field(0.15, ge=0.0)
    moderate_margin: float = Field(0.1, ge=0.0)
    dip_threshold: float = Field(0.2, ge=0.0)
    rise_threshold: float = Field(0.5, ge=0.0)
    count_basis: Literal["joint", "dimension"] = "joint"
    min_major_coverage: float = Field(0.5, ge=0.0, le=1.0, allow_inf_nan=False)
    replicates: int = Field(10, ge=1)
    base_seed: int = Field(0, ge=0, lt=2**64)
    u_m_values: Optional[List[float]] = None
    u_s_values: Optional[List[float]] = None
    h_values: Optional[List[float]] = None
    histogram_bins: int = Field(50, ge=2)

    model_config = {
        "extra": "forbid",
        "frozen": True,
    }

    @field_validator(*GRID_KEYS, mode="before")
    @classmethod
    def split_grid(cls, v):
        if isinstance(v, str):
            return parse_grid(v)
        return v

    @field_validator("u_m_values", "u_s_values")
    @classmethod
    def validate_threshold_grid(cls, v):
        if v is not None and (not v or any(not value > 0 for value in v)):
            raise ValueError("values must be > 0")
        return v

    @field_validator("h_values")
    @classmethod
    def validate_h_grid(cls, v):
        if v is not None and (not v or any(not 0 <= value <= 1 for value in v)):
            raise ValueError("values must lie in [0, 1]")
        return v

    @model_validator(mode="after")
    def check_cadence(self) -> "ConfigDocument":
        if self.snapshot_every is not None and self.snapshot_every > self.max_sweeps:
            raise ValueError("snapshot_every must not exceed max_sweeps")
        return self

    @property
    def resolved_snapshot_every(self) -> int:
        return self.snapshot_every if self.snapshot_every is not None else min(100, self.max_sweeps)

    def to_params(self) -> ModelParams:
        return ModelParams(
            n_agents=self.n_agents, h=self.h, u_m=self.u_m, u_s=self.u_s,
            mu=self.mu, bounded=self.bounded, seed=self.seed,
        )

    def to_run_config(self, capture_snapshots: bool = True) -> RunConfig:
        return RunConfig(
            params=self.to_params(),
            max_sweeps=self.max_sweeps,
            snapshot_every=self.resolved_snapshot_every,
            convergence_eps=self.convergence_eps,
            convergence_window=self.convergence_window,
            capture_snapshots=capture_snapshots,
        )

    def indicator_settings(self) -> IndicatorSettings:
        return IndicatorSettings(
            cluster_epsilon=self.cluster_epsilon, major_share_threshold=self.major_share_threshold
        )

    def thresholds(self) -> ClassifierThresholds:
        return ClassifierThresholds(
            single_moderate_max=self.single_moderate_max,
            moderate_margin=self.moderate_margin,
            dip_threshold=self.dip_threshold,
            rise_threshold=self.rise_threshold,
            count_basis=self.count_basis,
            min_major_coverage=self.min_major_coverage,
        )

    @property
    def applied_defaults(self) -> Dict[str, object]:
        """Keys the document did not set, with the default that was used"""
        return {
            key: getattr(self, key)
            for key in type(self).model_fields
            if key not in self.model_fields_set
        }


def _split_pairs(text: str) -> List[Tuple[int, str]]:
    pairs = []
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key_is_grid = line.split("=", 1)[0].strip() in GRID_KEYS
        for chunk in ([line] if key_is_grid else line.split(",")):
            if chunk.strip():
                pairs.append((line_number, chunk.strip()))
    return pairs


def config_error(error: ValidationError) -> ConfigError:
    # unknown keys first, then bad values, then missing keys
    priority = {"extra_forbidden": 0, "missing": 2}
    first = min(error.errors(), key=lambda item: priority.get(item["type"], 1))
    key = str(first["loc"][0]) if first["loc"] else None
    if first["type"] == "extra_forbidden":
        return ConfigError(f"Unknown configuration key: {key}", key=key)
    if first["type"] == "missing":
        return ConfigError(f"Missing required configuration key: {key}", key=key)
    if key is None:
        return ConfigError(f"Invalid configuration: {first['msg']}")
    legal = RANGES.get(key, "a valid value")
    return ConfigError(
        f"Invalid value for {key}: {first.get('input')!r}; {key} must lie in {legal}", key=key
    )


def build_config(values: Dict[str, object]) -> ConfigDocument:
    try:
        return ConfigDocument(**values)
    except ValidationError as e:
        raise config_error(e) from e


def read_pairs(text: str) -> Dict[str, str]:
    """Raw key=value pairs of configuration text, unvalidated"""
    values: Dict[str, str] = {}
    for line_number, pair in _split_pairs(text):
        if "=" not in pair:
            raise ConfigError(f"Line {line_number}: expected key=value, got {pair!r}")
        key, value = (part.strip() for part in pair.split("=", 1))
        if key in values:
            raise ConfigError(f"Line {line_number}: duplicate key {key}", key=key)
        values[key] = value
    return values


def parse_config(
    text: str,
    overrides: Optional[Dict[str, object]] = None,
    base: Optional[Dict[str, object]] = None,
) -> ConfigDocument:
    """
    Parse key=value configuration text. Lines may hold several pairs
    separated by commas, '#' starts a comment. Base values sit below the
    text; overrides (command-line flags) are applied on top of it.
    """
    merged = {key: value for key, value in (base or {}).items() if value is not None}
    merged.update(read_pairs(text))
    merged.update({key: value for key, value in (overrides or {}).items() if value is not None})
    return build_config(merged)
