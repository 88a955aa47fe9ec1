"""
Named run presets for the characteristic trajectories of the model.
"""
from typing import Dict, NamedTuple

from pydantic import ValidationError

from app.core.config import config_error
from app.core.errors import ConfigError
from app.schemas.model import ModelParams
from app.schemas.run import RunConfig


class Regime(NamedTuple):
    description: str
    params: ModelParams
    max_sweeps: int
    snapshot_every: int


REGIMES: Dict[str, Regime] = {
    "main-norm-flip": Regime(
        "Moderate consensus on the main issue later pulled to an extreme by minor clusters",
        ModelParams(n_agents=2500, h=0.1, u_m=0.8, u_s=0.3),
        100_000, 500,
    ),
    "secondary-long-transient": Regime(
        "One cluster on the main issue, several sub-clusters on the secondary issue for a long time",
        ModelParams(n_agents=1000, h=0.1, u_m=0.7, u_s=0.1),
        20_000, 250,
    ),
    "secondary-norm-flip": Regime(
        "Moderate norm on the secondary issue polarized by rejecting HSI agents",
        ModelParams(n_agents=2500, h=0.1, u_m=0.7, u_s=1.0),
        100_000, 500,
    ),
    "dynamic-equilibrium-high-h": Regime(
        "Many HSI agents keep moving on the secondary issue",
        ModelParams(n_agents=5000, h=0.7, u_m=0.05, u_s=1.1),
        20_000, 250,
    ),
    "dynamic-equilibrium-low-h": Regime(
        "Few HSI agents; non-HSI clusters settle on the secondary issue",
        ModelParams(n_agents=5000, h=0.05, u_m=0.05, u_s=1.1),
        20_000, 250,
    ),
    "pure-bc": Regime(
        "No HSI agent: two-dimensional bounded confidence",
        ModelParams(n_agents=1000, h=0.0, u_m=1.0, u_s=1.0),
        500, 10,
    ),
    "pure-hsi": Regime(
        "Every agent is HSI",
        ModelParams(n_agents=1000, h=1.0, u_m=0.05, u_s=1.1),
        20_000, 250,
    ),
}


class RegimeService:
    """Service resolving named presets into configuration values"""

    @staticmethod
    def get_regime(name: str) -> Regime:
        if name not in REGIMES:
            raise ConfigError(f"Unknown preset: {name}. Choose one of: {', '.join(sorted(REGIMES))}", key="preset")
        return REGIMES[name]

    @staticmethod
    def regime_values(name: str) -> Dict[str, object]:
        """
        Configuration keys of a preset

        Args:
            name: Preset name

        Returns:
            Values usable as the base of a configuration document
        """
        regime = RegimeService.get_regime(name)
        p = regime.params
        return {
            "n_agents": p.n_agents, "h": p.h, "u_m": p.u_m, "u_s": p.u_s, "mu": p.mu,
            "bounded": p.bounded, "max_sweeps": regime.max_sweeps, "snapshot_every": regime.snapshot_every,
        }

    @staticmethod
    def regime_config(name: str, **overrides) -> RunConfig:
        """
        Run configuration of a preset

        Args:
            name: Preset name
            **overrides: Any ModelParams or RunConfig field; None values are ignored

        Returns:
            The run configuration, cadence capped to the horizon
        """
        regime = RegimeService.get_regime(name)
        param_fields = set(ModelParams.model_fields)
        params = {**regime.params.model_dump(),
                  **{key: value for key, value in overrides.items() if key in param_fields and value is not None}}
        fields = {
            "max_sweeps": regime.max_sweeps,
            "snapshot_every": regime.snapshot_every,
            **{key: value for key, value in overrides.items() if key not in param_fields and value is not None},
        }
        fields["snapshot_every"] = min(fields["snapshot_every"], fields["max_sweeps"])
        try:
            return RunConfig(params=ModelParams(**params), **fields)
        except ValidationError as e:
            raise config_error(e) from e
