"""Engine configuration: one JSON file covering every tunable component.

Missing keys fall back to defaults at every level; unknown keys are
rejected so typos fail loudly instead of silently running defaults.
"""

import dataclasses
import json

from .mcts import SearchConfig
from .mdp import RolloutConfig
from .pvn import PvnConfig
from .reward import RewardWeights


class ConfigError(Exception):
    """Raised for unreadable or invalid configuration input."""


def _build_section(cls, obj: dict, where: str):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object, got {type(obj).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(obj) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    if cls is PvnConfig and "input_dim" not in obj:
        obj = {"input_dim": None, **obj}
    try:
        return cls(**obj)
    except Exception as exc:
        raise ConfigError(f"{where}: {exc}") from None


@dataclasses.dataclass(frozen=True)
class EngineConfig:
    """Reward weights, kernel sharpness, and per-stage component settings."""

    reward_weights: RewardWeights = RewardWeights()
    rollout: RolloutConfig = RolloutConfig()
    search: SearchConfig = SearchConfig()
    pvn: PvnConfig = PvnConfig(input_dim=None)
    alpha: float = 4.0
    prior_temperature: float = 5.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if self.prior_temperature < 0:
            raise ConfigError(
                f"prior_temperature must be >= 0, got {self.prior_temperature}"
            )

    def to_dict(self) -> dict:
        return {
            "reward_weights": dataclasses.asdict(self.reward_weights),
            "rollout": dataclasses.asdict(self.rollout),
            "search": dataclasses.asdict(self.search),
            "pvn": self.pvn.to_dict(),
            "alpha": self.alpha,
            "prior_temperature": self.prior_temperature,
        }

    def with_seed(self, seed: int) -> "EngineConfig":
        """Override every component seed with one value."""
        return dataclasses.replace(
            self,
            rollout=dataclasses.replace(self.rollout, rng_seed=seed),
            search=dataclasses.replace(self.search, rng_seed=seed),
            pvn=dataclasses.replace(self.pvn, init_seed=seed),
        )


_SECTIONS = {
    "reward_weights": RewardWeights,
    "rollout": RolloutConfig,
    "search": SearchConfig,
    "pvn": PvnConfig,
}
_SCALARS = ("alpha", "prior_temperature")


def engine_config_from_dict(obj: dict) -> EngineConfig:
    if not isinstance(obj, dict):
        raise ConfigError(f"config must be an object, got {type(obj).__name__}")
    allowed = set(_SECTIONS) | set(_SCALARS)
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"config: unknown keys {unknown}")
    kwargs = {}
    for name, cls in _SECTIONS.items():
        if name in obj:
            kwargs[name] = _build_section(cls, obj[name], f"config.{name}")
    for name in _SCALARS:
        if name in obj:
            value = obj[name]
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"config.{name}: expected a number, got {value!r}")
            kwargs[name] = float(value)
    try:
        return EngineConfig(**kwargs)
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"config: {exc}") from None


def load_engine_config(path: str | None) -> EngineConfig:
    """Read a config file, or return full defaults when no path is given."""
    if path is None:
        return EngineConfig()
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed JSON at line {exc.lineno}") from None
    return engine_config_from_dict(obj)


def save_engine_config(config: EngineConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
