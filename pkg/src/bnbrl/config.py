"""Run configuration: dataclasses for every tunable plus an INI-style loader.

Config files are plain ``key = value`` text grouped into sections::

    [episode]
    n_humans = 5
    time_limit = 30.0

    [sensor]
    fov = 270
    blink_on = 3.0
    blink_off = 0.5

Section names map onto the dataclasses below (``episode``, ``sensor``,
``belief``, ``prediction``, ``reward``, ``net``, ``ppo``). Unknown sections or
keys are rejected so typos fail loudly.
"""
from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional


class ConfigError(ValueError):
    """Raised for invalid or unsatisfiable configuration."""


@dataclass
class EpisodeConfig:
    n_humans: int = 20
    arena_half_extent: float = 6.0
    dt: float = 0.25
    time_limit: float = 30.0
    human_goal_resample_prob: float = 0.01
    seed: int = 0
    robot_radius: float = 0.3
    robot_v_max: float = 1.0
    robot_start: tuple = (0.0, -4.5)
    robot_goal: tuple = (0.0, 4.5)
    robot_jitter: float = 0.5
    human_radius_range: tuple = (0.3, 0.5)
    human_speed_range: tuple = (0.5, 1.5)
    orca_time_horizon: float = 2.0
    orca_neighbor_dist: float = 10.0
    orca_safety_margin: float = 0.05
    orca_pref_perturbation: float = 0.05
    human_regoal_on_arrival: bool = True
    placement_margin: float = 0.1
    robot_clearance: float = 0.5
    max_placement_attempts: int = 1000

    def validate(self) -> None:
        if self.n_humans < 0:
            raise ConfigError("n_humans must be >= 0")
        if not self.dt > 0:
            raise ConfigError("dt must be > 0")
        if not self.time_limit > 0:
            raise ConfigError("time_limit must be > 0")
        if not 0.0 <= self.human_goal_resample_prob <= 1.0:
            raise ConfigError("human_goal_resample_prob must be in [0, 1]")
        if not self.arena_half_extent > 0:
            raise ConfigError("arena_half_extent must be > 0")


@dataclass
class BlinkSchedule:
    """Sensor on for ``on_duration`` steps, then off for ``off_duration`` steps."""

    on_duration: float = 3.0
    off_duration: float = 0.5

    @property
    def period(self) -> float:
        return self.on_duration + self.off_duration

    def validate(self) -> None:
        if self.on_duration < 0 or self.off_duration < 0:
            raise ConfigError("blink durations must be >= 0")
        if not self.period > 0:
            raise ConfigError("blink period must be > 0")


@dataclass
class SensorConfig:
    max_range: float = 5.0
    fov: float = 270.0
    blink: Optional[BlinkSchedule] = None

    def validate(self) -> None:
        if not 0.0 <= self.fov <= 360.0:
            raise ConfigError("fov must be within [0, 360] degrees")
        if not self.max_range > 0:
            raise ConfigError("max_range must be > 0")
        if self.blink is not None:
            self.blink.validate()


@dataclass
class PredictionConfig:
    history_len: int = 5
    horizon: int = 5


@dataclass
class BeliefConfig:
    range_factor: float = 1.5
    max_age: int = 20


@dataclass
class RewardConfig:
    r_goal: float = 10.0
    r_col: float = -10.0
    w_disc: float = 0.25
    sigma_disc: float = 0.2
    danger_radius: float = 0.5
    gamma_bel: float = 0.9
    pot_coeff: float = 1.5

    def validate(self) -> None:
        if not 0.0 <= self.gamma_bel <= 1.0:
            raise ConfigError("gamma_bel must be in [0, 1]")
        if not self.sigma_disc > 0:
            raise ConfigError("sigma_disc must be > 0")


VARIANTS = ("bnbrl+", "bnbrl", "bndnn", "rnn-baseline")


@dataclass
class NetConfig:
    variant: str = "bnbrl+"
    d_model: int = 64
    n_heads: int = 4
    gru_hidden: int = 128
    bnn_hidden: int = 64
    head_hidden: int = 64
    n_samples_train: int = 2
    n_samples_eval: int = 8
    prior_sigma: float = 0.1
    init_rho: float = -5.0
    init_log_std: float = -0.5

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.d_model % self.n_heads:
            raise ConfigError("d_model must be divisible by n_heads")


@dataclass
class PpoConfig:
    clip: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    lr: float = 3e-4
    epochs: int = 4
    minibatch_size: int = 512
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    kl_coef: Optional[float] = None  # None -> 1 / steps-per-update
    max_grad_norm: float = 0.5
    n_envs: int = 16
    rollout_len: int = 128

    def validate(self) -> None:
        if not 0.0 < self.clip < 1.0:
            raise ConfigError("clip must be in (0, 1)")
        for name in ("gamma", "gae_lambda"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")

    @property
    def steps_per_update(self) -> int:
        return self.n_envs * self.rollout_len

    @property
    def effective_kl_coef(self) -> float:
        return 1.0 / self.steps_per_update if self.kl_coef is None else self.kl_coef


@dataclass
class RunConfig:
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    sensor: SensorConfig = field(default_factory=SensorConfig)
    prediction: PredictionConfig = field(default_factory=PredictionConfig)
    belief: BeliefConfig = field(default_factory=BeliefConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    net: NetConfig = field(default_factory=NetConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)

    def validate(self) -> "RunConfig":
        self.episode.validate()
        self.sensor.validate()
        self.reward.validate()
        self.net.validate()
        self.ppo.validate()
        return self

    def to_dict(self) -> dict:
        """Plain JSON-safe dict; infinities become the string ``"inf"``."""
        def clean(v):
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            if isinstance(v, float) and math.isinf(v):
                return "inf" if v > 0 else "-inf"
            return v
        return clean(dataclasses.asdict(self))

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        cfg = cls()
        for section, values in data.items():
            _apply_section(cfg, section, values)
        return cfg.validate()


def _coerce(value: Any, default: Any, name: str) -> Any:
    if isinstance(value, str):
        text = value.strip()
        if isinstance(default, bool):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ConfigError(f"{name}: expected a boolean, got {value!r}")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float) or default is None:
            if text.lower() in ("none", ""):
                return None
            return float(text) if text.lower() not in ("inf", "infinity") else math.inf
        if isinstance(default, tuple):
            return tuple(float(p) for p in text.replace("(", "").replace(")", "").split(","))
        return text
    if isinstance(default, tuple) and isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    return value


def _apply_section(cfg: RunConfig, section: str, values: dict) -> None:
    if section not in {f.name for f in dataclasses.fields(cfg)}:
        raise ConfigError(f"unknown config section [{section}]")
    target = getattr(cfg, section)
    values = dict(values)
    if section == "sensor":
        on = values.pop("blink_on", None)
        off = values.pop("blink_off", None)
        blink = values.pop("blink", None)
        if isinstance(blink, dict):
            target.blink = BlinkSchedule(**blink)
        elif on is not None or off is not None:
            target.blink = BlinkSchedule(
                on_duration=float(on) if on is not None else 3.0,
                off_duration=float(off) if off is not None else 0.5,
            )
    names = {f.name: f for f in dataclasses.fields(target)}
    for key, value in values.items():
        if key not in names:
            raise ConfigError(f"unknown key {key!r} in section [{section}]")
        setattr(target, key, _coerce(value, getattr(target, key), f"{section}.{key}"))


def load_config(path: str | Path) -> RunConfig:
    """Read an INI-style config file; missing keys keep their defaults."""
    parser = configparser.ConfigParser()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser.read(path)
    cfg = RunConfig()
    for section in parser.sections():
        _apply_section(cfg, section, dict(parser.items(section)))
    return cfg.validate()
