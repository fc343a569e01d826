"""Run configuration: JSON file plus command-line overrides."""

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .codec import DEFAULT_SIGMA, DEFAULT_TOPK, dynamic_thresholds
from .grouping import MODES, GroupingConfig


class ConfigError(ValueError):
    pass


@dataclass
class DynamicThresholds:
    train_counts: list[int]
    t_low: float = 0.01
    t_high: float = 0.05
    cutoff: int = 10


@dataclass
class RunConfig:
    stride: float = 4.0
    sigma: float = DEFAULT_SIGMA
    topk: int = DEFAULT_TOPK
    h_tau: float = 0.4
    o_tau: float = 0.1
    a_tau: float = 0.0
    d_tau: float = 2.0
    angle_min: float = 5 * math.pi / 6
    ratio_max: float = 1.5
    mode: str = "full"
    setting: str = "default"
    lambda_v: float = 0.1
    num_classes: Optional[int] = None
    no_object_classes: list[int] = field(default_factory=list)
    person_category: int = 0
    num_categories: Optional[int] = None
    dynamic: Optional[DynamicThresholds] = None
    seed: int = 0
    threads: int = 1

    def validate(self) -> "RunConfig":
        if not self.stride >= 1:
            raise ConfigError("stride must be >= 1")
        if not self.sigma > 0:
            raise ConfigError("sigma must be > 0")
        if self.topk < 0:
            raise ConfigError("topk must be >= 0")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.setting not in ("default", "known_object"):
            raise ConfigError("setting must be default or known_object")
        if self.lambda_v < 0:
            raise ConfigError("lambda_v must be >= 0")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.num_classes is not None and self.num_classes < 1:
            raise ConfigError("num_classes must be >= 1")
        try:
            self.grouping()
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if self.dynamic is not None:
            d = self.dynamic
            if any(c < 0 for c in d.train_counts) or not 0 <= d.t_low <= d.t_high <= 1:
                raise ConfigError("dynamic thresholds need counts >= 0 and 0 <= t_low <= t_high <= 1")
        return self

    def grouping(self) -> GroupingConfig:
        return GroupingConfig(
            h_tau=self.h_tau,
            o_tau=self.o_tau,
            a_tau=self.a_tau,
            d_tau=self.d_tau,
            angle_min=self.angle_min,
            ratio_max=self.ratio_max,
            mode=self.mode,
            no_object_classes=frozenset(self.no_object_classes),
        )

    def score_floors(self):
        """Per-class decode floors: dynamic when configured, else zero."""
        if self.dynamic is None:
            return 0.0
        d = self.dynamic
        return dynamic_thresholds(d.train_counts, d.t_low, d.t_high, d.cutoff)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if data.get("dynamic") is not None:
            try:
                data["dynamic"] = DynamicThresholds(**data["dynamic"])
            except TypeError as e:
                raise ConfigError(f"bad dynamic thresholds: {e}") from None
        return cls(**data)


def load_config(path=None, overrides: Optional[dict] = None) -> RunConfig:
    """Config file values, then overrides (None values are ignored)."""
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: {e}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
    for k, v in (overrides or {}).items():
        if v is not None:
            data[k] = v
    return RunConfig.from_dict(data).validate()
