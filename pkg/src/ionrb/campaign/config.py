"""Campaign configuration and its JSON document form.

Field names double as JSON keys; every physical quantity is in SI units
with the unit in the name (``_s``, ``_hz``, ``_per_s``).  Unknown keys are
rejected so that a typo cannot silently fall back to a default.
"""
from __future__ import annotations

import dataclasses
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path

from ..detector import PhotonModel
from ..gateset import PAPER_LENGTHS
from ..noise import AmplitudeModel, DephasingModel, DriftModel, NoiseConfig
from ..scheduler import TimingConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RecalibrationConfig:
    enabled: bool = True
    frequency_interval_s: float = 60.0
    pi2_interval_s: float = 120.0


@dataclass(frozen=True)
class CampaignConfig:
    lengths: tuple[int, ...] = PAPER_LENGTHS
    sequences_per_length: int = 100
    reps_per_sequence: int = 100
    master_seed: int = 0
    timing: TimingConfig = field(default_factory=TimingConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    photon: PhotonModel = field(default_factory=PhotonModel)
    recalibration: RecalibrationConfig = field(default_factory=RecalibrationConfig)
    shot_overhead_s: float = 5e-3
    max_length: int = 1300
    threshold_scope: str = "campaign"  # "campaign" (summed references) or "sequence"
    output_dir: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(int(l) for l in self.lengths))
        if not self.lengths:
            raise ConfigError("lengths must not be empty")
        if any(b <= a for a, b in zip(self.lengths, self.lengths[1:])):
            raise ConfigError(f"lengths must be strictly increasing: {list(self.lengths)}")
        if self.lengths[0] < 1:
            raise ConfigError("lengths must be >= 1")
        if self.lengths[-1] > self.max_length:
            raise ConfigError(f"length {self.lengths[-1]} exceeds max_length {self.max_length}")
        if self.sequences_per_length < 1 or self.reps_per_sequence < 1:
            raise ConfigError("sequences_per_length and reps_per_sequence must be positive")
        if self.shot_overhead_s < 0:
            raise ConfigError("shot_overhead_s must be >= 0")
        if self.threshold_scope not in ("campaign", "sequence"):
            raise ConfigError(f"threshold_scope must be 'campaign' or 'sequence', got {self.threshold_scope!r}")
        rc = self.recalibration
        if rc.enabled and (rc.frequency_interval_s <= 0 or rc.pi2_interval_s <= 0):
            raise ConfigError("recalibration intervals must be positive")

    def replace(self, **changes) -> CampaignConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["lengths"] = list(self.lengths)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> CampaignConfig:
        return _build(cls, data, "config")

    @classmethod
    def load(cls, path) -> CampaignConfig:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data)


_NESTED = (TimingConfig, NoiseConfig, PhotonModel, RecalibrationConfig, DriftModel, AmplitudeModel, DephasingModel)


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    kwargs = {}
    for name, value in data.items():
        kwargs[name] = _coerce(hints[name], value, f"{where}.{name}")
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _coerce(hint, value, where):
    args = typing.get_args(hint)
    if type(None) in args:
        if value is None:
            return None
        (hint,) = [a for a in args if a is not type(None)]
    if hint in _NESTED:
        return _build(hint, value, where)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
        return value
    if typing.get_origin(hint) is tuple:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list")
        return tuple(_coerce(args[0], v, f"{where}[]") for v in value)
    return value
