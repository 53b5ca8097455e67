from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

from .adversary import AdversaryKind, InterceptLeg
from .protocols import AbortPolicy, ProtocolKind

SEED_LIMIT = 1 << 64


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Inputs of one Monte Carlo experiment.

    ``basis_offset`` is where the parties' basis sits in Eve's frame;
    ``basis_theta`` is the angle an intercept-resend Eve measures at.
    ``control_prob`` only matters for ping-pong.
    """

    protocol: ProtocolKind = ProtocolKind.LI_GHZ
    adversary: AdversaryKind = AdversaryKind.PASSIVE
    bits: int = 16
    sessions: int = 1000
    seed: int = 0
    control_prob: float = 0.5
    loss_prob: float = 0.0
    eve_removal_rate: float = 0.0
    basis_offset: float = 0.0
    basis_theta: float = 0.0
    intercept_leg: InterceptLeg = InterceptLeg.RETURN
    abort_policy: AbortPolicy = AbortPolicy.ABORT_ON_FIRST
    retry_cap: int = 100

    def __post_init__(self):
        try:
            for name, enum in _ENUMS.items():
                object.__setattr__(self, name, enum(getattr(self, name)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        self.validate()

    def validate(self) -> None:
        for name in ("bits", "sessions", "seed", "retry_cap"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
        for name in ("control_prob", "loss_prob", "eve_removal_rate", "basis_offset", "basis_theta"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{name} must be a number, got {value!r}")
            if value != value or value in (float("inf"), float("-inf")):
                raise ConfigError(f"{name} must be finite")
        if self.bits < 1:
            raise ConfigError("bits must be at least 1")
        if self.sessions < 1:
            raise ConfigError("sessions must be at least 1")
        if not 0 <= self.seed < SEED_LIMIT:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.retry_cap < 0:
            raise ConfigError("retry_cap must be non-negative")
        for name in ("control_prob", "loss_prob", "eve_removal_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.protocol is ProtocolKind.PING_PONG and self.control_prob >= 1.0:
            raise ConfigError("ping-pong with control_prob 1 never sends a message bit")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = value.value if f.name in _ENUMS else value
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        data = {ALIASES.get(k, k): v for k, v in data.items()}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**data)


_ENUMS = {
    "protocol": ProtocolKind,
    "adversary": AdversaryKind,
    "intercept_leg": InterceptLeg,
    "abort_policy": AbortPolicy,
}

# alternate spellings accepted in config files and sweeps
ALIASES = {
    "N": "bits",
    "n": "bits",
    "c": "control_prob",
    "loss": "loss_prob",
    "eve_removal": "eve_removal_rate",
}

_INT_FIELDS = {"bits", "sessions", "seed", "retry_cap"}


def coerce_field(name: str, raw: Any) -> Any:
    """Turn a textual value into the type config field ``name`` expects."""
    name = ALIASES.get(name, name)
    if name in _ENUMS:
        return raw
    if name not in {f.name for f in fields(ExperimentConfig)}:
        raise ConfigError(f"unknown config field {name!r}")
    if not isinstance(raw, str):
        return raw
    try:
        return int(raw) if name in _INT_FIELDS else float(raw)
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {name}") from None


def load_config_file(path: str | Path) -> dict[str, Any]:
    """Read a JSON object whose keys are config field names (or their aliases)."""
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    out = {}
    for key, value in data.items():
        key = key.replace("-", "_")
        out[ALIASES.get(key, key)] = value
    return out
