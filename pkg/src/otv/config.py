"""Server configuration: JSON file -> validated dataclass tree."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError


@dataclass
class IkSection:
    damping: float = 1e-2
    step_clamp: float = 0.2
    gain: float = 1.0
    max_iters: int = 3
    pos_tol: float = 1e-4
    rot_tol: float = 1e-3
    w_min: float = 1e-3
    k_n: float = 0.1


@dataclass
class RetargetingSection:
    alpha: float | None = None   # default by morphology: 1.1 dexterous, 1.0 gripper
    beta: float = 0.1
    max_iters: int = 5
    step_tol: float = 1e-6
    lm_damping_init: float = 1e-3


@dataclass
class AggregatorSection:
    chunk_size: int = 60
    m: float = 0.01


@dataclass
class FilterSection:
    lam: float = 0.6  # JSON key: lambda


@dataclass
class RenderSection:
    width: int = 128
    height: int = 96
    stride: int = 3


@dataclass
class LatencySection:
    delay_ms: float = 0.0
    jitter_ms: float = 0.0
    seed: int = 0


@dataclass
class ServerConfig:
    robot_model: str = "h1"
    scene: str = "can_sorting"
    host: str = "127.0.0.1"
    port: int = 8080
    rate_hz: float = 60.0
    seed: int = 0
    ik: IkSection = field(default_factory=IkSection)
    retargeting: RetargetingSection = field(default_factory=RetargetingSection)
    aggregator: AggregatorSection = field(default_factory=AggregatorSection)
    filter: FilterSection = field(default_factory=FilterSection)
    render: RenderSection = field(default_factory=RenderSection)
    latency: LatencySection = field(default_factory=LatencySection)


_SECTIONS = {
    "ik": IkSection,
    "retargeting": RetargetingSection,
    "aggregator": AggregatorSection,
    "filter": FilterSection,
    "render": RenderSection,
    "latency": LatencySection,
}

_KEY_ALIASES = {"lambda": "lam"}


def _fill(cls, doc: dict, where: str):
    out = cls()
    known = {f.name for f in fields(cls)}
    for key, value in doc.items():
        name = _KEY_ALIASES.get(key, key)
        if name not in known:
            raise ConfigError(f"unknown key '{key}' in {where}")
        current = getattr(out, name)
        if isinstance(current, bool) and not isinstance(value, bool):
            raise ConfigError(f"{where}.{key} must be a boolean")
        if isinstance(current, (int, float)) and not isinstance(value, bool) \
                and isinstance(value, (int, float)):
            setattr(out, name, type(current)(value) if not isinstance(current, float)
                    else float(value))
        elif current is None and isinstance(value, (int, float)) and not isinstance(value, bool):
            setattr(out, name, float(value))
        elif isinstance(current, str) and isinstance(value, str):
            setattr(out, name, value)
        else:
            raise ConfigError(f"{where}.{key} has the wrong type: {value!r}")
    return out


def config_from_dict(doc: dict) -> ServerConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    cfg = ServerConfig()
    top_known = {f.name for f in fields(ServerConfig)}
    for key, value in doc.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"section '{key}' must be an object")
            setattr(cfg, key, _fill(_SECTIONS[key], value, key))
        elif key in top_known:
            current = getattr(cfg, key)
            if isinstance(current, str):
                if not isinstance(value, str):
                    raise ConfigError(f"'{key}' must be a string")
                setattr(cfg, key, value)
            elif isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"'{key}' must be a number")
            else:
                setattr(cfg, key, type(current)(value))
        else:
            raise ConfigError(f"unknown top-level key '{key}'")
    return cfg


def load_config(path) -> ServerConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    return config_from_dict(doc)
