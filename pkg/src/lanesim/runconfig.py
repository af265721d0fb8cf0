"""Run configuration: one JSON document, overridable via LCSIM_* env vars."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

ENV_PREFIX = "LCSIM_"


class ConfigError(ValueError):
    """Bad run configuration; message names the offending field/file."""


@dataclass
class RunConfig:
    scenario: str = ""
    scenarios: list[str] = field(default_factory=list)  # batch form
    duration: float = 9.0
    tick: float | None = None  # None = scenario's own tick
    policy: str = "expert"
    policy_overrides: dict[int, str] = field(default_factory=dict)
    idm: dict = field(default_factory=dict)
    mobil: dict = field(default_factory=dict)
    planner_checkpoint: str | None = None
    replan_interval: float = 1.0
    guide: dict | None = None
    seed: int = 0
    repeat: int = 1
    out_dir: str = "runs/out"
    collision_mode: str = "continue"
    spawn_gating: bool = True
    render: bool = False
    render_every: int = 5
    target_speed: float = 12.0
    jobs: int = 1

    def scenario_paths(self, base: Path) -> list[Path]:
        names = self.scenarios if self.scenarios else [self.scenario]
        if not names or not names[0]:
            raise ConfigError("config field 'scenario' is required")
        out = []
        for name in names:
            p = Path(name)
            if not p.is_absolute():
                p = base / p
            if not p.exists():
                raise ConfigError(f"scenario file not found: {p}")
            out.append(p)
        return out

    def validate(self) -> None:
        if self.duration <= 0:
            raise ConfigError("config field 'duration' must be > 0")
        if self.repeat < 1:
            raise ConfigError("config field 'repeat' must be >= 1")
        if self.collision_mode not in ("continue", "freeze"):
            raise ConfigError("config field 'collision_mode' must be continue|freeze")
        if self.tick is not None and self.duration / self.tick % 1 > 1e-9:
            raise ConfigError("config field 'duration' must be a multiple of tick")


def _coerce(value: str):
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        return value


def apply_env_overrides(doc: dict, environ=None) -> dict:
    """LCSIM_<FIELD> (upper-cased top-level key) overrides the document."""
    environ = os.environ if environ is None else environ
    out = dict(doc)
    for key, value in environ.items():
        if key.startswith(ENV_PREFIX):
            field_name = key[len(ENV_PREFIX) :].lower()
            out[field_name] = _coerce(value)
    return out


def load_run_config(path: str | Path, environ=None) -> RunConfig:
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {p}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {p}: invalid JSON at line {e.lineno} col {e.colno}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {p}: expected a JSON object")
    doc = apply_env_overrides(doc, environ)
    cfg = RunConfig()
    known = set(cfg.__dataclass_fields__)
    for key, value in doc.items():
        if key not in known:
            raise ConfigError(f"config file {p}: unknown field '{key}'")
        if key == "policy_overrides":
            value = {int(k): v for k, v in value.items()}
        setattr(cfg, key, value)
    cfg.validate()
    return cfg
