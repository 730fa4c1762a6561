"""Engine configuration: defaults, config file loading, TAILOR_ env overrides."""
from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Mapping, Optional

ENV_PREFIX = "TAILOR_"


@dataclass(frozen=True)
class EngineConfig:
    dimension: int = 256
    embedding_provider: str = "mock"
    embedding_endpoint: Optional[str] = None
    generative_provider: str = "mock"
    generative_endpoint: Optional[str] = None
    token_mode: str = "whitespace"
    epsilon: float = 0.1
    window: int = 100
    total_tokens: int = 2000
    bo_budget: int = 25
    seed: int = 0
    synth_questions_per_query: int = 1

    def to_json(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_FLAT_LINE_RE = re.compile(r"^\s*([A-Za-z_][\w]*)\s*=\s*(.+?)\s*$")


def _coerce(raw: str) -> Any:
    text = raw.strip()
    if (text.startswith('"') and text.endswith('"')) or (
        text.startswith("'") and text.endswith("'")
    ):
        return text[1:-1]
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    if lowered in ("none", "null"):
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _parse_flat(text: str) -> dict:
    """Flat `key = value` lines (TOML-subset); '#' starts a comment."""
    out: dict[str, Any] = {}
    for line in text.splitlines():
        stripped = line.split("#", 1)[0]
        if not stripped.strip():
            continue
        m = _FLAT_LINE_RE.match(stripped)
        if not m:
            raise ValueError(f"cannot parse config line: {line!r}")
        out[m.group(1)] = _coerce(m.group(2))
    return out


def _apply(config: EngineConfig, values: Mapping[str, Any]) -> EngineConfig:
    known = {f.name: f for f in fields(EngineConfig)}
    updates = {}
    for key, value in values.items():
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
        current = getattr(config, key)
        if isinstance(current, bool):
            value = bool(value)
        elif isinstance(current, int) and value is not None:
            value = int(value)
        elif isinstance(current, float) and value is not None:
            value = float(value)
        updates[key] = value
    return replace(config, **updates)


def merge_env(config: EngineConfig, env: Mapping[str, str] | None = None) -> EngineConfig:
    """Apply TAILOR_<FIELD> environment overrides on top of a config."""
    env = os.environ if env is None else env
    overrides = {}
    for field_ in fields(EngineConfig):
        env_key = ENV_PREFIX + field_.name.upper()
        if env_key in env:
            overrides[field_.name] = _coerce(env[env_key])
    return _apply(config, overrides)


def load_config(
    path: str | Path | None = None,
    env: Mapping[str, str] | None = None,
) -> EngineConfig:
    """Defaults <- config file (JSON or flat key=value) <- TAILOR_* env vars."""
    config = EngineConfig()
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        if str(path).endswith(".json") or text.lstrip().startswith("{"):
            values = json.loads(text)
        else:
            values = _parse_flat(text)
        config = _apply(config, values)
    return merge_env(config, env)
