"""Flat ``key=value`` configuration files for the tracker.

Tracker fields use their own names (``mask_sigma``, ``bg_top_k``, ...);
memory fields are prefixed with ``fg.`` or ``bg.`` (``fg.write_threshold``).
Blank lines and ``#`` comments are ignored.
"""
from __future__ import annotations

import dataclasses

from ..errors import ConfigError
from ..memory import MemoryConfig
from ..tracker import TrackerConfig

_MEMORY_FIELDS = {f.name: f for f in dataclasses.fields(MemoryConfig)}
_TRACKER_FIELDS = {f.name: f for f in dataclasses.fields(TrackerConfig)
                   if f.name not in ("fg_memory", "bg_memory")}
_PREFIX = {"fg": "fg_memory", "bg": "bg_memory"}


def config_keys() -> list[str]:
    keys = list(_TRACKER_FIELDS)
    for p in _PREFIX:
        keys += [f"{p}.{k}" for k in _MEMORY_FIELDS]
    return keys


def _convert(default, raw: str, key: str):
    try:
        if isinstance(default, bool):
            if raw.lower() not in ("true", "false", "1", "0"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {type(default).__name__}") from None
    return raw


def parse_pairs(lines, source: str = "<config>") -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in config_keys():
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def build_config(pairs: dict[str, str], base: TrackerConfig | None = None) -> TrackerConfig:
    base = base or TrackerConfig()
    top, mem = {}, {"fg_memory": {}, "bg_memory": {}}
    for key, raw in pairs.items():
        if "." in key:
            prefix, name = key.split(".", 1)
            if prefix not in _PREFIX or name not in _MEMORY_FIELDS:
                raise ConfigError(f"unknown key {key!r}")
            attr = _PREFIX[prefix]
            mem[attr][name] = _convert(getattr(getattr(base, attr), name), raw, key)
        elif key in _TRACKER_FIELDS:
            top[key] = _convert(getattr(base, key), raw, key)
        else:
            raise ConfigError(f"unknown key {key!r}")
    for attr, changes in mem.items():
        if changes:
            top[attr] = dataclasses.replace(getattr(base, attr), **changes)
    return dataclasses.replace(base, **top)


def load_config(path=None, overrides=()) -> TrackerConfig:
    """Read ``path`` (optional) and apply ``key=value`` override strings on top."""
    pairs = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as f:
                pairs.update(parse_pairs(f, str(path)))
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
    pairs.update(parse_pairs(overrides, "--set"))
    return build_config(pairs)


def dump_config(cfg: TrackerConfig) -> str:
    lines = [f"{k}={getattr(cfg, k)}" for k in _TRACKER_FIELDS]
    for p, attr in _PREFIX.items():
        lines += [f"{p}.{k}={getattr(getattr(cfg, attr), k)}" for k in _MEMORY_FIELDS]
    return "\n".join(lines) + "\n"
