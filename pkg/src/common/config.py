from __future__ import annotations

import copy
import os
from pathlib import Path
from typing import Any, Iterable, Mapping

import yaml

from common.errors import ConfigurationError

ENV_PREFIX = "SALIENCY_AUDIT__"


def deep_update(base: dict, updates: Mapping) -> dict:
    result = copy.deepcopy(base)
    for key, value in updates.items():
        if isinstance(value, Mapping) and isinstance(result.get(key), dict):
            result[key] = deep_update(result[key], value)
        else:
            result[key] = copy.deepcopy(value)
    return result


def load_yaml(path: str | Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"invalid YAML in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"config {path} must be a mapping at top level")
    return data


def dotted_to_nested(key: str, value: Any) -> dict:
    parts = [p for p in key.split(".") if p]
    if not parts:
        raise ConfigurationError(f"empty config key in override {key!r}")
    nested: Any = value
    for part in reversed(parts):
        nested = {part: nested}
    return nested


def parse_assignment(raw: str) -> tuple[str, Any]:
    if "=" not in raw:
        raise ConfigurationError(f"override must look like key=value, got {raw!r}")
    key, text = raw.split("=", 1)
    try:
        value = yaml.safe_load(text) if text.strip() else ""
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse value of {key}: {exc}") from exc
    return key.strip(), value


def env_overrides(environ: Mapping[str, str] | None = None) -> dict:
    """Collect ``SALIENCY_AUDIT__SECTION__KEY=value`` variables as a nested dict."""
    environ = os.environ if environ is None else environ
    merged: dict = {}
    for name in sorted(environ):
        if not name.startswith(ENV_PREFIX):
            continue
        dotted = name[len(ENV_PREFIX):].lower().replace("__", ".")
        key, value = parse_assignment(f"{dotted}={environ[name]}")
        merged = deep_update(merged, dotted_to_nested(key, value))
    return merged


def apply_overrides(
    data: dict,
    assignments: Iterable[str] = (),
    environ: Mapping[str, str] | None = None,
) -> dict:
    result = deep_update(data, env_overrides(environ))
    for raw in assignments:
        key, value = parse_assignment(raw)
        result = deep_update(result, dotted_to_nested(key, value))
    return result

