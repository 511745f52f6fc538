"""Sectioned TOML experiment configs with dotted-key overrides.

The effective configuration is a plain nested dict; it is written verbatim
into every report manifest so a run can be replayed from its output folder.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any, Iterable

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, dict[str, Any]] = {
    "experiment": {
        "datasets": ["Cora"],
        "topologies": ["space-1"],
        "repetitions": 3,
        "seed": 0,
        "workers": 1,
        "operations": [],
        "topology_file": "",
    },
    "benchmark": {
        "paths": {},
        "synthetic_seed": 0,
        "planted": "",
    },
    "search": {
        "strategies": ["gpt4gnas"],
        "iterations": 15,
        "batch_size": 10,
        "explore_iterations": 3,
        "max_queries": 0,
    },
    "evolutionary": {
        "population_size": 50,
        "parent_count": 15,
        "mutation_rate": 0.15,
        "crossover_rate": 0.8,
    },
    "rl": {
        "learning_rate": 0.00035,
        "baseline_decay": 0.9,
        "entropy_weight": 0.0,
    },
    "llm": {
        "backend": "mock-greedy",
        "script": "",
        "endpoint_url": "https://api.openai.com/v1",
        "model_name": "gpt-4",
        "api_key_env_var": "GNAS_LLM_API_KEY",
        "temperature": 0.0,
        "max_tokens": 2048,
        "timeout": 120.0,
        "retries": 3,
        "backoff": 1.0,
        "min_interval": 0.0,
        "threaded": False,
        "live": False,
    },
    "prompt": {
        "ablation": "none",
        "token_budget": 6000,
        "reattach_context": True,
    },
}

PATH_KEYS = (("experiment", "topology_file"), ("llm", "script"))


def default_config() -> dict:
    return copy.deepcopy(DEFAULTS)


def _merge(base: dict, extra: dict, where: str = "") -> None:
    for key, value in extra.items():
        dotted = f"{where}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {dotted!r}")
        if isinstance(base[key], dict) and key != "paths":
            if not isinstance(value, dict):
                raise ConfigError(f"{dotted!r} must be a section")
            _merge(base[key], value, dotted + ".")
        else:
            base[key] = value


def parse_value(text: str, current: Any) -> Any:
    """Coerce an override string to the type of the value it replaces."""
    if isinstance(current, bool):
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {text!r}")
    if isinstance(current, int):
        return int(text)
    if isinstance(current, float):
        return float(text)
    if isinstance(current, list):
        text = text.strip()
        if text.startswith("["):
            return json.loads(text)
        return [t.strip() for t in text.split(",") if t.strip()]
    if isinstance(current, dict):
        return json.loads(text)
    return text


def apply_override(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    dotted, text = assignment.split("=", 1)
    parts = dotted.strip().split(".")
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node, dict) or p not in node:
            raise ConfigError(f"unknown config key {dotted!r}")
        node = node[p]
    leaf = parts[-1]
    if not isinstance(node, dict):
        raise ConfigError(f"unknown config key {dotted!r}")
    if leaf not in node:
        if node is cfg["benchmark"]["paths"]:
            node[leaf] = text
            return
        raise ConfigError(f"unknown config key {dotted!r}")
    try:
        node[leaf] = parse_value(text, node[leaf])
    except (ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"bad value for {dotted!r}: {exc}") from None


def load_config(path: str | Path | None = None, overrides: Iterable[str] = ()) -> dict:
    """Defaults, then the file (if any), then ``key=value`` overrides."""
    cfg = default_config()
    if path is not None:
        path = Path(path)
        try:
            doc = tomllib.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        _merge(cfg, doc)
        base = path.resolve().parent
        for section, key in PATH_KEYS:
            if cfg[section][key]:
                cfg[section][key] = str((base / cfg[section][key]).resolve())
        cfg["benchmark"]["paths"] = {
            name: str((base / p).resolve()) for name, p in cfg["benchmark"]["paths"].items()
        }
    for item in overrides:
        apply_override(cfg, item)
    return cfg


def dump_toml(cfg: dict) -> str:
    """Minimal TOML writer for the config shape above."""

    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, (int, float)):
            return repr(v)
        if isinstance(v, list):
            return "[" + ", ".join(fmt(x) for x in v) + "]"
        return json.dumps(str(v))

    out = []
    for section, values in cfg.items():
        out.append(f"[{section}]")
        nested = []
        for k, v in values.items():
            if isinstance(v, dict):
                nested.append((k, v))
            else:
                out.append(f"{k} = {fmt(v)}")
        for k, v in nested:
            out.append(f"\n[{section}.{k}]")
            out.extend(f"{json.dumps(kk)} = {fmt(vv)}" for kk, vv in v.items())
        out.append("")
    return "\n".join(out)
