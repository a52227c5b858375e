"""
Experiment configuration.
Flat key = value files (read with python-dotenv), typed by each command's default table.
Precedence: defaults < config file < --set overrides.
"""

import hashlib
import json
import math
import os
from typing import Any, Dict, Iterable, List, Optional, Tuple

from dotenv import dotenv_values

from .errors import ConfigError


SEED_ENV = "LANGEVIN_SEED"

# Keys shared by every command
COMMON_DEFAULTS: Dict[str, Any] = {
    "seed": 0,
    "chains": 64,
    "chain_block": 16,
}

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "activation": {
        "process": "gibbs",
        "epsilons": [0.1],
        "b_min": -4.0,
        "b_max": 4.0,
        "b_step": 0.5,
        "samples": 100000,
        "burn_in": 100.0,
        "alpha": "max",
        "use_lambda": True,
        "tau_ref": 0.0,
        "tau_prime": None,
        "dt": 0.02,
        "exact_ou": False,
    },
    "clock": {
        "L": 8,
        "q": 4,
        "coupling": 1.0,
        "betas": [0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 1.0, 1.05, 1.1],
        "methods": ["metropolis", "dlm"],
        "epsilons": [0.2, 0.1, 0.05],
        "alpha": "max",
        "use_lambda": True,
        "sweeps": 4000,
        "burn_in": 500,
        "blocks": 20,
        "chains": 16,
    },
    "ising": {
        "L": 4,
        "coupling": 1.0,
        "field": 0.0,
        "betas": [0.2, 0.3, 0.4, 0.44, 0.5, 0.6, 0.7],
        "methods": ["metropolis", "dlm", "gibbs", "lm2"],
        "epsilons": [0.2, 0.1, 0.05],
        "alpha": "max",
        "use_lambda": True,
        "tau_ref": 0.0,
        "tau_prime": None,
        "sweeps": 4000,
        "burn_in": 500,
        "blocks": 20,
        "chains": 16,
        "dt": 0.02,
    },
    "bm-kl": {
        "n": 3,
        "weight_scale": 1.0,
        "network": "",
        "processes": ["gibbs", "lm2", "lm1f"],
        "epsilons": [0.2, 0.1, 0.05, 0.01],
        "alpha": "max",
        "use_lambda": True,
        "sweeps": 100000,
        "checkpoints": 20,
        "dt": 0.02,
    },
    "calibrate": {
        "targets": ["r", "tau"],
        "processes": ["gibbs", "lm2", "ou2"],
        "epsilons": [0.5, 0.2, 0.1],
        "tau_refs": [2.0, 4.0, 8.0],
        "samples": 200000,
        "burn_in": 200.0,
        "alpha": "max",
        "dt": 0.02,
    },
    "trajectory": {
        "process": "ou2",
        "epsilon": 0.2,
        "biases": [0.0],
        "duration": 100.0,
        "decimation": 1,
        "tau_ref": 0.0,
        "dt": 0.02,
        "exact_ou": False,
        "chains": 1,
    },
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def command_defaults(command: str) -> Dict[str, Any]:
    if command not in DEFAULTS:
        raise ConfigError(f"Unknown command: {command}. Supported: {', '.join(DEFAULTS)}")
    merged = dict(COMMON_DEFAULTS)
    merged.update(DEFAULTS[command])
    return merged


def _scalar(key: str, text: str, like: Any) -> Any:
    text = text.strip()
    if isinstance(like, bool):
        lowered = text.lower()
        if lowered in _TRUE:
            return True
        if lowered in _FALSE:
            return False
        raise ConfigError(f"{key}: expected a boolean, got {text!r}")
    if isinstance(like, int):
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
    if isinstance(like, float) or like is None:
        if like is None and text.lower() in ("", "none"):
            return None
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {text!r}") from None
    return text


def coerce(key: str, raw: Any, default: Any) -> Any:
    """
    Converts a raw config value to the type of its default.

    Lists accept "a, b, c" or a JSON array; alpha accepts a number, inf/-inf or max.
    """
    if not isinstance(raw, str):
        return raw
    if key == "alpha":
        if raw.strip().lower() == "max":
            return "max"
        return _scalar(key, raw, 0.0)
    if isinstance(default, list):
        text = raw.strip()
        try:
            items = json.loads(text)
            if not isinstance(items, list):
                items = [items]
            items = [str(item) for item in items]
        except json.JSONDecodeError:
            items = [item for item in text.strip("[]").split(",") if item.strip()]
        like = default[0] if default else ""
        return [_scalar(key, item, like) for item in items]
    return _scalar(key, raw, default)


def parse_override(text: str) -> Tuple[str, str]:
    """Splits one --set key=value argument."""
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override must look like key=value, got {text!r}")
    return key.strip(), value.strip()


def load_config(command: str, path: Optional[str] = None, overrides: Iterable[str] = ()) -> Dict[str, Any]:
    """
    Resolves the configuration of one command.

    Args:
        command: CLI subcommand name
        path: Optional key = value file
        overrides: key=value strings from --set

    Returns:
        Typed configuration dictionary
    """
    config = command_defaults(command)
    layers: List[Dict[str, Optional[str]]] = []
    if path:
        if not os.path.isfile(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            layers.append(dict(dotenv_values(path)))
        except (OSError, UnicodeDecodeError) as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from e
    layers.append(dict(parse_override(item) for item in overrides))

    for layer in layers:
        for key, raw in layer.items():
            if key not in config:
                raise ConfigError(f"unknown key {key!r} for {command}; known: {', '.join(sorted(config))}")
            if raw is None:
                raise ConfigError(f"{key}: missing value")
            config[key] = coerce(key, raw, DEFAULTS[command].get(key, COMMON_DEFAULTS.get(key)))
    return config


def resolve_seed(flag: Optional[int], config: Dict[str, Any]) -> int:
    """--seed flag > LANGEVIN_SEED environment variable > config seed > 0."""
    if flag is not None:
        seed = flag
    elif os.getenv(SEED_ENV):
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {os.environ[SEED_ENV]!r}") from None
    else:
        seed = int(config.get("seed", 0) or 0)
    if seed < 0:
        raise ConfigError(f"seed must be non-negative, got {seed}")
    return seed


def _jsonable(value: Any) -> Any:
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if isinstance(value, list):
        return [_jsonable(item) for item in value]
    return value


def canonical_json(config: Dict[str, Any]) -> str:
    return json.dumps({key: _jsonable(value) for key, value in config.items()}, sort_keys=True, separators=(",", ":"))


def config_digest(config: Dict[str, Any]) -> str:
    """SHA256 of the canonical JSON with a 'sha256:' prefix."""
    return f"sha256:{hashlib.sha256(canonical_json(config).encode('utf-8')).hexdigest()}"
