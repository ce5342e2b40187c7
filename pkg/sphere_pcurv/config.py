"""
Sphere p-curvature - Configuration

Reads numerical defaults from JSON using dot-notation paths
("quadrature.panels"). The packaged defaults can be replaced with
SPHERE_PCURV_CONFIG_FILE and partially overridden with
SPHERE_PCURV_OVERRIDE_FILE; SPHERE_PCURV_THREADS caps parallelism.
"""

import json
import os
from pathlib import Path
from typing import Any, Dict, Optional


DEFAULT_CONFIG_FILE = Path(__file__).parent / "data" / "pcurv-config.json"

# Used when a key is missing from every config file.
FALLBACK_VALUES: Dict[str, Any] = {
    "differentiation.h_fd": 1e-5,
    "differentiation.h_fd2": 2e-3,
    "arclength.n_table": 4096,
    "arclength.tol": 1e-12,
    "quadrature.order": 8,
    "quadrature.panels": 256,
    "quadrature.rel_tol": 1e-10,
    "quadrature.max_panels": 65536,
    "modulus.samples": 64,
    "marching.xtol": 1e-15,
    "experiments.acceptance_rel_error": 0.02,
    "experiments.blowup_ratio_slack": 0.1,
    "threads": 1,
}


def _load_json(config_file: str) -> Optional[Dict[str, Any]]:
    try:
        with open(config_file, "r") as f:
            data = json.load(f)
    except (OSError, ValueError):
        return None
    return data if isinstance(data, dict) else None


def _lookup(data: Any, path: str):
    for part in path.split("."):
        if isinstance(data, dict):
            data = data.get(part)
        else:
            return None
    return data


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class PcurvConfig:
    """Configuration manager for numerical defaults."""

    def __init__(self, config_file: Optional[str] = None):
        self.config_file = config_file or os.environ.get(
            "SPHERE_PCURV_CONFIG_FILE", str(DEFAULT_CONFIG_FILE)
        )
        self.override_file = os.environ.get("SPHERE_PCURV_OVERRIDE_FILE")

        data = _load_json(self.config_file) or {}
        if self.override_file and os.path.exists(self.override_file):
            override = _load_json(self.override_file)
            if override:
                data = _deep_merge(data, override)
        self._data = data

    def get(self, path: str, default: Any = None) -> Any:
        """Get a config value by dot path, falling back to built-in defaults."""
        value = _lookup(self._data, path)
        if value is None:
            value = FALLBACK_VALUES.get(path, default)
        return value

    def get_float(self, path: str) -> float:
        return float(self.get(path))

    def get_int(self, path: str) -> int:
        return int(self.get(path))

    @property
    def threads(self) -> int:
        """Thread cap: SPHERE_PCURV_THREADS wins over the config file."""
        env_threads = os.environ.get("SPHERE_PCURV_THREADS")
        if env_threads:
            try:
                return max(1, int(env_threads))
            except ValueError:
                pass
        return max(1, self.get_int("threads"))


_default_config: Optional[PcurvConfig] = None


def get_config() -> PcurvConfig:
    """Process-wide config, loaded lazily."""
    global _default_config
    if _default_config is None:
        _default_config = PcurvConfig()
    return _default_config


def reset_config() -> None:
    """Forget the cached config (tests change the environment)."""
    global _default_config
    _default_config = None
