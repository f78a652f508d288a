"""Configuration for resosc

Settings live in config/default.yaml with an optional overlay per
environment (config/dev.yaml, config/prod.yaml). A handful of machine-local
settings can also come from the process environment or a .env file.
"""

import os
import yaml
from pathlib import Path
from typing import Any, Dict, Mapping, Optional
from dotenv import load_dotenv


class ConfigurationError(Exception):
    """Raised when configuration is invalid or cannot be loaded"""
    pass


# environment variable -> dotted configuration key
ENV_OVERRIDES = {
    "RESOSC_CACHE_DIR": "cache.dir",
    "RESOSC_LOG_LEVEL": "logging.level",
}

# dotted key -> smallest allowed integer value
INTEGER_BOUNDS = {
    "series.table_cap": 0,
    "series.workers": 1,
    "borel.pade.order": 0,
    "borel.pade.companion_steps": 0,
    "borel.quadrature.start_nodes": 1,
    "spectral.dim": 1,
    "coherent.degree_cap": 1,
}


def deep_merge(base: Mapping[str, Any], overlay: Mapping[str, Any]) -> Dict[str, Any]:
    """Nested dict merge; overlay wins on scalar conflicts, dicts are merged"""
    merged = dict(base)
    for key, value in overlay.items():
        current = merged.get(key)
        if isinstance(current, dict) and isinstance(value, dict):
            merged[key] = deep_merge(current, value)
        else:
            merged[key] = value
    return merged


def _read_yaml(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigurationError(f"Cannot parse {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path} must hold a mapping at top level")
    return data


class ConfigManager:
    """Layered YAML configuration with dotted-key lookup"""

    REQUIRED_SECTIONS = ("series", "borel", "spectral", "coherent", "cache", "logging")

    def __init__(self, config_dir: str = "config", environment: Optional[str] = None):
        """Load default.yaml, then the environment overlay

        Args:
            config_dir: Directory holding default.yaml and the overlays
            environment: Overlay name (dev, prod); ENVIRONMENT or "dev" when None
        """
        self.config_dir = Path(config_dir)
        self.environment = environment or os.getenv("ENVIRONMENT", "dev")
        self._config: Dict[str, Any] = {}

        load_dotenv()
        self._load_config()

    def _load_config(self) -> None:
        default_path = self.config_dir / "default.yaml"
        if not default_path.exists():
            raise ConfigurationError(f"Default configuration file not found: {default_path}")

        config = _read_yaml(default_path)
        overlay_path = self.config_dir / f"{self.environment}.yaml"
        if overlay_path.exists():
            config = deep_merge(config, _read_yaml(overlay_path))

        self._config = config
        for variable, key in ENV_OVERRIDES.items():
            value = os.getenv(variable)
            if value:
                self._set(key, value)
        self._validate_config()

    def _set(self, key: str, value: Any) -> None:
        *parents, leaf = key.split(".")
        node = self._config
        for name in parents:
            child = node.get(name)
            if not isinstance(child, dict):
                child = node[name] = {}
            node = child
        node[leaf] = value

    def _validate_config(self) -> None:
        missing = [name for name in self.REQUIRED_SECTIONS if name not in self._config]
        if missing:
            raise ConfigurationError(f"Missing required configuration keys: {', '.join(missing)}")

        for key, lowest in INTEGER_BOUNDS.items():
            value = self.get(key)
            if value is None:
                continue
            if isinstance(value, bool) or not isinstance(value, int) or value < lowest:
                raise ConfigurationError(f"{key} must be an integer >= {lowest}, got {value!r}")

    def get(self, key: str, default: Any = None) -> Any:
        """Look up a dotted key such as 'borel.pade.order'

        Args:
            key: Dotted path into the configuration
            default: Returned when the key is absent or set to null

        Returns:
            The configured value or default
        """
        node: Any = self._config
        for name in key.split("."):
            if not isinstance(node, dict) or name not in node:
                return default
            node = node[name]
        return default if node is None else node

    def get_all(self) -> Dict[str, Any]:
        """Shallow copy of the merged configuration"""
        return self._config.copy()

    def reload(self) -> None:
        """Re-read the files and environment"""
        self._config = {}
        self._load_config()
