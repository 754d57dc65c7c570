"""
Configuration settings for skewdrift experiments.

Tolerances live in the module sections (``solver``, ``potentials``,
``analysis``, ``truncation``, ``zhikov``, ``run``); every CLI subcommand has
its own section with the experiment description. Experiment files are plain
``key = value`` text with ``[section]`` headers.
"""

import configparser
import copy
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from skewdrift.utils.errors import ConfigError

logger = logging.getLogger("config")

SCHEMA_VERSION = "skewdrift-report/1"

DEFAULT_SCHEDULE = ",".join(str(2 ** k) for k in range(11))

SUBCOMMANDS = ("solve", "norms", "potential", "truncate", "caccioppoli", "zhikov")


class Config:
    """Configuration settings for skewdrift."""

    # Default configuration values
    DEFAULT_CONFIG = {
        # Krylov solves and the approximation-solution driver
        "solver": {
            "rtol": 1e-10,
            "max_iterations": 2000,
            "restart": 60,
            "ilu_drop_tol": 1e-5,
            "ilu_fill_factor": 20.0,
            "increment_rtol": 1e-8,
            "schedule": DEFAULT_SCHEDULE,
            "check_apriori": True,
        },
        # Potential constructions and the solenoidality gate
        "potentials": {
            "solenoidal_rtol": 1e-6,
            "boundary_flux_rtol": 1e-6,
            "line_nodes": 32,
            "graded_levels": 3,
            "random_tests": 10,
            "test_count": 64,
        },
        # Norm diagnostics
        "analysis": {
            "divergence_factor": 1.5,
            "bmo_max_depth": 6,
            "p_max": 64.0,
            "max_centers": 512,
            "top_centers": 16,
            "graded_levels": 3,
        },
        # Lipschitz truncation
        "truncation": {
            "lipschitz_c": 1.0,
            "check_boundary_distance": False,
            "slack": 0.1,
        },
        # Zhikov example and the `zhikov` subcommand
        "zhikov": {
            "resolution": 24,
            "rho": 0.05,
            "sphere_order": 10,
            "schedule": "1,4,16,64",
            "inner_radius": 0.3,
            "inner_refine": 2,
            "core_shells": 4,
            "defect_tol": 0.05,
            "approximation_tol": 1e-6,
        },
        # Run-wide settings
        "run": {
            "threads": 1,
            "seed": 0,
            "out": "results",
        },
        # Subcommand sections
        "solve": {
            "domain": "",
            "resolution": 0,
            "drift": "none",
            "f_density": "4",
            "f_flux": "none",
            "schedule": "",
            "reference": "none",
        },
        "norms": {
            "domain": "",
            "resolution": 0,
            "field": "",
            "refine": True,
            "bmo_max_depth": 0,
        },
        "potential": {
            "domain": "",
            "resolution": 0,
            "field": "",
            "construction": "",
        },
        "truncate": {
            "domain": "",
            "resolution": 0,
            "field": "",
            "lambdas": "1,2,4,8",
        },
        "caccioppoli": {
            "domain": "",
            "resolution": 0,
            "drift": "none",
            "f_density": "0",
            "field": "none",
            "lambdas": "1,2,4,8,16",
        },
    }

    # Keys an experiment file has to provide for its subcommand
    REQUIRED_KEYS = {
        "solve": ["domain", "resolution"],
        "norms": ["domain", "resolution", "field"],
        "potential": ["domain", "resolution", "field", "construction"],
        "truncate": ["domain", "resolution", "field"],
        "caccioppoli": ["domain", "resolution"],
        "zhikov": [],
    }

    # Inclusive lower bounds and upper bounds on numeric keys, by key name
    LIMITS = {
        "resolution": (2, None),
        "rtol": (0.0, 1.0),
        "increment_rtol": (0.0, 1.0),
        "max_iterations": (1, None),
        "restart": (1, None),
        "threads": (1, None),
        "seed": (0, 2 ** 64 - 1),
        "rho": (0.0, 0.1),
        "sphere_order": (6, None),
        "core_shells": (1, None),
        "line_nodes": (32, None),
        "lipschitz_c": (0.0, None),
        "p_max": (16.0, None),
    }

    def __init__(self):
        """Initialize configuration with default values."""
        self._config = copy.deepcopy(self.DEFAULT_CONFIG)
        self._config_file: Optional[Path] = None
        self._provided: Dict[str, List[str]] = {}

    def load_config(self, path: Union[str, Path], subcommand: Optional[str] = None) -> None:
        """
        Load an experiment file, rejecting anything unknown.

        Args:
            path: Path of the ``key = value`` file
            subcommand: If given, its required keys must all be present

        Raises:
            ConfigError: On unreadable files, unknown sections or keys,
                uncoercible values, out-of-range values or missing keys.
        """
        path = Path(path)
        parser = configparser.ConfigParser(
            delimiters=("=",), comment_prefixes=("#", ";"), interpolation=None
        )
        parser.optionxform = str
        try:
            with open(path, "r") as f:
                parser.read_file(f)
        except (OSError, configparser.Error) as e:
            raise ConfigError(f"Error loading configuration {path}: {e}")

        unknown = []
        for section in parser.sections():
            if section not in self.DEFAULT_CONFIG:
                unknown.append(f"[{section}]")
                continue
            for key in parser[section]:
                if key not in self.DEFAULT_CONFIG[section]:
                    unknown.append(f"{section}.{key}")
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {', '.join(unknown)}", unknown)

        for section in parser.sections():
            for key, raw in parser[section].items():
                self.set(section, key, self._coerce(section, key, raw))
                self._provided.setdefault(section, []).append(key)
        self._config_file = path

        if subcommand is not None:
            self.check_required(subcommand)
        logger.info(f"Loaded configuration from {path}")

    def check_required(self, subcommand: str) -> None:
        """
        Verify that every required key of a subcommand was provided.

        Raises:
            ConfigError: Listing all missing keys at once.
        """
        if subcommand not in self.REQUIRED_KEYS:
            raise ConfigError(f"Unknown subcommand '{subcommand}'", [subcommand])
        provided = self._provided.get(subcommand, [])
        missing = [f"{subcommand}.{key}" for key in self.REQUIRED_KEYS[subcommand] if key not in provided]
        if missing:
            raise ConfigError(f"Missing required configuration keys: {', '.join(missing)}", missing)

    def _coerce(self, section: str, key: str, raw: str) -> Any:
        """Convert a raw string to the type of the key's default."""
        default = self.DEFAULT_CONFIG[section][key]
        raw = raw.strip()
        try:
            if isinstance(default, bool):
                lowered = raw.lower()
                if lowered in ("true", "yes", "on", "1"):
                    return True
                if lowered in ("false", "no", "off", "0"):
                    return False
                raise ValueError(raw)
            if isinstance(default, int):
                return int(raw)
            if isinstance(default, float):
                return float(raw)
        except ValueError:
            raise ConfigError(f"Invalid value for {section}.{key}: '{raw}'", [f"{section}.{key}"])
        return raw

    def _check_limits(self, section: str, key: str, value: Any) -> None:
        if key not in self.LIMITS or isinstance(value, bool):
            return
        low, high = self.LIMITS[key]
        # rho and rtol are open at zero
        open_low = key in ("rho", "rtol", "increment_rtol", "lipschitz_c")
        if low is not None and (value < low or (open_low and value == low)):
            raise ConfigError(f"Invalid value for {section}.{key}: {value} (must exceed {low})", [f"{section}.{key}"])
        if high is not None and value > high:
            raise ConfigError(f"Invalid value for {section}.{key}: {value} (must not exceed {high})", [f"{section}.{key}"])

    def save_config(self, path: Union[str, Path]) -> None:
        """
        Write the resolved configuration as a ``key = value`` file.

        Experiment keys still at their unset defaults are left out so the
        file loads back.
        """
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        for section, values in self._config.items():
            defaults = self.DEFAULT_CONFIG[section]
            parser[section] = {
                key: str(value) for key, value in values.items()
                if section not in SUBCOMMANDS or value != defaults[key]
            }
        try:
            with open(path, "w") as f:
                parser.write(f)
        except OSError as e:
            raise ConfigError(f"Error saving configuration: {e}")

    def get(self, section: str, key: str, default: Any = None) -> Any:
        """Get a configuration value."""
        values = self._config.get(section, {})
        if key in values:
            return values[key]
        return self.DEFAULT_CONFIG.get(section, {}).get(key, default)

    def get_floats(self, section: str, key: str) -> List[float]:
        """Get a comma separated list value as floats (empty list for '')."""
        raw = str(self.get(section, key) or "").strip()
        if not raw:
            return []
        try:
            return [float(item) for item in raw.split(",") if item.strip()]
        except ValueError:
            raise ConfigError(f"Invalid list for {section}.{key}: '{raw}'", [f"{section}.{key}"])

    def set(self, section: str, key: str, value: Any) -> None:
        """Set a configuration value."""
        if section not in self.DEFAULT_CONFIG or key not in self.DEFAULT_CONFIG[section]:
            raise ConfigError(f"Unknown configuration key {section}.{key}", [f"{section}.{key}"])
        self._check_limits(section, key, value)
        self._config[section][key] = value

    def resolved(self) -> Dict[str, Dict[str, Any]]:
        """Return a deep copy of the full resolved configuration."""
        return copy.deepcopy(self._config)

    def reset_to_defaults(self) -> None:
        """Reset configuration to default values."""
        self._config = copy.deepcopy(self.DEFAULT_CONFIG)
        self._config_file = None
        self._provided = {}


# Create a singleton instance
config = Config()
