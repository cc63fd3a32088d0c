"""
RunConfig and its layered sources, with flags taking precedence over the
YAML file. Also sanitizes user-supplied values before they are logged.
"""
import logging
import os
import re
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional

import yaml

from evolution_errors import ConfigError

logger = logging.getLogger(__name__)

# Strip control characters from anything user supplied before logging (CWE-117)
_LOG_SANITIZE_PATTERN = re.compile(r"[\r\n\t\x00-\x1f\x7f-\x9f]")

SYSTEM_NAMES = ("graph", "linorder", "poset", "monoid", "counterexample", "chain", "substructures", "random", "dpo")
REPORT_FORMATS = ("json", "text", "dot")


def sanitize_log_input(value, max_length=200):
    """Sanitize input for safe logging"""
    return _LOG_SANITIZE_PATTERN.sub("", str(value))[:max_length]


def _env_int(name, default):
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be an integer", variable=name, value=sanitize_log_input(raw))


def default_budget():
    """Enumeration budget used when no --budget flag is given"""
    return _env_int("EVOLVE_BUDGET_DEFAULT", 16)


def default_depth():
    return _env_int("EVOLVE_DEPTH_DEFAULT", 3)


def default_node_cap():
    return _env_int("EVOLVE_NODE_CAP", 200000)


def default_seed():
    return _env_int("EVOLVE_SEED", 0)


def log_level():
    return os.environ.get("EVOLVE_LOG_LEVEL", "WARNING").upper()


@dataclass
class RunConfig:
    """Everything a CLI run depends on; echoed into every report"""

    system: str = "graph"
    system_params: Dict[str, Any] = field(default_factory=dict)
    budget: int = field(default_factory=default_budget)
    depth: int = field(default_factory=default_depth)
    max_size: int = 3
    node_cap: int = field(default_factory=default_node_cap)
    seed: int = field(default_factory=default_seed)
    out: Optional[str] = None
    report_format: str = "json"
    strict_equality: bool = True

    def validate(self):
        """Validate budgets, system selector and report format"""
        for name in ("budget", "depth", "node_cap"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive", field=name, value=getattr(self, name))
        if self.max_size < 0:
            raise ConfigError("max_size must be non-negative", field="max_size", value=self.max_size)
        if self.system not in SYSTEM_NAMES:
            raise ConfigError(
                f"Unknown system: {sanitize_log_input(self.system, 40)}", field="system", choices=list(SYSTEM_NAMES)
            )
        if self.report_format not in REPORT_FORMATS:
            raise ConfigError("Unknown report format", field="report_format", choices=list(REPORT_FORMATS))
        return self

    def as_dict(self):
        return asdict(self)

    def merged(self, **overrides):
        """Return a copy with every non-None override applied"""
        data = self.as_dict()
        data.update({key: value for key, value in overrides.items() if value is not None})
        return RunConfig(**data)

    @classmethod
    def from_yaml(cls, path):
        """Load a run configuration from a YAML file"""
        try:
            with open(path) as f:
                data = yaml.safe_load(f) or {}
        except FileNotFoundError:
            raise ConfigError(f"Config file not found: {sanitize_log_input(path)}", path=str(path))
        except yaml.YAMLError as e:
            raise ConfigError(f"Invalid YAML in {sanitize_log_input(path)}: {e}", path=str(path))

        if not isinstance(data, dict):
            raise ConfigError("Config file must contain a mapping", path=str(path))

        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown config keys: {', '.join(unknown)}", keys=unknown)

        logger.info(f"Loaded run config from {sanitize_log_input(path)}")
        return cls(**data)
