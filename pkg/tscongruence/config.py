"""
Layered experiment configuration.

Priority (lowest first):
- hardcoded fallback in this module
- defaults/bench-config.yaml
- a user file given via --config, or named by $TSCONGRUENCE_CONFIG
- explicit CLI flags (applied by the cli module)

Files are YAML or JSON with two optional top-level sections, `optimizer`
and `experiment`. Nested dicts are merged key by key.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

try:
    from .congruence import OptimizerConfig
except ImportError:
    from congruence import OptimizerConfig  # type: ignore[no-redef]

logger = logging.getLogger(__name__)

_DEFAULTS_DIR = Path(__file__).resolve().parent.parent / "defaults"
_DEFAULT_CONFIG_PATH = _DEFAULTS_DIR / "bench-config.yaml"

CONFIG_ENV_VAR = "TSCONGRUENCE_CONFIG"


def _default_workers() -> int:
    return min(4, os.cpu_count() or 1)


_DEFAULT_EXPERIMENT: dict[str, Any] = {
    "dimensions": [1, 2, 3],
    "lengths": [16, 32, 64],
    "pairs_per_cell": 20,
    "trials": 20,
    "step_scale": 1.0,
    "smoothing_window": 3,
    "translation_scale": 1.0,
    "repetitions": 3,
    "workers": None,
    "reasonable_value_limit": 100.0,
    "lower_bound_slack": 1e-6,
    "dewarp": False,
}


@dataclass
class ExperimentConfig:
    """Grid and harness settings shared by the benchmark runners."""

    dimensions: list[int] = field(default_factory=lambda: [1, 2, 3])
    lengths: list[int] = field(default_factory=lambda: [16, 32, 64])
    pairs_per_cell: int = 20
    trials: int = 20
    step_scale: float = 1.0
    smoothing_window: int = 3
    translation_scale: float = 1.0
    repetitions: int = 3
    workers: int = field(default_factory=_default_workers)
    reasonable_value_limit: float = 100.0
    lower_bound_slack: float = 1e-6
    dewarp: bool = False

    def __post_init__(self) -> None:
        if not self.dimensions or any(k < 1 for k in self.dimensions):
            raise ValueError(f"dimensions must be a non-empty list of values >= 1, got {self.dimensions}")
        if not self.lengths or any(n < 2 for n in self.lengths):
            raise ValueError(f"lengths must be a non-empty list of values >= 2, got {self.lengths}")
        for name in ("pairs_per_cell", "trials", "repetitions", "workers", "smoothing_window"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.step_scale < 0 or self.translation_scale < 0:
            raise ValueError("step_scale and translation_scale must be >= 0")
        if self.lower_bound_slack < 0:
            raise ValueError(f"lower_bound_slack must be >= 0, got {self.lower_bound_slack}")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentConfig:
        """Create a config from a mapping, applying defaults for missing keys."""
        unknown = sorted(set(data) - set(_DEFAULT_EXPERIMENT))
        if unknown:
            logger.warning("Ignoring unknown experiment settings: %s", ", ".join(unknown))
        merged = {**_DEFAULT_EXPERIMENT, **{key: data[key] for key in data if key in _DEFAULT_EXPERIMENT}}
        workers = merged["workers"]
        return cls(
            dimensions=[int(k) for k in merged["dimensions"]],
            lengths=[int(n) for n in merged["lengths"]],
            pairs_per_cell=int(merged["pairs_per_cell"]),
            trials=int(merged["trials"]),
            step_scale=float(merged["step_scale"]),
            smoothing_window=int(merged["smoothing_window"]),
            translation_scale=float(merged["translation_scale"]),
            repetitions=int(merged["repetitions"]),
            workers=_default_workers() if workers is None else int(workers),
            reasonable_value_limit=float(merged["reasonable_value_limit"]),
            lower_bound_slack=float(merged["lower_bound_slack"]),
            dewarp=bool(merged["dewarp"]),
        )

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class Settings:
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def to_dict(self) -> dict[str, Any]:
        return {"experiment": self.experiment.to_dict(), "optimizer": self.optimizer.to_dict()}


def _read_file(path: Path) -> dict[str, Any]:
    """Parse a YAML or JSON config file into a dict."""
    if not path.is_file():
        raise FileNotFoundError(f"Config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ValueError(f"Invalid JSON in config {path}: {e}") from e
    else:
        try:
            import yaml  # type: ignore[import-untyped]
        except ImportError:
            logger.error("PyYAML not installed. Install with: pip install 'pyyaml>=6.0'")
            raise ImportError("pyyaml is required for YAML config files") from None
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ValueError(f"Invalid YAML in config {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError(f"Config {path} must be a mapping with 'optimizer' and/or 'experiment' sections")
    return data


def _merge(base: dict[str, Any], override: dict[str, Any]) -> None:
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            base[key].update(value)
        else:
            base[key] = value


def load_config(path: Path | str | None = None, *, defaults_path: Path | None = None) -> Settings:
    """Load settings from the defaults file and an optional user file.

    When path is None, $TSCONGRUENCE_CONFIG is consulted. A broken defaults
    file is logged and skipped; a broken user file raises.
    """
    layered: dict[str, Any] = {"experiment": {}, "optimizer": {}}

    defaults_file = defaults_path or _DEFAULT_CONFIG_PATH
    if defaults_file.exists():
        try:
            _merge(layered, _read_file(defaults_file))
        except (ValueError, ImportError) as e:
            logger.warning("Failed to load default config %s: %s", defaults_file, e)

    if path is None and os.environ.get(CONFIG_ENV_VAR):
        path = os.environ[CONFIG_ENV_VAR]
        logger.info("Using config from $%s: %s", CONFIG_ENV_VAR, path)
    if path is not None:
        _merge(layered, _read_file(Path(path)))

    unknown = sorted(set(layered) - {"experiment", "optimizer"})
    if unknown:
        logger.warning("Ignoring unknown config sections: %s", ", ".join(unknown))
    for section in ("experiment", "optimizer"):
        if not isinstance(layered[section], dict):
            raise ValueError(f"Config section '{section}' must be a mapping")

    return Settings(
        experiment=ExperimentConfig.from_dict(layered["experiment"]),
        optimizer=OptimizerConfig.from_dict(layered["optimizer"]),
    )
