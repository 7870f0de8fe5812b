"""Experiment configuration for lpssl runs."""

from dataclasses import asdict, dataclass, fields, replace
import logging
import os
from pathlib import Path
from typing import Any

from dotenv import dotenv_values

from ..errors import ConfigError
from ..schemas import CONFIG_SCHEMA, schema_errors
from ..utils import fnv1a_64

logger = logging.getLogger(__name__)

ENV_PREFIX = "LPSSL_"

# Keys that locate results rather than define them; left out of the digest.
NON_IDENTITY_KEYS = frozenset({"out_dir"})

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved configuration of one experiment (one grid cell)."""

    # data
    dataset_path: str = ""
    test_path: str = ""
    num_classes: int = 2
    vocab_max_size: int = 10000
    max_len: int = 256
    train_fraction: float = 0.8
    label_fraction: float = 0.10
    seed: int = 0
    # embeddings
    embedding_path: str = ""
    embedding_dim: int = 100
    finetune_embeddings: bool = True
    # graph + diffusion
    k: int = 100
    gamma: float = 3.0
    alpha: float = 0.99
    tol: float = 1e-6
    max_iter: int = 1000
    n_jobs: int = 1
    # model + training
    hidden_dim: int = 64
    num_hidden_layers: int = 1
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs_m: int = 10
    epochs_e: int = 10
    epochs_n: int = 10
    # output
    report_timing: bool = False
    out_dir: str = "runs"

    @classmethod
    def field_types(cls) -> dict[str, type]:
        return {f.name: f.type for f in fields(cls)}

    @classmethod
    def from_mapping(cls, values: dict[str, Any], source: str = "overrides") -> "ExperimentConfig":
        return cls().with_overrides(values, source=source)

    @classmethod
    def from_file(cls, path: str | Path, overrides: dict[str, Any] | None = None,
                  use_env: bool = True) -> "ExperimentConfig":
        """Resolve defaults < config file < ``LPSSL_*`` environment < ``overrides``."""
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Config file not found: {path}")
        file_values = {k: v for k, v in dotenv_values(path).items() if v is not None}
        cfg = cls().with_overrides(file_values, source=str(path))
        logger.info(f"Loaded config from {path}")
        return cfg.resolve(overrides, use_env=use_env)

    def resolve(self, overrides: dict[str, Any] | None = None,
                use_env: bool = True) -> "ExperimentConfig":
        """Apply environment variables then explicit overrides on top of this config."""
        cfg = self
        if use_env:
            env_values = {}
            for name in self.field_types():
                value = os.getenv(ENV_PREFIX + name.upper())
                if value is not None:
                    env_values[name] = value
            if env_values:
                cfg = cfg.with_overrides(env_values, source="environment")
        if overrides:
            cfg = cfg.with_overrides(overrides)
        return cfg

    def with_overrides(self, values: dict[str, Any], source: str = "overrides") -> "ExperimentConfig":
        types = self.field_types()
        unknown = sorted(set(values) - set(types))
        if unknown:
            raise ConfigError(f"Unknown config keys in {source}: {', '.join(unknown)}")
        parsed = {key: _coerce(key, value, types[key], source) for key, value in values.items()}
        return replace(self, **parsed)

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)

    def canonical_items(self) -> list[tuple[str, str]]:
        """Sorted ``(key, text)`` pairs; the text form round-trips through ``from_file``."""
        return sorted((key, _format(value)) for key, value in self.as_dict().items())

    @property
    def digest(self) -> str:
        """Stable 64-bit FNV-1a of the canonical key=value list, as 16 hex digits."""
        lines = "\n".join(f"{k}={v}" for k, v in self.canonical_items() if k not in NON_IDENTITY_KEYS)
        return f"{fnv1a_64(lines):016x}"

    @property
    def epochs(self) -> tuple[int, int, int]:
        return self.epochs_m, self.epochs_e, self.epochs_n

    @property
    def output_path(self) -> Path:
        return Path(self.out_dir)

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        body = "".join(f"{k} = {v}\n" for k, v in self.canonical_items())
        path.write_text(f"# lpssl resolved config, digest {self.digest}\n{body}", encoding="utf-8")
        return path

    def validate(self, check_files: bool = True) -> list[str]:
        """Validate configuration and return list of missing/invalid settings."""
        errors = schema_errors(self.as_dict(), CONFIG_SCHEMA)

        if check_files:
            if not self.dataset_path:
                errors.append("dataset_path is required")
            elif not Path(self.dataset_path).is_file():
                errors.append(f"dataset_path does not exist: {self.dataset_path}")
            for key in ("embedding_path", "test_path"):
                value = getattr(self, key)
                if value and not Path(value).is_file():
                    errors.append(f"{key} does not exist: {value}")

        return errors

    def require_valid(self, check_files: bool = True) -> "ExperimentConfig":
        errors = self.validate(check_files=check_files)
        if errors:
            raise ConfigError(f"Configuration errors: {'; '.join(errors)}")
        return self


def _coerce(key: str, value: Any, kind: type, source: str) -> Any:
    if not isinstance(value, str):
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            return float(value)
        if kind is str and isinstance(value, Path):
            return str(value)
        if isinstance(value, kind) and not (kind is int and isinstance(value, bool)):
            return value
        raise ConfigError(f"{key} in {source} must be {kind.__name__}, got {value!r}")

    text = value.strip()
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
    except ValueError:
        raise ConfigError(f"{key} in {source} must be {kind.__name__}, got {value!r}")
    return text


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    """Config from ``path`` if given, otherwise defaults; environment and overrides applied."""
    if path is None:
        return ExperimentConfig().resolve(overrides)
    return ExperimentConfig.from_file(path, overrides)


__all__ = [
    "ExperimentConfig",
    "load_config",
    "ENV_PREFIX",
]
