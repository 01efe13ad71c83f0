"""Symmetry-reduced Kahler-Ricci flow laboratory."""

from ._krflow import (
    AdmissibilityError,
    ConfigError,
    DomainError,
    IoError,
    Model,
    canonical_config,
    preset_names,
    run,
    run_file,
)

__all__ = [
    "AdmissibilityError",
    "ConfigError",
    "DomainError",
    "IoError",
    "Model",
    "canonical_config",
    "preset_names",
    "run",
    "run_file",
]
