"""Stochastic-collocation Gaussian wave packet transform for the semiclassical
Schrödinger equation with random inputs."""

__version__ = "0.1.0"

from .config import ConfigError, ExperimentConfig, builtin_config  # noqa: E402
from .pipeline import (StageError, compare, run_classical, run_comparison,  # noqa: E402
                       run_gwpt, run_reference, zdiag)
from .quadrature import CollocationGrid, Distribution, build_grid  # noqa: E402

__all__ = [
    "__version__", "ConfigError", "ExperimentConfig", "builtin_config", "StageError",
    "compare", "run_classical", "run_comparison", "run_gwpt", "run_reference", "zdiag",
    "CollocationGrid", "Distribution", "build_grid",
]
