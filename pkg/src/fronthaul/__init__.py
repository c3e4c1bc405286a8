"""Latency and reliability of multipath fronthaul with duplication or erasure coding."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DomainError,
    FronthaulError,
    InstabilityError,
    NoSamplesError,
    NoSolutionError,
    ValidationError,
)
from .model import PathConfig, ServiceMoments, Strategy, StrategyParams, TrafficSpec  # noqa: E402

__all__ = [
    "__version__",
    "ConfigError",
    "DomainError",
    "FronthaulError",
    "InstabilityError",
    "NoSamplesError",
    "NoSolutionError",
    "ValidationError",
    "PathConfig",
    "ServiceMoments",
    "Strategy",
    "StrategyParams",
    "TrafficSpec",
]
