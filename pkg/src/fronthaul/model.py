"""Domain value types: traffic, path bundle, transport strategy, service moments."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import DomainError


class Strategy(str, Enum):
    SP = "SP"
    MPD = "MPD"
    MPC = "MPC"


@dataclass(frozen=True)
class TrafficSpec:
    """One service class: Poisson frame arrivals (frames/s) of fixed size (bits)."""

    arrival_rate: float
    frame_size: float

    def __post_init__(self) -> None:
        if not (self.arrival_rate > 0 and math.isfinite(self.arrival_rate)):
            raise DomainError(f"arrival_rate must be > 0, got {self.arrival_rate}")
        if not (self.frame_size > 0 and math.isfinite(self.frame_size)):
            raise DomainError(f"frame_size must be > 0, got {self.frame_size}")
        if self.frame_size != int(self.frame_size):
            raise DomainError(f"frame_size must be a whole number of bits, got {self.frame_size}")

    @classmethod
    def from_table_units(cls, arrival_per_ms: float, frame_bytes: int) -> TrafficSpec:
        return cls(arrival_rate=arrival_per_ms * 1000.0, frame_size=frame_bytes * 8)


@dataclass(frozen=True)
class PathConfig:
    """``path_count`` parallel paths of ``capacity`` bits/s each."""

    path_count: int
    capacity: float

    def __post_init__(self) -> None:
        if int(self.path_count) != self.path_count or self.path_count < 1:
            raise DomainError(f"path_count must be an integer >= 1, got {self.path_count}")
        if not (self.capacity > 0 and math.isfinite(self.capacity)):
            raise DomainError(f"capacity must be > 0, got {self.capacity}")


@dataclass(frozen=True)
class StrategyParams:
    kind: Strategy
    split_factor: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", Strategy(self.kind))
        if self.kind is Strategy.MPC:
            k = self.split_factor
            if k is None or int(k) != k or k < 1:
                raise DomainError(f"MPC needs an integer split factor k >= 1, got {k}")
        elif self.split_factor is not None:
            raise DomainError(f"{self.kind.value} takes no split factor")

    @classmethod
    def sp(cls) -> StrategyParams:
        return cls(Strategy.SP)

    @classmethod
    def mpd(cls) -> StrategyParams:
        return cls(Strategy.MPD)

    @classmethod
    def mpc(cls, k: int) -> StrategyParams:
        return cls(Strategy.MPC, k)

    @classmethod
    def parse(cls, text: str) -> StrategyParams:
        """Parse ``SP``, ``MPD`` or ``MPC:<k>`` (case-insensitive)."""
        name, _, arg = text.strip().partition(":")
        try:
            kind = Strategy(name.upper())
        except ValueError:
            raise DomainError(f"unknown strategy {text!r}") from None
        if kind is Strategy.MPC:
            if not arg:
                raise DomainError("MPC needs a split factor, e.g. MPC:2")
            try:
                return cls.mpc(int(arg))
            except ValueError:
                raise DomainError(f"bad split factor in {text!r}") from None
        if arg:
            raise DomainError(f"{kind.value} takes no split factor")
        return cls(kind)

    @property
    def blocks_needed(self) -> int:
        """Number of distinct blocks that complete a frame (1 for SP and MPD)."""
        return self.split_factor if self.kind is Strategy.MPC else 1

    def check(self, path_count: int) -> None:
        if self.kind is Strategy.MPC and self.split_factor > path_count:
            raise DomainError(f"split factor k={self.split_factor} exceeds path count n={path_count}")

    def __str__(self) -> str:
        if self.kind is Strategy.MPC:
            return f"MPC:{self.split_factor}"
        return self.kind.value


@dataclass(frozen=True)
class ServiceMoments:
    """Mean, variance and second moment of the effective service time (s, s^2, s^2)."""

    mean: float
    variance: float

    def __post_init__(self) -> None:
        if not self.mean > 0:
            raise DomainError(f"mean service time must be > 0, got {self.mean}")
        if self.variance < 0:
            raise DomainError(f"variance must be >= 0, got {self.variance}")

    @property
    def second_moment(self) -> float:
        return self.variance + self.mean * self.mean


@dataclass(frozen=True)
class ReliabilityPoint:
    deadline: float
    success_probability: float

    def __post_init__(self) -> None:
        if self.deadline < 0:
            raise DomainError("deadline must be >= 0")
        if not 0.0 <= self.success_probability <= 1.0:
            raise DomainError("success probability must lie in [0, 1]")

    @property
    def error_probability(self) -> float:
        return 1.0 - self.success_probability
