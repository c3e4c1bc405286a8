"""Experiment scenarios: value types, the configuration file grammar, and presets.

A scenario file is a TOML document restricted to these sections and keys
(unknown keys are rejected):

    [paths]
    n = 10                      # number of paths
    capacity_mbps = 100.0       # per-path capacity (or capacity_bps)

    [[service]]                 # one block per service, order matters
    name = "eMBB"
    arrival_per_ms = 8.0        # Poisson frame rate (or arrival_per_s)
    frame_bytes = 1500
    strategy = "MPC"            # SP | MPD | MPC
    k = 2                       # MPC only

    [allocation]
    kind = "shared"             # shared | bandwidth-split | path-split
    fractions = [0.2, 0.8]      # bandwidth-split only, one per service
    path_counts = [2, 8]        # path-split only, one per service

    [sim]
    duration_s = 10.0
    warmup_s = 0.5
    seed = 1
    cancellation = "cancel-on-complete"   # or "no-cancel", "cancel-unsynchronized"
    replications = 1
    verify_payloads = false

Boundary units follow the traffic table (bytes, frames/ms, Mbps); inside the
package everything is bits, seconds and per-second (1 byte = 8 bits,
1 Mbps = 1e6 bit/s).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import tomli

from .errors import DomainError, ParseError, UnknownPresetError, ValidationError
from .model import PathConfig, Strategy, StrategyParams, TrafficSpec
from .rng import STREAM_RULE, U64

FRACTION_SLACK = 1e-9


class AllocationKind(str, Enum):
    SHARED = "shared"
    BANDWIDTH_SPLIT = "bandwidth-split"
    PATH_SPLIT = "path-split"


class CancellationMode(str, Enum):
    CANCEL_ON_COMPLETE = "cancel-on-complete"
    NO_CANCEL = "no-cancel"
    CANCEL_UNSYNCHRONIZED = "cancel-unsynchronized"


@dataclass(frozen=True)
class CoexistenceAllocation:
    kind: AllocationKind = AllocationKind.SHARED
    bandwidth_fractions: tuple[float, ...] | None = None
    path_counts: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", AllocationKind(self.kind))
        if self.bandwidth_fractions is not None:
            object.__setattr__(self, "bandwidth_fractions", tuple(self.bandwidth_fractions))
        if self.path_counts is not None:
            object.__setattr__(self, "path_counts", tuple(self.path_counts))

    @classmethod
    def shared(cls) -> CoexistenceAllocation:
        return cls(AllocationKind.SHARED)

    @classmethod
    def bandwidth_split(cls, *fractions: float) -> CoexistenceAllocation:
        return cls(AllocationKind.BANDWIDTH_SPLIT, bandwidth_fractions=tuple(fractions))

    @classmethod
    def path_split(cls, *counts: int) -> CoexistenceAllocation:
        return cls(AllocationKind.PATH_SPLIT, path_counts=tuple(counts))


@dataclass(frozen=True)
class ServiceSpec:
    """A named traffic class and its transport strategy. A zero arrival rate is allowed."""

    name: str
    arrival_rate: float
    frame_size: int
    strategy: StrategyParams

    @property
    def traffic(self) -> TrafficSpec:
        return TrafficSpec(self.arrival_rate, self.frame_size)

    @property
    def frame_bytes(self) -> int:
        return -(-self.frame_size // 8)


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


@dataclass(frozen=True)
class Scenario:
    paths: PathConfig
    services: tuple[ServiceSpec, ...]
    allocation: CoexistenceAllocation = field(default_factory=CoexistenceAllocation.shared)
    cancellation: CancellationMode = CancellationMode.CANCEL_ON_COMPLETE
    sim_duration: float = 10.0
    warmup: float = 0.5
    seed: int = 1
    replications: int = 1
    verify_payloads: bool = False
    rng_streams: str = STREAM_RULE

    def __post_init__(self) -> None:
        object.__setattr__(self, "services", tuple(self.services))
        object.__setattr__(self, "cancellation", CancellationMode(self.cancellation))
        self._validate()

    def _validate(self) -> None:
        n = self.paths.path_count
        if not self.services:
            raise ValidationError("service", "at least one service is required")
        names = [s.name for s in self.services]
        for i, svc in enumerate(self.services):
            where = f"service[{i}]"
            if not isinstance(svc.name, str) or not svc.name:
                raise ValidationError(f"{where}.name", "must be a non-empty string")
            if names.index(svc.name) != i:
                raise ValidationError(f"{where}.name", f"duplicate service name {svc.name!r}")
            if not (_is_number(svc.arrival_rate) and math.isfinite(svc.arrival_rate) and svc.arrival_rate >= 0):
                raise ValidationError(f"{where}.arrival_per_ms", f"must be a finite number >= 0, got {svc.arrival_rate}")
            if not (isinstance(svc.frame_size, int) and not isinstance(svc.frame_size, bool) and svc.frame_size > 0):
                raise ValidationError(f"{where}.frame_bytes", f"must be a positive whole number, got {svc.frame_size}")

        alloc = self.allocation
        counts = [n] * len(self.services)
        if alloc.kind is AllocationKind.BANDWIDTH_SPLIT:
            fr = alloc.bandwidth_fractions
            if fr is None or len(fr) != len(self.services):
                raise ValidationError("allocation.fractions", "need one bandwidth fraction per service")
            for x in fr:
                if not (_is_number(x) and 0.0 < x <= 1.0):
                    raise ValidationError("allocation.fractions", f"each fraction must lie in (0, 1], got {x}")
            if math.fsum(fr) > 1.0 + FRACTION_SLACK:
                raise ValidationError("allocation.fractions", f"fractions sum to {math.fsum(fr):g} > 1")
        elif alloc.kind is AllocationKind.PATH_SPLIT:
            pc = alloc.path_counts
            if pc is None or len(pc) != len(self.services):
                raise ValidationError("allocation.path_counts", "need one path count per service")
            for x in pc:
                if not (isinstance(x, int) and not isinstance(x, bool) and x >= 1):
                    raise ValidationError("allocation.path_counts", f"each path count must be an integer >= 1, got {x}")
            if sum(pc) != n:
                raise ValidationError("allocation.path_counts", f"path counts sum to {sum(pc)}, expected n={n}")
            counts = list(pc)
        if alloc.kind is not AllocationKind.BANDWIDTH_SPLIT and alloc.bandwidth_fractions is not None:
            raise ValidationError("allocation.fractions", f"not allowed for {alloc.kind.value}")
        if alloc.kind is not AllocationKind.PATH_SPLIT and alloc.path_counts is not None:
            raise ValidationError("allocation.path_counts", f"not allowed for {alloc.kind.value}")

        for i, (svc, paths) in enumerate(zip(self.services, counts)):
            try:
                svc.strategy.check(paths)
            except DomainError as exc:
                raise ValidationError(f"service[{i}].k", str(exc)) from None

        if not (_is_number(self.sim_duration) and math.isfinite(self.sim_duration) and self.sim_duration > 0):
            raise ValidationError("sim.duration_s", f"must be a finite number > 0, got {self.sim_duration}")
        if not (_is_number(self.warmup) and self.warmup >= 0):
            raise ValidationError("sim.warmup_s", f"must be >= 0, got {self.warmup}")
        if not self.sim_duration > self.warmup:
            raise ValidationError("sim.duration_s", f"duration {self.sim_duration} must exceed warmup {self.warmup}")
        if not (isinstance(self.seed, int) and not isinstance(self.seed, bool) and 0 <= self.seed <= U64):
            raise ValidationError("sim.seed", f"must be an unsigned 64-bit integer, got {self.seed}")
        if not (isinstance(self.replications, int) and not isinstance(self.replications, bool) and self.replications >= 1):
            raise ValidationError("sim.replications", f"must be an integer >= 1, got {self.replications}")
        if not isinstance(self.verify_payloads, bool):
            raise ValidationError("sim.verify_payloads", "must be true or false")
        if self.rng_streams != STREAM_RULE:
            raise ValidationError("sim.rng_streams", f"unsupported stream rule {self.rng_streams!r}")

    def service(self, name: str) -> ServiceSpec:
        for svc in self.services:
            if svc.name == name:
                return svc
        raise KeyError(name)

    def with_strategy(self, strategy: StrategyParams, names=None) -> Scenario:
        services = tuple(
            replace(s, strategy=strategy) if names is None or s.name in names else s for s in self.services
        )
        return replace(self, services=services)

    def digest(self) -> str:
        """Short stable hash of the canonical serialisation."""
        return hashlib.sha256(serialize(self).encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------- parsing

_SECTIONS = {
    "paths": {"n", "capacity_mbps", "capacity_bps"},
    "service": {"name", "arrival_per_ms", "arrival_per_s", "frame_bytes", "strategy", "k"},
    "allocation": {"kind", "fractions", "path_counts"},
    "sim": {"duration_s", "warmup_s", "seed", "cancellation", "replications", "verify_payloads"},
}
_REQUIRED_SECTIONS = ("paths", "service")


def _check_keys(table: dict, section: str, where: str) -> None:
    for key in table:
        if key not in _SECTIONS[section]:
            raise ValidationError(f"{where}.{key}", "unknown key")


def _number(table, key, where, *, integer=False):
    value = table[key]
    if integer:
        if not isinstance(value, int) or isinstance(value, bool):
            raise ValidationError(f"{where}.{key}", f"must be an integer, got {value!r}")
        return value
    if not _is_number(value):
        raise ValidationError(f"{where}.{key}", f"must be a number, got {value!r}")
    return float(value)


def _one_of(table, keys, where):
    present = [k for k in keys if k in table]
    if len(present) != 1:
        raise ValidationError(f"{where}.{keys[0]}", f"exactly one of {', '.join(keys)} is required")
    return present[0]


def _parse_paths(table) -> PathConfig:
    _check_keys(table, "paths", "paths")
    if "n" not in table:
        raise ValidationError("paths.n", "missing")
    n = _number(table, "n", "paths", integer=True)
    if n < 1:
        raise ValidationError("paths.n", f"must be >= 1, got {n}")
    key = _one_of(table, ("capacity_mbps", "capacity_bps"), "paths")
    cap = _number(table, key, "paths")
    if not (math.isfinite(cap) and cap > 0):
        raise ValidationError(f"paths.{key}", f"must be a finite number > 0, got {cap}")
    return PathConfig(n, cap * 1e6 if key == "capacity_mbps" else cap)


def _parse_service(table, i) -> ServiceSpec:
    where = f"service[{i}]"
    _check_keys(table, "service", where)
    for key in ("name", "frame_bytes", "strategy"):
        if key not in table:
            raise ValidationError(f"{where}.{key}", "missing")
    name = table["name"]
    if not isinstance(name, str) or not name:
        raise ValidationError(f"{where}.name", "must be a non-empty string")
    rate_key = _one_of(table, ("arrival_per_ms", "arrival_per_s"), where)
    rate = _number(table, rate_key, where)
    if not (math.isfinite(rate) and rate >= 0):
        raise ValidationError(f"{where}.{rate_key}", f"must be a finite number >= 0, got {rate}")
    frame_bytes = _number(table, "frame_bytes", where, integer=True)
    if frame_bytes < 1:
        raise ValidationError(f"{where}.frame_bytes", f"must be >= 1, got {frame_bytes}")
    kind = table["strategy"]
    try:
        kind = Strategy(str(kind).upper())
    except ValueError:
        raise ValidationError(f"{where}.strategy", f"must be SP, MPD or MPC, got {kind!r}") from None
    if kind is Strategy.MPC:
        if "k" not in table:
            raise ValidationError(f"{where}.k", "MPC needs a split factor k")
        k = _number(table, "k", where, integer=True)
        if k < 1:
            raise ValidationError(f"{where}.k", f"must be >= 1, got {k}")
        strategy = StrategyParams.mpc(k)
    else:
        if "k" in table:
            raise ValidationError(f"{where}.k", f"not allowed for {kind.value}")
        strategy = StrategyParams(kind)
    per_s = rate * 1000.0 if rate_key == "arrival_per_ms" else rate
    return ServiceSpec(name, per_s, frame_bytes * 8, strategy)


def _parse_allocation(table) -> CoexistenceAllocation:
    _check_keys(table, "allocation", "allocation")
    raw = table.get("kind", "shared")
    try:
        kind = AllocationKind(raw)
    except ValueError:
        raise ValidationError("allocation.kind", f"must be shared, bandwidth-split or path-split, got {raw!r}") from None
    fractions = table.get("fractions")
    counts = table.get("path_counts")
    if fractions is not None:
        if not isinstance(fractions, list) or not all(_is_number(x) for x in fractions):
            raise ValidationError("allocation.fractions", "must be a list of numbers")
        fractions = tuple(float(x) for x in fractions)
    if counts is not None:
        if not isinstance(counts, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in counts):
            raise ValidationError("allocation.path_counts", "must be a list of integers")
        counts = tuple(counts)
    return CoexistenceAllocation(kind, fractions, counts)


def _parse_sim(table) -> dict:
    _check_keys(table, "sim", "sim")
    out = {}
    if "duration_s" in table:
        out["sim_duration"] = _number(table, "duration_s", "sim")
    if "warmup_s" in table:
        out["warmup"] = _number(table, "warmup_s", "sim")
    if "seed" in table:
        out["seed"] = _number(table, "seed", "sim", integer=True)
    if "replications" in table:
        out["replications"] = _number(table, "replications", "sim", integer=True)
    if "cancellation" in table:
        try:
            out["cancellation"] = CancellationMode(table["cancellation"])
        except ValueError:
            raise ValidationError(
                "sim.cancellation",
                f"must be one of {', '.join(m.value for m in CancellationMode)}, got {table['cancellation']!r}",
            ) from None
    if "verify_payloads" in table:
        if not isinstance(table["verify_payloads"], bool):
            raise ValidationError("sim.verify_payloads", "must be true or false")
        out["verify_payloads"] = table["verify_payloads"]
    return out


def parse(document: str) -> Scenario:
    """Parse and fully validate a scenario document."""
    try:
        data = tomli.loads(document)
    except tomli.TOMLDecodeError as exc:
        raise ParseError(str(exc), getattr(exc, "lineno", None)) from None
    for key in data:
        if key not in _SECTIONS:
            raise ValidationError(key, "unknown section")
    for key in _REQUIRED_SECTIONS:
        if key not in data:
            raise ValidationError(key, "missing section")
    if not isinstance(data["paths"], dict):
        raise ValidationError("paths", "must be a table")
    services = data["service"]
    if not isinstance(services, list) or not all(isinstance(s, dict) for s in services):
        raise ValidationError("service", "use repeated [[service]] tables")
    for key in ("allocation", "sim"):
        if key in data and not isinstance(data[key], dict):
            raise ValidationError(key, "must be a table")
    paths = _parse_paths(data["paths"])
    specs = tuple(_parse_service(s, i) for i, s in enumerate(services))
    alloc = _parse_allocation(data.get("allocation", {}))
    try:
        return Scenario(paths, specs, alloc, **_parse_sim(data.get("sim", {})))
    except DomainError as exc:
        raise ValidationError("scenario", str(exc)) from None


def load(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


# ---------------------------------------------------------- serialisation

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    raise TypeError(value)


def _scaled(value: float, scale: float):
    """``value / scale`` when that survives a round trip through ``* scale``, else None."""
    scaled = value / scale
    return scaled if scaled * scale == value else None


def serialize(scenario: Scenario) -> str:
    """Render a scenario in the file grammar; ``parse(serialize(s)) == s``."""
    lines = ["[paths]", f"n = {scenario.paths.path_count}"]
    mbps = _scaled(float(scenario.paths.capacity), 1e6)
    if mbps is not None:
        lines.append(f"capacity_mbps = {_fmt(mbps)}")
    else:
        lines.append(f"capacity_bps = {_fmt(float(scenario.paths.capacity))}")
    for svc in scenario.services:
        lines += ["", "[[service]]", f"name = {_fmt(svc.name)}"]
        per_ms = _scaled(float(svc.arrival_rate), 1000.0)
        if per_ms is not None:
            lines.append(f"arrival_per_ms = {_fmt(per_ms)}")
        else:
            lines.append(f"arrival_per_s = {_fmt(float(svc.arrival_rate))}")
        if svc.frame_size % 8:
            raise ValidationError("service.frame_bytes", "frame size is not a whole number of bytes")
        lines.append(f"frame_bytes = {svc.frame_size // 8}")
        lines.append(f"strategy = {_fmt(svc.strategy.kind.value)}")
        if svc.strategy.kind is Strategy.MPC:
            lines.append(f"k = {svc.strategy.split_factor}")
    alloc = scenario.allocation
    lines += ["", "[allocation]", f"kind = {_fmt(alloc.kind.value)}"]
    if alloc.bandwidth_fractions is not None:
        lines.append(f"fractions = {_fmt([float(x) for x in alloc.bandwidth_fractions])}")
    if alloc.path_counts is not None:
        lines.append(f"path_counts = {_fmt(list(alloc.path_counts))}")
    lines += [
        "",
        "[sim]",
        f"duration_s = {_fmt(float(scenario.sim_duration))}",
        f"warmup_s = {_fmt(float(scenario.warmup))}",
        f"seed = {scenario.seed}",
        f"cancellation = {_fmt(scenario.cancellation.value)}",
        f"replications = {scenario.replications}",
        f"verify_payloads = {_fmt(scenario.verify_payloads)}",
    ]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- presets

EMBB = ("eMBB", 8.0, 1500)
URLLC = ("URLLC", 24.0, 500)
PATHS = 10
CAPACITY_MBPS = 100.0


def _service(spec, strategy) -> ServiceSpec:
    name, per_ms, frame_bytes = spec
    return ServiceSpec(name, per_ms * 1000.0, frame_bytes * 8, strategy)


def _table1(allocation: CoexistenceAllocation, specs=(EMBB, URLLC)) -> Scenario:
    strategy = StrategyParams.mpc(2)
    return Scenario(
        paths=PathConfig(PATHS, CAPACITY_MBPS * 1e6),
        services=tuple(_service(s, strategy) for s in specs),
        allocation=allocation,
    )


PRESETS = {
    "table1-shared": lambda: _table1(CoexistenceAllocation.shared()),
    "table1-bw-split-1-5": lambda: _table1(CoexistenceAllocation.bandwidth_split(0.2, 0.8)),
    "table1-path-split-2-8": lambda: _table1(CoexistenceAllocation.path_split(2, 8)),
    "embb-only": lambda: _table1(CoexistenceAllocation.shared(), (EMBB,)),
    "urllc-only": lambda: _table1(CoexistenceAllocation.shared(), (URLLC,)),
}


def preset(name: str) -> Scenario:
    """Built-in scenario: Table-1 traffic, 10 paths of 100 Mbps, MPC k=2 for every service."""
    try:
        return PRESETS[name]()
    except KeyError:
        raise UnknownPresetError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
