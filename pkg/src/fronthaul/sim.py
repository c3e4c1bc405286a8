"""Discrete-event simulation of the CU -> n paths -> switch -> RU pipeline.

Each path is a FIFO single-server queue. A workload of ``s`` bits on a path
of capacity ``c`` takes an Exp(c/s) service time drawn from that path's own
random stream. Per frame:

* SP puts the whole frame on the service's first path.
* MPD puts a full copy on every path of the service; the first copy wins.
* MPC(k) puts one coded block of ``B/k`` bits on every path; the frame is
  recovered once any ``k`` distinct blocks have arrived.

Cancellation modes:

``cancel-on-complete``
    A frame enters service on all of its paths at the same instant, i.e. once
    it heads every one of its queues and those servers are idle. When the
    frame completes, its outstanding siblings are removed from their servers.
    The path bundle then behaves as a single M/G/1 server whose service time
    is the k-th order statistic of the block times, which is the model behind
    the analytic mean latency.
``no-cancel``
    Paths run independently. Every block is served to completion; blocks
    arriving after their frame completed are discarded.
``cancel-unsynchronized``
    Paths run independently, but once a frame completes its queued and
    in-service siblings are dropped. A path that finished its block early
    moves on to the next frame, so for MPC with k > 1 latencies fall below
    the synchronised (analytic) model.

Switching and duplicate detection take zero time. Events at equal times are
ordered by creation sequence.
"""

from __future__ import annotations

import heapq
import itertools
import json
import warnings
from array import array
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import analytic
from .codec import CodeGeometry, codec_for
from .errors import ConfigError, NoSamplesError
from .model import PathConfig, Strategy, TrafficSpec
from .rng import Stream
from .scenario import AllocationKind, CancellationMode, Scenario
from .stats import SummaryStats, summarize, wilson_interval

UTILISATION_WARNING = 0.95
RU_LABELS = ("RU1", "RU2")

_ARRIVAL, _BLOCK_DONE, _FRAME_DONE = 0, 1, 2


@dataclass(frozen=True)
class ServicePaths:
    """The paths a service transmits on after applying the coexistence allocation."""

    config: PathConfig
    indices: tuple[int, ...]
    dedicated_queues: bool

    @property
    def capacity(self) -> float:
        return self.config.capacity


def apply_allocation(scenario: Scenario) -> dict[str, ServicePaths]:
    """Per-service effective paths.

    Shared: every service sees all n paths at capacity c, through common queues.
    Bandwidth split: every service sees all n paths at ``fraction * c`` through
    its own queues. Path split: service i owns a contiguous run of n_i paths
    at full capacity.
    """
    n, c = scenario.paths.path_count, scenario.paths.capacity
    alloc = scenario.allocation
    out = {}
    if alloc.kind is AllocationKind.SHARED:
        for svc in scenario.services:
            out[svc.name] = ServicePaths(scenario.paths, tuple(range(n)), False)
    elif alloc.kind is AllocationKind.BANDWIDTH_SPLIT:
        for svc, frac in zip(scenario.services, alloc.bandwidth_fractions):
            out[svc.name] = ServicePaths(PathConfig(n, frac * c), tuple(range(n)), True)
    elif alloc.kind is AllocationKind.PATH_SPLIT:
        start = 0
        for svc, count in zip(scenario.services, alloc.path_counts):
            out[svc.name] = ServicePaths(PathConfig(count, c), tuple(range(start, start + count)), False)
            start += count
    else:  # pragma: no cover
        raise ConfigError(f"unknown allocation {alloc.kind}")
    return out


# ------------------------------------------------------------------ runtime records

class _Link:
    __slots__ = ("label", "capacity", "queue", "busy", "stream", "enqueued", "completed")

    def __init__(self, label, capacity, seed, trace):
        self.label = label
        self.capacity = capacity
        self.queue = deque()
        self.busy = None
        self.stream = Stream(seed, f"service/{label}")
        self.enqueued = [] if trace else None
        self.completed = [] if trace else None


class _Frame:
    __slots__ = ("fid", "svc", "arrival", "blocks", "received", "done", "indices", "payload")

    def __init__(self, fid, svc, arrival):
        self.fid = fid
        self.svc = svc
        self.arrival = arrival
        self.blocks = []
        self.received = 0
        self.done = False
        self.indices = []
        self.payload = None


class _Block:
    __slots__ = ("frame", "index", "link", "cancelled")

    def __init__(self, frame, index, link):
        self.frame = frame
        self.index = index
        self.link = link
        self.cancelled = False


class _Service:
    __slots__ = (
        "spec", "name", "rate", "k", "links", "workload", "arrivals", "destinations",
        "payloads", "codec", "latencies", "offered", "delivered", "ru_counts",
        "payload_checked", "payload_mismatches",
    )


# ------------------------------------------------------------------ results

@dataclass(frozen=True)
class ReliabilityEstimate:
    deadline: float
    point: float
    low: float
    high: float
    successes: int
    trials: int


@dataclass
class ServiceResult:
    name: str
    latencies: np.ndarray
    offered: int
    delivered: int
    ru_counts: tuple[int, int] = (0, 0)
    payload_checked: int = 0
    payload_mismatches: int = 0

    @property
    def in_flight(self) -> int:
        return self.offered - self.delivered

    def summary(self, confidence: float = 0.95) -> SummaryStats:
        if self.latencies.size == 0:
            raise NoSamplesError(f"no delivered frames for {self.name}")
        return summarize(self.latencies, confidence)

    def reliability_curve(self) -> tuple[np.ndarray, np.ndarray]:
        """Sorted latencies and the empirical fraction of offered frames delivered by each."""
        x = np.sort(self.latencies)
        trials = max(self.offered, 1)
        return x, np.arange(1, x.size + 1) / trials


@dataclass
class SimResult:
    seed: int
    services: dict[str, ServiceResult]
    utilisation: dict[str, float] = field(default_factory=dict)
    trace: dict[str, tuple[list[int], list[int]]] | None = None

    @property
    def max_utilisation(self) -> float:
        return max(self.utilisation.values(), default=0.0)

    @property
    def unstable(self) -> bool:
        return self.max_utilisation >= 1.0

    def to_dict(self, include_samples: bool = True) -> dict:
        services = {}
        for name, res in self.services.items():
            entry = {
                "offered": res.offered,
                "delivered": res.delivered,
                "in_flight": res.in_flight,
                "ru_counts": list(res.ru_counts),
                "payload_checked": res.payload_checked,
                "payload_mismatches": res.payload_mismatches,
            }
            if include_samples:
                entry["latencies"] = [float(x) for x in res.latencies]
            services[name] = entry
        return {
            "seed": self.seed,
            "utilisation": dict(self.utilisation),
            "unstable": self.unstable,
            "services": services,
        }

    def to_json(self, include_samples: bool = True) -> str:
        return json.dumps(self.to_dict(include_samples), sort_keys=True)


def estimate_reliability(
    result: SimResult,
    service: str,
    deadline: float,
    count_undelivered: bool = True,
    confidence: float = 0.95,
) -> ReliabilityEstimate:
    """Empirical P(latency <= deadline) with a Wilson interval.

    Offered frames still undelivered at the end of the run count as failures
    unless ``count_undelivered`` is False, in which case only delivered
    frames form the denominator.
    """
    res = result.services[service]
    if res.latencies.size == 0:
        raise NoSamplesError(f"no delivered frames for {service}")
    successes = int(np.count_nonzero(res.latencies <= deadline))
    trials = res.offered if count_undelivered else res.delivered
    trials = max(trials, res.delivered)
    low, high = wilson_interval(successes, trials, confidence)
    return ReliabilityEstimate(deadline, successes / trials, low, high, successes, trials)


# ------------------------------------------------------------------ load estimate

def utilisation_estimate(scenario: Scenario) -> dict[str, float]:
    """Analytic per-queue utilisation for the scenario's cancellation mode."""
    alloc = apply_allocation(scenario)
    synced = scenario.cancellation is CancellationMode.CANCEL_ON_COMPLETE
    load: dict[str, float] = {}
    for svc in scenario.services:
        sp = alloc[svc.name]
        indices = sp.indices[:1] if svc.strategy.kind is Strategy.SP else sp.indices
        if svc.strategy.kind is Strategy.SP or not synced:
            busy = svc.frame_size / svc.strategy.blocks_needed / sp.capacity
        else:
            busy = analytic.strategy_moments(_unit(svc), sp.config, svc.strategy).mean
        for j in indices:
            label = _link_label(j, svc.name if sp.dedicated_queues else None)
            load[label] = load.get(label, 0.0) + svc.arrival_rate * busy
    return load


def _unit(svc):
    # service moments do not depend on the arrival rate
    return TrafficSpec(1.0, svc.frame_size)


def _link_label(index: int, owner: str | None) -> str:
    return f"path/{index}" if owner is None else f"path/{index}/{owner}"


# ------------------------------------------------------------------ engine

class _Engine:
    def __init__(self, scenario: Scenario, trace: bool):
        self.scenario = scenario
        mode = scenario.cancellation
        self.synchronized = mode is CancellationMode.CANCEL_ON_COMPLETE
        self.cancel = mode is not CancellationMode.NO_CANCEL
        self.seed = scenario.seed
        self.heap = []
        self.seq = itertools.count()
        self.next_fid = 0
        self.links: dict[str, _Link] = {}
        self.services: list[_Service] = []
        allocation = apply_allocation(scenario)
        for spec in scenario.services:
            sp = allocation[spec.name]
            owner = spec.name if sp.dedicated_queues else None
            links = []
            for j in sp.indices:
                label = _link_label(j, owner)
                if label not in self.links:
                    self.links[label] = _Link(label, sp.capacity, self.seed, trace)
                links.append(self.links[label])
            svc = _Service()
            svc.spec = spec
            svc.name = spec.name
            svc.rate = spec.arrival_rate
            svc.k = spec.strategy.blocks_needed
            svc.links = links[:1] if spec.strategy.kind is Strategy.SP else links
            svc.workload = spec.frame_size / svc.k
            svc.arrivals = Stream(self.seed, f"arrivals/{spec.name}")
            svc.destinations = Stream(self.seed, f"destination/{spec.name}")
            svc.payloads = Stream(self.seed, f"payload/{spec.name}") if scenario.verify_payloads else None
            svc.codec = codec_for(CodeGeometry(len(svc.links), svc.k)) if scenario.verify_payloads else None
            svc.latencies = array("d")
            svc.offered = 0
            svc.delivered = 0
            svc.ru_counts = [0, 0]
            svc.payload_checked = 0
            svc.payload_mismatches = 0
            self.services.append(svc)

    def push(self, time, kind, obj):
        heapq.heappush(self.heap, (time, next(self.seq), kind, obj))

    # ---- arrivals

    def _arrive(self, now, si):
        svc = self.services[si]
        frame = _Frame(self.next_fid, si, now)
        self.next_fid += 1
        ru = 0 if svc.destinations.uniform() < 0.5 else 1
        if now >= self.scenario.warmup:
            svc.offered += 1
            svc.ru_counts[ru] += 1
        if svc.payloads is not None:
            data = svc.payloads.bytes(svc.spec.frame_bytes)
            frame.payload = (data, svc.codec.encode_array(data))
        for index, link in enumerate(svc.links):
            block = _Block(frame, index, link)
            frame.blocks.append(block)
            link.queue.append(block)
            if link.enqueued is not None:
                link.enqueued.append(frame.fid)
        if self.synchronized:
            self._try_start_frame(now, frame)
        else:
            for link in svc.links:
                if link.busy is None:
                    self._start_next(now, link)

    # ---- unsynchronised service

    def _start_next(self, now, link):
        queue = link.queue
        while queue:
            block = queue.popleft()
            if block.cancelled:
                continue
            link.busy = block
            duration = self.services[block.frame.svc].workload / link.capacity * link.stream.exponential()
            self.push(now + duration, _BLOCK_DONE, block)
            return

    def _block_done(self, now, block):
        if block.cancelled:
            return
        link = block.link
        link.busy = None
        if link.completed is not None:
            link.completed.append(block.frame.fid)
        frame = block.frame
        if not frame.done:
            frame.received += 1
            frame.indices.append(block.index)
            if frame.received == self.services[frame.svc].k:
                self._deliver(now, frame)
                if self.cancel:
                    for sibling in frame.blocks:
                        if sibling is block or sibling.cancelled:
                            continue
                        sibling.cancelled = True
                        if sibling.link.busy is sibling:
                            sibling.link.busy = None
                            self._start_next(now, sibling.link)
        self._start_next(now, link)

    # ---- synchronised service

    def _startable(self, frame):
        for block in frame.blocks:
            link = block.link
            if link.busy is not None or not link.queue or link.queue[0] is not block:
                return False
        return True

    def _try_start_frame(self, now, frame):
        if not self._startable(frame):
            return False
        svc = self.services[frame.svc]
        scale = svc.workload
        times = []
        for block in frame.blocks:
            link = block.link
            link.queue.popleft()
            link.busy = block
            times.append((scale / link.capacity * link.stream.exponential(), block.index))
        times.sort()
        frame.indices = [index for _, index in times[: svc.k]]
        self.push(now + times[svc.k - 1][0], _FRAME_DONE, frame)
        return True

    def _frame_done(self, now, frame):
        svc = self.services[frame.svc]
        winners = set(frame.indices)
        for block in frame.blocks:
            block.link.busy = None
            if block.index in winners:
                if block.link.completed is not None:
                    block.link.completed.append(frame.fid)
            else:
                block.cancelled = True
        frame.received = svc.k
        self._deliver(now, frame)
        heads = {}
        for block in frame.blocks:
            queue = block.link.queue
            if queue:
                head = queue[0].frame
                heads[head.fid] = head
        for fid in sorted(heads):
            self._try_start_frame(now, heads[fid])

    # ---- completion

    def _deliver(self, now, frame):
        frame.done = True
        svc = self.services[frame.svc]
        if frame.arrival < self.scenario.warmup:
            return
        svc.delivered += 1
        svc.latencies.append(now - frame.arrival)
        if frame.payload is not None:
            data, rows = frame.payload
            indices = tuple(sorted(frame.indices))
            recovered = svc.codec.decode_array(indices, rows[list(indices)], len(data))
            svc.payload_checked += 1
            if recovered != data:
                svc.payload_mismatches += 1

    def run(self, inject=()) -> None:
        duration = self.scenario.sim_duration
        for si, svc in enumerate(self.services):
            if svc.rate > 0:
                self.push(svc.arrivals.exponential() / svc.rate, _ARRIVAL, si)
        names = {svc.name: si for si, svc in enumerate(self.services)}
        for name, time in inject:
            if name not in names:
                raise ConfigError(f"cannot inject a frame for unknown service {name!r}")
            if not 0 <= time <= duration:
                raise ConfigError(f"injection time {time} outside [0, {duration}]")
            self.push(time, _ARRIVAL, (names[name], True))
        heap = self.heap
        pop = heapq.heappop
        while heap:
            now, _, kind, obj = pop(heap)
            if now > duration:
                break
            if kind == _BLOCK_DONE:
                self._block_done(now, obj)
            elif kind == _FRAME_DONE:
                self._frame_done(now, obj)
            elif isinstance(obj, tuple):
                self._arrive(now, obj[0])
            else:
                svc = self.services[obj]
                self.push(now + svc.arrivals.exponential() / svc.rate, _ARRIVAL, obj)
                self._arrive(now, obj)


def run(scenario: Scenario, *, inject=(), trace: bool = False) -> SimResult:
    """Simulate one replication of ``scenario``.

    ``inject`` adds frames at fixed times as (service name, time) pairs on top
    of the Poisson arrivals. ``trace`` records per-path enqueue and
    completion order (frame ids). Identical scenarios give identical results.
    """
    if not isinstance(scenario, Scenario):
        raise ConfigError("run() needs a Scenario")
    utilisation = utilisation_estimate(scenario)
    peak = max(utilisation.values(), default=0.0)
    if peak >= UTILISATION_WARNING:
        warnings.warn(
            f"estimated queue utilisation {peak:.3f} >= {UTILISATION_WARNING}"
            + (" (unstable)" if peak >= 1.0 else ""),
            RuntimeWarning,
            stacklevel=2,
        )
    engine = _Engine(scenario, trace)
    engine.run(inject)
    services = {}
    for svc in engine.services:
        services[svc.name] = ServiceResult(
            name=svc.name,
            latencies=np.frombuffer(svc.latencies, dtype=float).copy(),
            offered=svc.offered,
            delivered=svc.delivered,
            ru_counts=tuple(svc.ru_counts),
            payload_checked=svc.payload_checked,
            payload_mismatches=svc.payload_mismatches,
        )
    trace_out = None
    if trace:
        trace_out = {label: (link.enqueued, link.completed) for label, link in engine.links.items()}
    return SimResult(scenario.seed, services, utilisation, trace_out)

