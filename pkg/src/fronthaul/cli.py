"""Command-line front end: analytic curves, simulations, sweeps and a codec self-check.

Every data command writes CSV with one comment line followed by the header

    sweep_var,sweep_value,service,metric,value,ci_low,ci_high,source

Rows come out in a fixed order (sweep point, then service order, then
metric order) whatever order the work finished in.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 runtime or
instability error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats as sps

from . import __version__, analytic, codec, sim
from .errors import ConfigError, DomainError, FronthaulError, InstabilityError
from .model import StrategyParams
from .scenario import (
    AllocationKind,
    CancellationMode,
    CoexistenceAllocation,
    PRESETS,
    Scenario,
    load,
    preset,
    serialize,
)
from .stats import wilson_interval

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2, 3

COLUMNS = ("sweep_var", "sweep_value", "service", "metric", "value", "ci_low", "ci_high", "source")
EMBB = "eMBB"

SWEEP_ALIASES = {
    "k": "split_factor_k",
    "split_factor_k": "split_factor_k",
    "embb_bandwidth_fraction": "embb_bandwidth_fraction",
    "fraction": "embb_bandwidth_fraction",
    "embb_path_count": "embb_path_count",
    "n_e": "embb_path_count",
    "deadline_t": "deadline_t",
    "t": "deadline_t",
}
_INTEGER_VARS = {"split_factor_k", "embb_path_count"}
LAMBDA_POLICIES = ("per-service", "aggregate", "zero")


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ sweeps

@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple

    @classmethod
    def parse(cls, text: str) -> SweepSpec:
        """``var=a,b,c``, ``var=start:stop`` (integers, inclusive) or ``var=start:stop:count``."""
        name, sep, body = text.partition("=")
        if not sep or not body:
            raise UsageError(f"sweep must look like VAR=VALUES, got {text!r}")
        variable = SWEEP_ALIASES.get(name.strip())
        if variable is None:
            raise UsageError(f"unknown sweep variable {name!r}; choose from {', '.join(sorted(set(SWEEP_ALIASES.values())))}")
        integer = variable in _INTEGER_VARS
        conv = int if integer else float
        try:
            if ":" in body:
                parts = body.split(":")
                if len(parts) == 2 and integer:
                    lo, hi = int(parts[0]), int(parts[1])
                    values = tuple(range(lo, hi + 1))
                elif len(parts) == 3:
                    lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
                    if count < 1:
                        raise UsageError("grid count must be >= 1")
                    grid = np.linspace(lo, hi, count)
                    if integer:
                        values = tuple(dict.fromkeys(int(round(v)) for v in grid))
                    else:
                        values = tuple(float(v) for v in grid)
                else:
                    raise UsageError(f"bad range {body!r}")
            else:
                values = tuple(conv(v) for v in body.split(","))
        except ValueError as exc:
            raise UsageError(f"bad sweep values {body!r}: {exc}") from None
        if not values:
            raise UsageError("sweep has no values")
        return cls(variable, values)


def _embb_index(scenario: Scenario) -> int:
    for i, svc in enumerate(scenario.services):
        if svc.name == EMBB:
            return i
    raise DomainError(f"sweep needs a service named {EMBB!r}")


def _split_rest(total, others: int):
    return [total / others] * others if others else []


def apply_point(scenario: Scenario, variable: str, value) -> Scenario:
    """The scenario at one sweep point (deadline sweeps leave it unchanged)."""
    if variable == "split_factor_k":
        return scenario.with_strategy(StrategyParams.mpc(int(value)))
    if variable == "embb_bandwidth_fraction":
        if not 0.0 < value <= 1.0:
            raise DomainError(f"eMBB bandwidth fraction must lie in (0, 1], got {value}")
        i = _embb_index(scenario)
        others = len(scenario.services) - 1
        fractions = _split_rest(1.0 - value, others)
        fractions.insert(i, float(value))
        return replace(scenario, allocation=CoexistenceAllocation.bandwidth_split(*fractions))
    if variable == "embb_path_count":
        n = scenario.paths.path_count
        i = _embb_index(scenario)
        others = len(scenario.services) - 1
        rest = n - int(value)
        if others == 0:
            counts = [int(value)]
        else:
            if rest % others:
                raise DomainError(f"{rest} remaining paths cannot be split evenly over {others} services")
            counts = [rest // others] * others
            counts.insert(i, int(value))
        return replace(scenario, allocation=CoexistenceAllocation.path_split(*counts))
    if variable == "deadline_t":
        if value < 0:
            raise DomainError(f"deadline must be >= 0, got {value}")
        return scenario
    raise UsageError(f"unknown sweep variable {variable!r}")


# ------------------------------------------------------------------ formatting

def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(value)


def deadline_metric(t: float) -> str:
    return f"error_prob_t={fmt(t)}"


def _row(sweep_var, sweep_value, service, metric, value, lo=None, hi=None, source="analytic"):
    return (sweep_var, "" if sweep_value is None else fmt(sweep_value), service, metric, fmt(value), fmt(lo), fmt(hi), source)


def write_csv(rows, out, scenario: Scenario, **meta) -> None:
    extras = "".join(f" {k}={v}" for k, v in meta.items())
    out.write(f"# fronthaul {__version__} scenario={scenario.digest()}{extras}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(COLUMNS)
    writer.writerows(rows)


# ------------------------------------------------------------------ analyze

def effective_rate(scenario: Scenario, name: str, policy: str) -> float:
    """The arrival rate used in the reliability exponent for one service."""
    if policy == "zero":
        return 0.0
    svc = scenario.service(name)
    if policy == "per-service":
        return svc.arrival_rate
    if policy == "aggregate":
        if scenario.allocation.kind is AllocationKind.SHARED:
            return math.fsum(s.arrival_rate for s in scenario.services)
        return svc.arrival_rate
    raise UsageError(f"unknown lambda-eff policy {policy!r}")


def _mean_latency(svc, config) -> float:
    if svc.arrival_rate == 0:
        return analytic.strategy_moments(sim._unit(svc), config, svc.strategy).mean
    try:
        return analytic.mean_latency(svc.traffic, config, svc.strategy)
    except InstabilityError:
        return math.inf


def analyze_point(scenario: Scenario, sweep_var: str, sweep_value, deadlines, policy: str, strict=False) -> list[tuple]:
    """Rows for one sweep point.

    A saturated queue gives an inf mean latency, or InstabilityError when
    ``strict``. Error probabilities whose exponent c/b - lambda_eff is not
    positive are undefined and reported as nan with a warning on stderr.
    """
    paths = sim.apply_allocation(scenario)
    rows = []
    for svc in scenario.services:
        config = paths[svc.name].config
        traffic = sim._unit(svc)
        lam = effective_rate(scenario, svc.name, policy)

        def err(t):
            try:
                return analytic.error_probability(t, traffic, config, svc.strategy, lam)
            except InstabilityError as exc:
                print(f"fronthaul: warning: {svc.name} error probability undefined: {exc}", file=sys.stderr)
                return math.nan

        if sweep_var == "deadline_t":
            rows.append(_row(sweep_var, sweep_value, svc.name, "error_probability", err(sweep_value)))
            continue
        latency = _mean_latency(svc, config)
        if strict and math.isinf(latency):
            raise InstabilityError(f"{svc.name}: offered load saturates its paths")
        rows.append(_row(sweep_var, sweep_value, svc.name, "mean_latency_s", latency))
        for t in deadlines:
            rows.append(_row(sweep_var, sweep_value, svc.name, deadline_metric(t), err(t)))
    return rows


def _points(scenario: Scenario, sweep: SweepSpec | None):
    if sweep is None:
        return [("none", None, scenario)]
    return [(sweep.variable, v, apply_point(scenario, sweep.variable, v)) for v in sweep.values]


def cmd_analyze(scenario: Scenario, sweep: SweepSpec | None, deadlines=(), policy: str = "per-service") -> list[tuple]:
    rows = []
    for var, value, point in _points(scenario, sweep):
        rows.extend(analyze_point(point, var, value, deadlines, policy, strict=sweep is None))
    return rows


# ------------------------------------------------------------------ simulate

def _t_interval(values, confidence=0.95):
    x = np.asarray(values, dtype=float)
    mean = float(x.mean())
    if x.size < 2:
        return mean, None, None
    half = float(sps.t.ppf(0.5 + confidence / 2, x.size - 1) * x.std(ddof=1) / math.sqrt(x.size))
    return mean, mean - half, mean + half


def _sim_service_rows(var, value, name, results, deadlines, prefix=""):
    rows = []
    per_rep = [r.services[name] for r in results]
    lat = [s.latencies for s in per_rep]
    delivered = sum(s.delivered for s in per_rep)
    offered = sum(s.offered for s in per_rep)
    if delivered == 0:
        rows.append(_row(var, value, name, prefix + "mean_latency_s", math.nan, source="sim"))
    elif len(per_rep) == 1:
        st = per_rep[0].summary()
        lo, hi = st.ci
        rows.append(_row(var, value, name, prefix + "mean_latency_s", st.mean, lo, hi, "sim"))
    else:
        means = [float(x.mean()) for x in lat if x.size]
        mean, lo, hi = _t_interval(means)
        rows.append(_row(var, value, name, prefix + "mean_latency_s", mean, lo, hi, "sim"))
    rows.append(_row(var, value, name, prefix + "offered", offered, source="sim"))
    rows.append(_row(var, value, name, prefix + "delivered", delivered, source="sim"))
    pooled = np.concatenate(lat) if lat else np.empty(0)
    trials = max(offered, delivered)
    ts = [value] if var == "deadline_t" else list(deadlines)
    for t in ts:
        metric = "error_probability" if var == "deadline_t" else deadline_metric(t)
        if trials == 0:
            rows.append(_row(var, value, name, prefix + metric, math.nan, source="sim"))
            continue
        ok = int(np.count_nonzero(pooled <= t))
        low, high = wilson_interval(ok, trials)
        rows.append(_row(var, value, name, prefix + metric, 1.0 - ok / trials, 1.0 - high, 1.0 - low, "sim"))
    return rows


def _run_one(point: Scenario):
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return sim.run(point)


def simulate_rows(var, value, point: Scenario, results, deadlines) -> list[tuple]:
    rows = []
    for svc in point.services:
        if results is None:
            rows.append(_row(var, value, svc.name, "mean_latency_s", math.inf, source="sim"))
            continue
        if len(results) > 1:
            for i, res in enumerate(results):
                rows.extend(_sim_service_rows(var, value, svc.name, [res], deadlines, prefix=f"rep{i}:"))
        rows.extend(_sim_service_rows(var, value, svc.name, results, deadlines))
    return rows


def cmd_simulate(scenario: Scenario, sweep: SweepSpec | None, deadlines=(), jobs: int = 1) -> list[tuple]:
    points = _points(scenario, sweep)
    tasks = []
    stable = []
    for _, _, point in points:
        ok = max(sim.utilisation_estimate(point).values(), default=0.0) < 1.0
        stable.append(ok)
        if not ok and sweep is None:
            raise InstabilityError("estimated path utilisation >= 1; the simulated queues would grow without bound")
        if ok:
            # seeds derive from the base seed plus the replication index
            tasks.extend(replace(point, seed=point.seed + r) for r in range(point.replications))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            done = list(pool.map(_run_one, tasks))
    else:
        done = [_run_one(t) for t in tasks]
    rows, cursor = [], 0
    for (var, value, point), ok in zip(points, stable):
        results = None
        if ok:
            results = done[cursor:cursor + point.replications]
            cursor += point.replications
        rows.extend(simulate_rows(var, value, point, results, deadlines))
    return rows


# ------------------------------------------------------------------ codec-check

def cmd_codec_check(n: int, k: int, trials: int, seed: int = 1, max_length: int = 2048) -> tuple[bool, str]:
    """Recover random frames from every k-subset of the n blocks."""
    geometry = codec.CodeGeometry(n, k)
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    engine = codec.codec_for(geometry)
    rng = np.random.default_rng(seed)
    subsets = list(itertools.combinations(range(n), k))
    failures = 0
    for trial in range(trials):
        length = int(rng.integers(1, max_length + 1))
        frame = rng.bytes(length)
        blocks = engine.encode(frame, frame_id=trial)
        for subset in subsets:
            if engine.decode([blocks[i] for i in subset]) != frame:
                failures += 1
    decodes = trials * len(subsets)
    verdict = "PASS" if failures == 0 else "FAIL"
    report = f"codec-check n={n} k={k} trials={trials} subsets={len(subsets)} decodes={decodes} failures={failures}: {verdict}"
    return failures == 0, report


# ------------------------------------------------------------------ argument handling

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _deadlines(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad deadline list {text!r}") from None
    if any(not (v >= 0 and math.isfinite(v)) for v in values):
        raise argparse.ArgumentTypeError("deadlines must be finite and >= 0")
    return values


def _u64(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _add_scenario_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", metavar="FILE", help="scenario TOML file")
    src.add_argument("--preset", choices=sorted(PRESETS), help="built-in scenario")
    p.add_argument("--strategy", help="override every service's strategy: SP, MPD or MPC:k")
    p.add_argument("--sweep", type=SweepSpec.parse, metavar="VAR=VALUES",
                   help="split_factor_k|embb_bandwidth_fraction|embb_path_count|deadline_t "
                        "with a,b,c or start:stop[:count]")
    p.add_argument("--deadlines", type=_deadlines, default=(), metavar="T1,T2,...",
                   help="deadlines in seconds at which to report error probability")
    p.add_argument("--out", metavar="PATH", help="write CSV here instead of standard output")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fronthaul", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fronthaul {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="closed-form latency and error probability")
    _add_scenario_args(a)
    a.add_argument("--lambda-eff", choices=LAMBDA_POLICIES, default="per-service",
                   help="arrival rate in the reliability exponent (default: per-service)")

    s = sub.add_parser("simulate", help="discrete-event simulation")
    _add_scenario_args(s)
    s.add_argument("--seed", type=_u64, help="base seed; replication r uses seed + r")
    s.add_argument("--replications", type=int)
    s.add_argument("--duration", type=float, help="simulated seconds")
    s.add_argument("--warmup", type=float, help="seconds excluded from statistics")
    s.add_argument("--cancellation", choices=[m.value for m in CancellationMode])
    s.add_argument("--jobs", type=int, default=1, help="worker processes (output order is unaffected)")

    c = sub.add_parser("codec-check", help="exhaustive any-k-of-n recovery check")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--trials", type=int, default=20)
    c.add_argument("--seed", type=_u64, default=1)

    show = sub.add_parser("show", help="print a scenario in file form")
    grp = show.add_mutually_exclusive_group(required=True)
    grp.add_argument("--scenario", metavar="FILE")
    grp.add_argument("--preset", choices=sorted(PRESETS))
    return parser


def _scenario(args) -> Scenario:
    if args.scenario:
        try:
            scenario = load(args.scenario)
        except OSError as exc:
            raise ConfigError(f"cannot read scenario: {exc}") from None
    else:
        scenario = preset(args.preset)
    if getattr(args, "strategy", None):
        try:
            strategy = StrategyParams.parse(args.strategy)
        except DomainError as exc:
            raise ConfigError(f"--strategy: {exc}") from None
        scenario = scenario.with_strategy(strategy)
    changes = {}
    for attr, key in (("seed", "seed"), ("replications", "replications"), ("duration", "sim_duration"),
                      ("warmup", "warmup"), ("cancellation", "cancellation")):
        value = getattr(args, attr, None)
        if value is not None:
            changes[key] = value
    return replace(scenario, **changes) if changes else scenario


def _emit(rows, args, scenario, **meta) -> None:
    buf = io.StringIO()
    write_csv(rows, buf, scenario, **meta)
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"fronthaul: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help, --version
        return int(exc.code or 0)

    try:
        if args.command == "codec-check":
            ok, report = cmd_codec_check(args.n, args.k, args.trials, args.seed)
            print(report)
            return EXIT_OK if ok else EXIT_RUNTIME
        scenario = _scenario(args)
        if args.command == "show":
            sys.stdout.write(serialize(scenario))
            return EXIT_OK
        if args.command == "analyze":
            rows = cmd_analyze(scenario, args.sweep, args.deadlines, args.lambda_eff)
            _emit(rows, args, scenario, command="analyze", lambda_eff=args.lambda_eff)
        else:
            if args.jobs < 1:
                raise UsageError("--jobs must be >= 1")
            rows = cmd_simulate(scenario, args.sweep, args.deadlines, args.jobs)
            _emit(rows, args, scenario, command="simulate", seed=scenario.seed,
                  replications=scenario.replications, cancellation=scenario.cancellation.value)
    except UsageError as exc:
        print(f"fronthaul: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, DomainError) as exc:
        print(f"fronthaul: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FronthaulError as exc:
        print(f"fronthaul: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"fronthaul: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
