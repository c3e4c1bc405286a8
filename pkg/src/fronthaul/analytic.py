"""Closed-form latency and reliability models for SP, MPD and MPC transport.

Every path is an exponential server of ``c`` bits/s, so a block of ``b`` bits
needs an Exp(c/b) service time. The mean-latency results for MPD and MPC
assume that sibling copies/blocks are dropped the moment a frame completes,
which turns the path bundle into a single M/G/1 server whose service time is
an order statistic of ``n`` exponentials. With real (uncancelled) siblings
the values below are lower bounds.

The reliability functions treat a single isolated frame. The per-path success
probability keeps an arrival-rate term in its exponent; which rate to use
there is left to the caller (``effective_arrival_rate``).

All functions are pure.
"""

from __future__ import annotations

import math
from collections.abc import Callable

from .errors import DomainError, InstabilityError, NoSolutionError
from .model import (
    PathConfig,
    ServiceMoments,
    Strategy,
    StrategyParams,
    TrafficSpec,
)

# above this many paths binomial terms are evaluated in the log domain
LOG_DOMAIN_MIN_N = 51


def harmonic(n: int) -> float:
    """H_n = sum_{j=1..n} 1/j, with H_0 = 0."""
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    return math.fsum(1.0 / j for j in range(1, n + 1))


def harmonic2(n: int) -> float:
    """Second-order harmonic number sum_{j=1..n} 1/j^2, with value 0 at n = 0."""
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    return math.fsum(1.0 / (j * j) for j in range(1, n + 1))


def _service_rate(capacity: float, block_size: float) -> float:
    return capacity / block_size


def sp_mean_latency(traffic: TrafficSpec, paths: PathConfig) -> float:
    """M/M/1 sojourn time 1/(c/B - lambda) of the single path."""
    mu = _service_rate(paths.capacity, traffic.frame_size)
    if mu <= traffic.arrival_rate:
        raise InstabilityError(
            f"single path saturated: service rate {mu:g}/s <= arrival rate {traffic.arrival_rate:g}/s"
        )
    return 1.0 / (mu - traffic.arrival_rate)


def order_statistic_moments(n: int, k: int, per_block_rate: float) -> ServiceMoments:
    """Moments of the k-th smallest of n iid Exp(per_block_rate) variables.

    mean = (H_n - H_{n-k}) / mu and variance = (H2_n - H2_{n-k}) / mu^2. The
    harmonic differences are summed directly over j = n-k+1..n, so k = 1
    yields exactly 1/(n mu) and 1/(n mu)^2.
    """
    if k < 1 or k > n:
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")
    if not per_block_rate > 0:
        raise DomainError(f"per-block rate must be > 0, got {per_block_rate}")
    h1 = math.fsum(1.0 / j for j in range(n - k + 1, n + 1))
    h2 = math.fsum(1.0 / (j * j) for j in range(n - k + 1, n + 1))
    return ServiceMoments(mean=h1 / per_block_rate, variance=h2 / per_block_rate**2)


def pk_mean_latency(arrival_rate: float, moments: ServiceMoments) -> float:
    """Pollaczek-Khinchin mean sojourn time E[S] + lambda E[S^2] / (2 (1 - lambda E[S]))."""
    if arrival_rate < 0:
        raise DomainError(f"arrival rate must be >= 0, got {arrival_rate}")
    rho = arrival_rate * moments.mean
    if rho >= 1.0:
        raise InstabilityError(f"utilisation lambda*E[S] = {rho:.6g} >= 1")
    if arrival_rate == 0:
        return moments.mean
    return moments.mean + arrival_rate * moments.second_moment / (2.0 * (1.0 - rho))


def strategy_moments(traffic: TrafficSpec, paths: PathConfig, strategy: StrategyParams) -> ServiceMoments:
    """Effective service-time moments of one frame under ``strategy``."""
    strategy.check(paths.path_count)
    mu = _service_rate(paths.capacity, traffic.frame_size)
    if strategy.kind is Strategy.SP:
        return ServiceMoments(mean=1.0 / mu, variance=1.0 / mu**2)
    k = strategy.blocks_needed
    return order_statistic_moments(paths.path_count, k, k * mu)


def mean_latency(traffic: TrafficSpec, paths: PathConfig, strategy: StrategyParams) -> float:
    """Mean frame latency; exact for SP, a lower bound for MPD and MPC."""
    strategy.check(paths.path_count)
    if strategy.kind is Strategy.SP:
        return sp_mean_latency(traffic, paths)
    return pk_mean_latency(traffic.arrival_rate, strategy_moments(traffic, paths, strategy))


def _decay_rate(block_size: float, capacity: float, arrival_rate: float) -> float:
    if block_size <= 0:
        raise DomainError(f"block size must be > 0, got {block_size}")
    if arrival_rate < 0:
        raise DomainError(f"arrival rate must be >= 0, got {arrival_rate}")
    rate = capacity / block_size - arrival_rate
    if rate <= 0:
        raise InstabilityError(
            f"c/B = {capacity / block_size:g}/s does not exceed arrival rate {arrival_rate:g}/s"
        )
    return rate


def path_success_probability(deadline: float, block_size: float, capacity: float, arrival_rate: float) -> float:
    """F(t, B) = 1 - exp(-(c/B - lambda) t)."""
    if deadline < 0:
        raise DomainError(f"deadline must be >= 0, got {deadline}")
    return -math.expm1(-_decay_rate(block_size, capacity, arrival_rate) * deadline)


def _binomial_sum(n: int, lo: int, hi: int, p: float, log_p: float, log_q: float) -> float:
    """sum_{r=lo..hi} C(n,r) p^r (1-p)^(n-r), with log(1-p) supplied for precision."""
    if lo > hi:
        return 0.0
    if n < LOG_DOMAIN_MIN_N:
        q = math.exp(log_q)
        return math.fsum(math.comb(n, r) * p**r * q ** (n - r) for r in range(lo, hi + 1))
    terms = []
    log_nfact = math.lgamma(n + 1)
    for r in range(lo, hi + 1):
        if r > 0 and log_p == -math.inf:
            continue
        if r < n and log_q == -math.inf:
            continue
        log_term = log_nfact - math.lgamma(r + 1) - math.lgamma(n - r + 1)
        if r:
            log_term += r * log_p
        if n - r:
            log_term += (n - r) * log_q
        terms.append(math.exp(log_term))
    return math.fsum(terms)


def _per_block_terms(deadline, traffic, paths, strategy, effective_arrival_rate):
    """Return (n, k, F, log F, log(1-F)) for the blocks a strategy transmits."""
    if deadline < 0:
        raise DomainError(f"deadline must be >= 0, got {deadline}")
    strategy.check(paths.path_count)
    k = strategy.blocks_needed
    block = traffic.frame_size / k
    rate = _decay_rate(block, paths.capacity, effective_arrival_rate)
    log_q = -rate * deadline
    p = -math.expm1(log_q)
    log_p = math.log(p) if p > 0 else -math.inf
    n = 1 if strategy.kind is Strategy.SP else paths.path_count
    return n, k, p, log_p, log_q


def reliability(
    deadline: float,
    traffic: TrafficSpec,
    paths: PathConfig,
    strategy: StrategyParams,
    effective_arrival_rate: float,
) -> float:
    """Probability that an isolated frame is recovered within ``deadline`` seconds."""
    n, k, p, log_p, log_q = _per_block_terms(deadline, traffic, paths, strategy, effective_arrival_rate)
    if strategy.kind is Strategy.SP:
        return p
    if k == 1:
        # MPD, and MPC with k = 1 through the very same expression
        return -math.expm1(n * log_q)
    # complement the smaller tail so values near 1 stay monotone in t
    lower = _binomial_sum(n, 0, k - 1, p, log_p, log_q)
    if lower <= 0.5:
        return 1.0 - lower
    return _binomial_sum(n, k, n, p, log_p, log_q)


def error_probability(
    deadline: float,
    traffic: TrafficSpec,
    paths: PathConfig,
    strategy: StrategyParams,
    effective_arrival_rate: float,
) -> float:
    """1 - reliability, evaluated directly so that tiny error levels keep full precision."""
    n, k, p, log_p, log_q = _per_block_terms(deadline, traffic, paths, strategy, effective_arrival_rate)
    if strategy.kind is Strategy.SP:
        return math.exp(log_q)
    if k == 1:
        return math.exp(n * log_q)
    return _binomial_sum(n, 0, k - 1, p, log_p, log_q)


def _bisect_first(pred: Callable[[float], bool], lo: float, hi: float, atol: float, rtol: float) -> float:
    # invariant: pred(lo) is False, pred(hi) is True
    while hi - lo > min(atol, rtol * hi):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def latency_at_error(
    target_error: float,
    traffic: TrafficSpec,
    paths: PathConfig,
    strategy: StrategyParams,
    effective_arrival_rate: float,
    atol: float = 1e-9,
    rtol: float = 1e-10,
) -> float:
    """Smallest deadline whose error probability is at most ``target_error``.

    Found by doubling a bracket from the single-block time scale, then
    bisecting. The returned deadline always satisfies the target when
    re-evaluated.
    """
    if not 0.0 < target_error < 1.0:
        raise DomainError(f"target error must lie in (0, 1), got {target_error}")
    strategy.check(paths.path_count)
    block = traffic.frame_size / strategy.blocks_needed
    scale = 1.0 / _decay_rate(block, paths.capacity, effective_arrival_rate)

    def meets(t: float) -> bool:
        return error_probability(t, traffic, paths, strategy, effective_arrival_rate) <= target_error

    hi = scale
    for _ in range(1100):
        if meets(hi):
            break
        hi *= 2.0
    else:
        raise NoSolutionError(f"error probability never drops to {target_error:g}")
    return _bisect_first(meets, 0.0, hi, atol, rtol)


def split_factor_sweep(
    traffic: TrafficSpec, paths: PathConfig, arrival_rate: float | None = None
) -> list[tuple[int, float | None]]:
    """Mean latency under MPC(k) for k = 1..n; ``None`` marks unstable k."""
    rate = traffic.arrival_rate if arrival_rate is None else arrival_rate
    out = []
    for k in range(1, paths.path_count + 1):
        moments = strategy_moments(traffic, paths, StrategyParams.mpc(k))
        try:
            out.append((k, pk_mean_latency(rate, moments)))
        except InstabilityError:
            out.append((k, None))
    return out


def optimal_split_factor(
    traffic: TrafficSpec, paths: PathConfig, effective_arrival_rate: float | None = None
) -> int:
    """k in 1..n minimising the MPC mean latency; unstable k skipped, ties to the smaller k.

    ``effective_arrival_rate`` replaces the traffic's own rate as the load on
    the path bundle (e.g. an aggregate rate when services share paths).
    """
    best_k, best = None, math.inf
    for k, value in split_factor_sweep(traffic, paths, effective_arrival_rate):
        if value is not None and value < best:
            best_k, best = k, value
    if best_k is None:
        raise InstabilityError("no split factor k in 1..n gives a stable queue")
    return best_k
