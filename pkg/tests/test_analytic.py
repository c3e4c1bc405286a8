import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fronthaul import analytic
from fronthaul.errors import DomainError, InstabilityError, NoSolutionError
from fronthaul.model import PathConfig, ServiceMoments, StrategyParams, TrafficSpec

EMBB = TrafficSpec.from_table_units(8, 1500)
URLLC = TrafficSpec.from_table_units(24, 500)
PATHS = PathConfig(10, 1e8)
MU = 1e8 / 12000


# ---------------------------------------------------------------- oracles

def harmonic_exact(n, power=1):
    return float(sum(Fraction(1, j**power) for j in range(1, n + 1)))


def brute_force_reliability(n, k, p):
    """Sum the probability of every success/failure pattern with at least k successes."""
    total = 0.0
    for pattern in itertools.product((0, 1), repeat=n):
        r = sum(pattern)
        if r >= k:
            total += p**r * (1 - p) ** (n - r)
    return total


def pk_oracle(lam, mean, var):
    es2 = var + mean * mean
    return mean + lam * es2 / (2 * (1 - lam * mean))


# ---------------------------------------------------------------- harmonic numbers

@pytest.mark.parametrize("n,expected", [(0, 0.0), (1, 1.0), (4, 2.0833333333333335)])
def test_harmonic_examples(n, expected):
    assert analytic.harmonic(n) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("n,expected", [(0, 0.0), (1, 1.0), (2, 1.25), (3, 1.3611111111111112)])
def test_harmonic2_examples(n, expected):
    assert analytic.harmonic2(n) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("n", [5, 37, 250, 1000])
def test_harmonic_against_exact_rationals(n):
    assert analytic.harmonic(n) == pytest.approx(harmonic_exact(n), rel=1e-14)
    assert analytic.harmonic2(n) == pytest.approx(harmonic_exact(n, 2), rel=1e-14)


def test_harmonic_large_n_against_asymptotic():
    n = 10**6
    euler_gamma = 0.5772156649015329
    approx = math.log(n) + euler_gamma + 1 / (2 * n) - 1 / (12 * n**2)
    assert analytic.harmonic(n) == pytest.approx(approx, rel=1e-14)


def test_harmonic_telescoping():
    for n in range(1, 10**4 + 1):
        assert math.isclose(analytic.harmonic(n), analytic.harmonic(n - 1) + 1 / n, rel_tol=1e-12)
        assert math.isclose(analytic.harmonic2(n), analytic.harmonic2(n - 1) + 1 / n**2, rel_tol=1e-12)


def test_harmonic_rejects_negative():
    with pytest.raises(DomainError):
        analytic.harmonic(-1)


# ---------------------------------------------------------------- mean latency

def test_sp_mean_latency_table1():
    assert analytic.sp_mean_latency(EMBB, PATHS) == pytest.approx(1 / (MU - 8000), rel=1e-12)
    assert analytic.sp_mean_latency(EMBB, PATHS) == pytest.approx(3.0e-3, rel=1e-9)


def test_sp_mean_latency_low_load_is_service_time():
    tiny = TrafficSpec(1e-9, 12000)
    assert analytic.sp_mean_latency(tiny, PATHS) == pytest.approx(1.2e-4, rel=1e-9)


def test_sp_mean_latency_unstable():
    with pytest.raises(InstabilityError):
        analytic.sp_mean_latency(TrafficSpec(8400, 12000), PATHS)


@pytest.mark.parametrize(
    "n,k,mu,mean,var",
    [
        (10, 1, MU, 1.2e-5, 1.44e-10),
        (1, 1, 100.0, 0.01, 1e-4),
        (10, 2, 2 * MU, (1 / 9 + 1 / 10) / (2 * MU), (1 / 81 + 1 / 100) / (2 * MU) ** 2),
    ],
)
def test_order_statistic_examples(n, k, mu, mean, var):
    m = analytic.order_statistic_moments(n, k, mu)
    assert m.mean == pytest.approx(mean, rel=1e-12)
    assert m.variance == pytest.approx(var, rel=1e-12)
    assert m.second_moment == pytest.approx(var + mean * mean, rel=1e-12)


def test_order_statistic_example_rounded_value():
    m = analytic.order_statistic_moments(10, 2, 16666.67)
    assert m.mean == pytest.approx(1.2667e-5, rel=1e-4)


@pytest.mark.parametrize("n,k", [(10, 0), (3, 4), (0, 1)])
def test_order_statistic_domain(n, k):
    with pytest.raises(DomainError):
        analytic.order_statistic_moments(n, k, 1.0)


@pytest.mark.parametrize("n,k", [(10, 1), (10, 2), (10, 5), (10, 10), (3, 2)])
def test_order_statistic_monte_carlo(n, k):
    rng = np.random.default_rng(2024 + 31 * n + k)
    draws = np.partition(rng.exponential(1.0, size=(200_000, n)), k - 1, axis=1)[:, k - 1]
    m = analytic.order_statistic_moments(n, k, 1.0)
    assert draws.mean() == pytest.approx(m.mean, rel=0.01)
    assert draws.var() == pytest.approx(m.variance, rel=0.03)


def test_pk_zero_load_returns_mean_exactly():
    m = ServiceMoments(1.7e-5, 3e-11)
    assert analytic.pk_mean_latency(0.0, m) == m.mean


@pytest.mark.parametrize("k,expected", [(1, 1.3274e-5), (2, 1.3739e-5)])
def test_pk_table1_examples(k, expected):
    m = analytic.order_statistic_moments(10, k, k * MU)
    value = analytic.pk_mean_latency(8000, m)
    assert value == pytest.approx(pk_oracle(8000, m.mean, m.variance), rel=1e-12)
    assert value == pytest.approx(expected, rel=5e-4)


def test_pk_blows_up_near_saturation():
    m = ServiceMoments(1.0, 1.0)
    assert analytic.pk_mean_latency(0.999, m) > 100 * analytic.pk_mean_latency(0.5, m)
    with pytest.raises(InstabilityError):
        analytic.pk_mean_latency(1.0, m)


def test_mean_latency_strategies_table1():
    assert analytic.mean_latency(EMBB, PATHS, StrategyParams.mpd()) == pytest.approx(1.3274336e-5, rel=1e-7)
    assert analytic.mean_latency(EMBB, PATHS, StrategyParams.sp()) == pytest.approx(3.0e-3, rel=1e-9)


def test_mean_latency_rejects_k_above_n():
    with pytest.raises(DomainError):
        analytic.mean_latency(EMBB, PathConfig(3, 1e8), StrategyParams.mpc(4))


# ---------------------------------------------------------------- reliability

def test_path_success_examples():
    assert analytic.path_success_probability(0.0, 12000, 1e8, 8000) == 0.0
    assert analytic.path_success_probability(3e-3, 12000, 1e8, 8000) == pytest.approx(1 - math.exp(-1), rel=1e-9)
    with pytest.raises(InstabilityError):
        analytic.path_success_probability(1e-3, 12000, 1e8, 9000)


def test_mpd_with_half_success():
    # per-path F = 0.5 at t = ln 2 / (c/B - lambda)
    t = math.log(2) / (MU - 8000)
    value = analytic.reliability(t, EMBB, PATHS, StrategyParams.mpd(), 8000)
    assert value == pytest.approx(1 - 0.5**10, abs=1e-12)


def test_mpc_k_equals_n_is_product():
    t = 2e-5
    p = analytic.path_success_probability(t, 12000 / 10, 1e8, 8000)
    assert analytic.reliability(t, EMBB, PATHS, StrategyParams.mpc(10), 8000) == pytest.approx(p**10, rel=1e-12)


@pytest.mark.parametrize("n", range(1, 7))
def test_binomial_sum_matches_enumeration(n):
    rng = np.random.default_rng(n)
    for _ in range(100):
        c = float(rng.uniform(1e6, 1e9))
        frame = int(rng.integers(100, 20000))
        lam = float(rng.uniform(0, 0.5)) * c / frame
        t = float(rng.exponential(5 * frame / c))
        paths = PathConfig(n, c)
        traffic = TrafficSpec(max(lam, 1e-9), frame)
        for k in range(1, n + 1):
            p = analytic.path_success_probability(t, frame / k, c, lam)
            got = analytic.reliability(t, traffic, paths, StrategyParams.mpc(k), lam)
            assert abs(got - brute_force_reliability(n, k, p)) < 1e-12


def test_log_domain_sum_agrees_with_direct_sum():
    # n = 60 goes through the log-domain branch; compare with exact rationals
    n, k = 60, 17
    p = Fraction(3, 10)
    exact = sum(math.comb(n, r) * p**r * (1 - p) ** (n - r) for r in range(k, n + 1))
    got = analytic._binomial_sum(n, k, n, 0.3, math.log(0.3), math.log(0.7))
    assert got == pytest.approx(float(exact), rel=1e-12)


@pytest.mark.parametrize(
    "strategy", [StrategyParams.sp(), StrategyParams.mpd(), StrategyParams.mpc(2), StrategyParams.mpc(5), StrategyParams.mpc(10)]
)
def test_reliability_is_a_cdf(strategy):
    grid = np.linspace(0.0, 5e-3, 2001)
    values = [analytic.reliability(t, EMBB, PATHS, strategy, 8000) for t in grid]
    assert values[0] == 0.0
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert analytic.reliability(1.0, EMBB, PATHS, strategy, 8000) == pytest.approx(1.0, abs=1e-12)


def test_error_probability_complements_reliability():
    for t in (1e-6, 3e-5, 1e-4):
        for s in (StrategyParams.sp(), StrategyParams.mpd(), StrategyParams.mpc(4)):
            r = analytic.reliability(t, EMBB, PATHS, s, 8000)
            e = analytic.error_probability(t, EMBB, PATHS, s, 8000)
            assert r + e == pytest.approx(1.0, abs=1e-14)


def test_reliability_rejects_negative_deadline():
    with pytest.raises(DomainError):
        analytic.reliability(-1.0, EMBB, PATHS, StrategyParams.mpd(), 8000)


valid_draws = st.builds(
    lambda n, c, frame, load, t_scale: (n, c, frame, load * c / frame, t_scale * frame / c),
    st.integers(1, 64),
    st.floats(1e5, 1e10),
    st.integers(8, 100_000),
    st.floats(0.0, 0.9),
    st.floats(0.0, 50.0),
)


@settings(max_examples=300, deadline=None)
@given(valid_draws)
def test_mpc_one_is_mpd(draw):
    n, c, frame, lam, t = draw
    traffic, paths = TrafficSpec(max(lam, 1e-9), frame), PathConfig(n, c)
    for fn in (analytic.reliability, analytic.error_probability):
        a = fn(t, traffic, paths, StrategyParams.mpc(1), lam)
        b = fn(t, traffic, paths, StrategyParams.mpd(), lam)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-300)
    if lam * frame / c / n < 0.9:
        a = analytic.mean_latency(traffic, paths, StrategyParams.mpc(1))
        b = analytic.mean_latency(traffic, paths, StrategyParams.mpd())
        assert a == pytest.approx(b, rel=1e-12)


# ---------------------------------------------------------------- inversion

@pytest.mark.parametrize("eps", [0.5, 1e-2, 1e-5, 1e-9])
@pytest.mark.parametrize(
    "strategy", [StrategyParams.sp(), StrategyParams.mpd(), StrategyParams.mpc(2), StrategyParams.mpc(5)]
)
def test_latency_at_error_brackets_target(eps, strategy):
    t = analytic.latency_at_error(eps, EMBB, PATHS, strategy, 8000)
    assert analytic.reliability(t, EMBB, PATHS, strategy, 8000) >= 1 - eps - 1e-15
    assert analytic.error_probability(t, EMBB, PATHS, strategy, 8000) <= eps
    assert analytic.error_probability(t - 1e-8, EMBB, PATHS, strategy, 8000) > eps


def test_latency_at_error_sp_median():
    t = analytic.latency_at_error(0.5, EMBB, PathConfig(1, 1e8), StrategyParams.sp(), 8000)
    assert t == pytest.approx(math.log(2) / (MU - 8000), abs=1e-9)


def test_latency_at_error_mpd_closed_form():
    # MPD error is exp(-n (c/B - lam) t), so the inverse is explicit
    eps = 1e-5
    t = analytic.latency_at_error(eps, EMBB, PATHS, StrategyParams.mpd(), 8000)
    assert t == pytest.approx(-math.log(eps) / (10 * (MU - 8000)), abs=1e-9)


@pytest.mark.parametrize(
    "strategy,lam,expected",
    [
        (StrategyParams.mpc(5), 8000.0, 8.2378115e-5),
        (StrategyParams.mpd(), 8000.0, 3.4538776e-3),
        (StrategyParams.mpc(5), 0.0, 6.6561517e-5),
        (StrategyParams.mpd(), 0.0, 1.3815511e-4),
    ],
)
def test_latency_at_error_regression_values(strategy, lam, expected):
    assert analytic.latency_at_error(1e-5, EMBB, PATHS, strategy, lam) == pytest.approx(expected, rel=1e-5)


@pytest.mark.parametrize("eps", [0.0, 1.0, -0.1])
def test_latency_at_error_domain(eps):
    with pytest.raises(DomainError):
        analytic.latency_at_error(eps, EMBB, PATHS, StrategyParams.mpd(), 8000)


def test_latency_at_error_unstable():
    with pytest.raises(InstabilityError):
        analytic.latency_at_error(1e-3, EMBB, PATHS, StrategyParams.mpd(), 9000)


def test_no_solution_error_is_defined():
    assert issubclass(NoSolutionError, Exception)


# ---------------------------------------------------------------- optimal k

def _exhaustive_argmin(traffic, paths, lam):
    best = None
    for k in range(1, paths.path_count + 1):
        n = paths.path_count
        mu = k * paths.capacity / traffic.frame_size
        mean = (harmonic_exact(n) - harmonic_exact(n - k)) / mu
        var = (harmonic_exact(n, 2) - harmonic_exact(n - k, 2)) / mu**2
        if lam * mean >= 1:
            continue
        value = pk_oracle(lam, mean, var)
        if best is None or value < best[1]:
            best = (k, value)
    return best[0]


@pytest.mark.parametrize("traffic", [EMBB, URLLC])
@pytest.mark.parametrize("lam", [None, 0.0, 32000.0, 48000.0])
def test_optimal_split_factor_matches_exhaustive(traffic, lam):
    rate = traffic.arrival_rate if lam is None else lam
    assert analytic.optimal_split_factor(traffic, PATHS, lam) == _exhaustive_argmin(traffic, PATHS, rate)


def test_optimal_split_factor_zero_load_is_one():
    # E[S] = (H_n - H_{n-k}) B / (k c) grows with k, so the smallest k wins at zero load
    means = [analytic.order_statistic_moments(10, k, k * MU).mean for k in range(1, 11)]
    assert means == sorted(means)
    assert analytic.optimal_split_factor(EMBB, PATHS, 0.0) == 1


def test_optimal_split_factor_single_feasible_point():
    # only k=1 is stable at this load
    lam = 0.5 * (1 / analytic.order_statistic_moments(10, 1, MU).mean + 1 / analytic.order_statistic_moments(10, 2, 2 * MU).mean)
    sweep = analytic.split_factor_sweep(EMBB, PATHS, lam)
    assert [k for k, v in sweep if v is not None] == [1]
    assert analytic.optimal_split_factor(EMBB, PATHS, lam) == 1


def test_optimal_split_factor_all_unstable():
    with pytest.raises(InstabilityError):
        analytic.optimal_split_factor(EMBB, PATHS, 1e7)


def test_optimal_split_factor_tie_goes_to_smaller_k():
    # n = 1 leaves a single candidate; n = 2 at zero load: k=1 mean 1/(2mu), k=2 mean 1.5/(2mu)
    assert analytic.optimal_split_factor(EMBB, PathConfig(1, 1e8), 0.0) == 1
    assert analytic.optimal_split_factor(EMBB, PathConfig(2, 1e8), 0.0) == 1
