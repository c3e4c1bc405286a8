import re
from dataclasses import replace
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fronthaul.errors import ParseError, UnknownPresetError, ValidationError
from fronthaul.model import PathConfig, Strategy, StrategyParams
from fronthaul.scenario import (
    PRESETS,
    AllocationKind,
    CancellationMode,
    CoexistenceAllocation,
    Scenario,
    ServiceSpec,
    load,
    parse,
    preset,
    serialize,
)

DOC = """
[paths]
n = 10
capacity_mbps = 100

[[service]]
name = "eMBB"
arrival_per_ms = 8
frame_bytes = 1500
strategy = "MPC"
k = 2

[[service]]
name = "URLLC"
arrival_per_ms = 24
frame_bytes = 500
strategy = "mpd"

[allocation]
kind = "path-split"
path_counts = [2, 8]

[sim]
duration_s = 3
warmup_s = 0.25
seed = 99
cancellation = "no-cancel"
"""


def test_table1_shared_preset():
    s = preset("table1-shared")
    embb, urllc = s.services
    assert (embb.name, embb.frame_size, embb.arrival_rate) == ("eMBB", 12000, 8000.0)
    assert (urllc.name, urllc.frame_size, urllc.arrival_rate) == ("URLLC", 4000, 24000.0)
    assert s.paths == PathConfig(10, 1e8)
    assert s.allocation.kind is AllocationKind.SHARED


def test_split_presets():
    assert preset("table1-bw-split-1-5").allocation.bandwidth_fractions == (0.2, 0.8)
    alloc = preset("table1-path-split-2-8").allocation
    assert alloc.kind is AllocationKind.PATH_SPLIT
    assert alloc.path_counts == (2, 8)


@pytest.mark.parametrize("name,service", [("embb-only", "eMBB"), ("urllc-only", "URLLC")])
def test_single_service_presets(name, service):
    s = preset(name)
    assert [x.name for x in s.services] == [service]


def test_unknown_preset():
    with pytest.raises(UnknownPresetError):
        preset("nope")


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_round_trip(name):
    s = preset(name)
    assert parse(serialize(s)) == s


def test_parse_converts_units():
    s = parse(DOC)
    assert s.paths.capacity == 1e8
    assert s.services[0].frame_size == 12000
    assert s.services[0].arrival_rate == 8000.0
    assert s.services[1].strategy == StrategyParams.mpd()
    assert s.cancellation is CancellationMode.NO_CANCEL
    assert (s.sim_duration, s.warmup, s.seed) == (3.0, 0.25, 99)


def test_load_from_file(tmp_path):
    path = tmp_path / "s.toml"
    path.write_text(DOC)
    assert load(path) == parse(DOC)


def test_k_above_n():
    with pytest.raises(ValidationError) as err:
        parse(DOC.replace('kind = "path-split"\npath_counts = [2, 8]', 'kind = "shared"').replace("k = 2", "k = 11"))
    assert err.value.field == "service[0].k"


def test_k_checked_against_allocated_paths():
    # eMBB owns 2 paths under the split, so k = 3 is invalid there
    with pytest.raises(ValidationError) as err:
        parse(DOC.replace("k = 2", "k = 3"))
    assert err.value.field == "service[0].k"


def test_fraction_sum_above_one():
    doc = DOC.replace('kind = "path-split"\npath_counts = [2, 8]', 'kind = "bandwidth-split"\nfractions = [0.2, 0.9]')
    with pytest.raises(ValidationError) as err:
        parse(doc)
    assert err.value.field == "allocation.fractions"


def test_unknown_key_rejected():
    with pytest.raises(ValidationError) as err:
        parse(DOC.replace("seed = 99", "seed = 99\nsede = 1"))
    assert err.value.field == "sim.sede"


def test_unknown_section_rejected():
    with pytest.raises(ValidationError):
        parse(DOC + "\n[extra]\nx = 1\n")


def test_parse_error_carries_line():
    doc = DOC.replace("seed = 99", "seed = = 99")
    with pytest.raises(ParseError) as err:
        parse(doc)
    expected = doc.splitlines().index("seed = = 99") + 1
    assert err.value.line == expected
    assert str(err.value).startswith(f"line {expected}:")


def test_mpc_needs_k():
    with pytest.raises(ValidationError) as err:
        parse(DOC.replace("k = 2\n", ""))
    assert err.value.field == "service[0].k"


def test_k_forbidden_outside_mpc():
    with pytest.raises(ValidationError) as err:
        parse(DOC.replace('strategy = "mpd"', 'strategy = "SP"\nk = 1'))
    assert err.value.field == "service[1].k"


MUTANTS = [
    ("n", "0", "paths.n"),
    ("capacity_mbps", "-100.0", "paths.capacity_mbps"),
    ("arrival_per_ms", "-8.0", "service[0].arrival_per_ms"),
    ("frame_bytes", "0", "service[0].frame_bytes"),
    ("k", "11", "service[0].k"),
    ("k", "0", "service[0].k"),
    ("duration_s", "-1.0", "sim.duration_s"),
    ("duration_s", "0.1", "sim.duration_s"),
    ("warmup_s", "-0.5", "sim.warmup_s"),
    ("seed", "-1", "sim.seed"),
    ("replications", "0", "sim.replications"),
]


def _mutate(text, key, value):
    return re.sub(rf"^{key} = .*$", f"{key} = {value}", text, count=1, flags=re.M)


@pytest.mark.parametrize("name", sorted(PRESETS))
@pytest.mark.parametrize("key,value,field", MUTANTS)
def test_mutants_name_the_field(name, key, value, field):
    text = serialize(preset(name))
    with pytest.raises(ValidationError) as err:
        parse(_mutate(text, key, value))
    assert err.value.field == field


@pytest.mark.parametrize(
    "key,value,field",
    [("fractions", "[0.0, 0.8]", "allocation.fractions"), ("fractions", "[0.5, 0.8]", "allocation.fractions")],
)
def test_fraction_mutants(key, value, field):
    with pytest.raises(ValidationError) as err:
        parse(_mutate(serialize(preset("table1-bw-split-1-5")), key, value))
    assert err.value.field == field


def test_path_count_mutant():
    with pytest.raises(ValidationError) as err:
        parse(_mutate(serialize(preset("table1-path-split-2-8")), "path_counts", "[2, 9]"))
    assert err.value.field == "allocation.path_counts"


def test_digest_is_stable_and_sensitive():
    a = preset("table1-shared")
    assert a.digest() == preset("table1-shared").digest()
    assert a.digest() != replace(a, seed=2).digest()


def test_with_strategy():
    s = preset("table1-shared").with_strategy(StrategyParams.mpd(), names={"URLLC"})
    assert s.service("eMBB").strategy == StrategyParams.mpc(2)
    assert s.service("URLLC").strategy == StrategyParams.mpd()


# ---------------------------------------------------------------- round trip

@st.composite
def scenarios(draw):
    n = draw(st.integers(1, 12))
    capacity = draw(st.one_of(st.integers(1, 10_000).map(lambda m: m * 1e6), st.floats(1e3, 1e11)))
    count = draw(st.integers(1, 3))
    kind = draw(st.sampled_from(list(AllocationKind)))
    if kind is AllocationKind.PATH_SPLIT:
        n = max(n, count)
        cuts = sorted(draw(st.lists(st.integers(1, n - 1), min_size=count - 1, max_size=count - 1, unique=True))) if count > 1 else []
        bounds = [0, *cuts, n]
        counts = [b - a for a, b in zip(bounds, bounds[1:])]
        alloc = CoexistenceAllocation.path_split(*counts)
    elif kind is AllocationKind.BANDWIDTH_SPLIT:
        raw = draw(st.lists(st.floats(0.01, 1.0), min_size=count, max_size=count))
        total = sum(raw)
        alloc = CoexistenceAllocation.bandwidth_split(*(x / total * 0.999 for x in raw))
        counts = [n] * count
    else:
        alloc = CoexistenceAllocation.shared()
        counts = [n] * count
    services = []
    for i in range(count):
        kind_s = draw(st.sampled_from(list(Strategy)))
        strategy = StrategyParams.mpc(draw(st.integers(1, counts[i]))) if kind_s is Strategy.MPC else StrategyParams(kind_s)
        rate = draw(st.one_of(st.integers(0, 100).map(lambda r: r * 1000.0), st.floats(0.0, 1e6)))
        services.append(ServiceSpec(f"svc{i}", rate, 8 * draw(st.integers(1, 9000)), strategy))
    warmup = draw(st.floats(0.0, 5.0))
    return Scenario(
        PathConfig(n, capacity),
        tuple(services),
        alloc,
        draw(st.sampled_from(list(CancellationMode))),
        sim_duration=warmup + draw(st.floats(0.001, 100.0)),
        warmup=warmup,
        seed=draw(st.integers(0, 2**64 - 1)),
        replications=draw(st.integers(1, 5)),
        verify_payloads=draw(st.booleans()),
    )


@settings(max_examples=200, deadline=None)
@given(scenarios())
def test_parse_serialize_round_trip(scenario):
    assert parse(serialize(scenario)) == scenario


@pytest.mark.parametrize("path", sorted((Path(__file__).parent.parent / "scenarios").glob("*.toml")), ids=lambda p: p.name)
def test_example_files_parse_and_round_trip(path):
    scenario = load(path)
    assert parse(serialize(scenario)) == scenario
