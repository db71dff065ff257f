import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.config.settings import CASE3_MATPOWER_PATH, UNBOUNDED_CAPACITY_PU
from src.data.loader import (
    load_case,
    load_partition,
    parse_case_json,
    parse_matpower,
    parse_zone_partition,
    serialize_case,
)
from src.data.network import Gen, Line, NetworkCase
from src.utils.errors import (
    CaseSchemaError,
    DataError,
    MatpowerFormatError,
    PartitionError,
    UnsupportedCostModelError,
)

MATPOWER_TEMPLATE = """
function mpc = tiny
mpc.baseMVA = 100;
mpc.bus = [
    1 3 0 0 0 0 1 1 0 230 1 1.1 0.9;
    2 1 40 0 0 0 1 1 0 230 1 1.1 0.9;
];
mpc.gen = [
    1 0 0 0 0 1 100 1 100 0;
    2 0 0 0 0 1 100 {gen2_status} 50 0;
];
mpc.branch = [
    1 2 0 {x} 0 {rate} 0 0 0 0 1 -360 360;
];
mpc.gencost = [
    2 0 0 3 0.01 2 0;
    {cost2}
];
"""


def _matpower(x="0.2", rate="0", gen2_status="1", cost2="2 0 0 2 3 0;"):
    return MATPOWER_TEMPLATE.format(x=x, rate=rate, gen2_status=gen2_status, cost2=cost2)


def test_case_json_is_converted_to_per_unit(case3):
    case = case3[0]
    assert case.base_mva == 100.0
    assert list(case.loads) == pytest.approx([0.0, 0.6, 0.9])
    assert case.lines[0].capacity == pytest.approx(1.5)
    assert case.gens[0].p_max == pytest.approx(2.0)
    assert case.gens[0].c2 == pytest.approx(1.0)
    assert case.gens[0].c1 == pytest.approx(10.0)


def test_matpower_version_of_case3_matches_json(case3):
    from_json = case3[0]
    from_m = load_case(CASE3_MATPOWER_PATH)
    assert from_m.buses == from_json.buses
    assert from_m.slack_bus == from_json.slack_bus
    assert list(from_m.loads) == pytest.approx(list(from_json.loads))
    for a, b in zip(from_m.lines, from_json.lines):
        assert a.susceptance == pytest.approx(b.susceptance)
        assert a.capacity == pytest.approx(b.capacity)
    for a, b in zip(from_m.gens, from_json.gens):
        assert (a.p_max, a.c2, a.c1) == pytest.approx((b.p_max, b.c2, b.c1))


def test_matpower_unrated_branch_and_linear_cost():
    case = parse_matpower(_matpower())
    assert case.lines[0].susceptance == pytest.approx(5.0)
    assert case.lines[0].capacity == UNBOUNDED_CAPACITY_PU
    assert case.gens[1].c2 == 0.0
    assert case.gens[1].c1 == pytest.approx(300.0)


def test_matpower_skips_offline_generators():
    case = parse_matpower(_matpower(gen2_status="0"))
    assert [g.bus for g in case.gens] == [1]


def test_matpower_rejects_piecewise_costs():
    with pytest.raises(UnsupportedCostModelError):
        parse_matpower(_matpower(cost2="1 0 0 2 0 0 50 100;"))


def test_matpower_rejects_zero_reactance():
    with pytest.raises(MatpowerFormatError, match="reactance"):
        parse_matpower(_matpower(x="0"))


def test_matpower_needs_base():
    with pytest.raises(MatpowerFormatError, match="baseMVA"):
        parse_matpower(_matpower().replace("mpc.baseMVA = 100;", ""))


@pytest.mark.parametrize(
    "mutate, location",
    [
        (lambda doc: doc["lines"][0].pop("susceptance_pu"), "lines[0]"),
        (lambda doc: doc["lines"][0].update(susceptance_pu="ten"), "lines[0].susceptance_pu"),
        (lambda doc: doc["buses"][1].update(id="2"), "buses[1].id"),
        (lambda doc: doc.pop("gens"), "gens"),
    ],
)
def test_case_json_schema_errors_carry_location(mutate, location):
    doc = json.loads((CASE3_MATPOWER_PATH.parent / "case3.json").read_text())
    mutate(doc)
    with pytest.raises(CaseSchemaError) as info:
        parse_case_json(json.dumps(doc))
    assert info.value.location == location


def test_invalid_json():
    with pytest.raises(CaseSchemaError, match="invalid json"):
        parse_case_json("{not json")


def test_serialize_round_trip(bundled):
    case = bundled[0]
    text = serialize_case(case)
    assert parse_case_json(text) == case
    assert '"load_mw": 0.0' in text


def test_serialized_mw_values_stay_readable(case3):
    doc = json.loads(serialize_case(case3[0]))
    assert [b["load_mw"] for b in doc["buses"]] == [0.0, 60.0, 90.0]
    assert doc["gens"][0]["c2_per_mw2"] == 0.0001


@settings(max_examples=200, deadline=None)
@given(
    base=st.sampled_from([100.0, 3.0, 7.0, 0.3]),
    values=st.lists(st.floats(1e-6, 1e4, allow_nan=False), min_size=7, max_size=7),
)
def test_serialize_round_trip_is_bit_exact(base, values):
    load, susceptance, capacity, p_min, headroom, c2, c1 = values
    case = NetworkCase(
        buses=[1, 2],
        base_mva=base,
        lines=[Line(1, 2, susceptance, capacity)],
        gens=[Gen(1, p_min, p_min + headroom, c2, c1)],
        loads=[0.0, load],
        slack_bus=1,
    )
    assert parse_case_json(serialize_case(case)) == case


def test_partition_parsing():
    partition = parse_zone_partition('{"zones": {"1": [1, 2], "north": [3]}}')
    assert partition.assignment == {1: "1", 2: "1", 3: "north"}
    assert partition.zone_ids == ("1", "north")


@pytest.mark.parametrize(
    "text, match",
    [
        ('{"zones": {"A": [1], "B": [1]}}', "already in zone"),
        ('{"zones": {"A": ["x"]}}', "integer"),
        ('{"zones": {}}', "non-empty"),
        ('{"zones": {"A": []}}', "non-empty list"),
    ],
)
def test_bad_partitions(text, match):
    with pytest.raises(PartitionError, match=match):
        parse_zone_partition(text)


def test_missing_files(tmp_path):
    with pytest.raises(DataError, match="file not found"):
        load_case(tmp_path / "nope.json")
    with pytest.raises(DataError, match="file not found"):
        load_partition(tmp_path / "nope_zones.json")
