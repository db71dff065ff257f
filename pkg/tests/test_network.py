import numpy as np
import pytest

from src.data.network import (
    Gen,
    Line,
    NetworkCase,
    ZonePartition,
    build_laplacian,
    build_zone_views,
    case_summary,
)
from src.utils.errors import CaseValidationError, PartitionError


def _views(case6):
    return {z.zone_id: z for z in case6[2]}


def test_ring_zone_sets(case6):
    views = _views(case6)
    assert views["A"].domestic == (1, 2, 6)
    assert views["A"].extended == (1, 2, 3, 5, 6)
    assert views["A"].boundary == (2, 3, 5, 6)
    assert views["B"].boundary == (2, 3, 4, 5)
    assert views["C"].boundary == (4, 5, 6)
    assert views["C"].extended == (4, 5, 6)


def test_slack_only_in_zones_that_see_it(case6):
    views = _views(case6)
    assert views["A"].slack_bus == 1
    assert views["B"].slack_bus is None
    assert views["C"].slack_bus is None


def test_every_boundary_bus_is_shared(bundled):
    _, _, zones = bundled
    for zone in zones:
        for bus in zone.boundary:
            owners = [z for z in zones if bus in z.extended]
            assert len(owners) >= 2


def test_laplacian_rows_match_full_matrix(case6):
    case, _, zones = case6
    B = build_laplacian(case)
    assert np.allclose(B, B.T)
    assert np.allclose(B.sum(axis=1), 0.0)
    for zone in zones:
        for r, bus in enumerate(zone.domestic):
            row = B[case.bus_index[bus]]
            expected = [row[case.bus_index[b]] for b in zone.extended]
            assert np.allclose(zone.local_laplacian_rows[r], expected)
            # domestic rows reach only buses of the extended set
            outside = [row[case.bus_index[b]] for b in case.buses if b not in zone.extended]
            assert np.allclose(outside, 0.0)


def test_zone_loads_and_gens(case6):
    views = _views(case6)
    assert views["B"].load_of(4) == pytest.approx(0.7)
    assert [g.bus for g in views["B"].local_gens] == [3]
    assert len(views["A"].local_lines) == 4


def test_partition_must_cover_case(case3):
    case = case3[0]
    with pytest.raises(PartitionError, match="without a zone"):
        build_zone_views(case, ZonePartition({1: "A", 2: "A"}))
    with pytest.raises(PartitionError, match="unknown buses"):
        build_zone_views(case, ZonePartition({1: "A", 2: "A", 3: "B", 9: "B"}))


def test_zone_without_generator_or_tie_line():
    case = NetworkCase(
        buses=(1, 2), base_mva=100.0, lines=(Line(1, 2, 10.0, 1.0),),
        gens=(Gen(1, 0.0, 1.0, 1.0, 0.0),), loads=[0.0, 0.5], slack_bus=1,
    )
    # bus 2 has no generator but a tie line, which is enough
    assert len(build_zone_views(case, ZonePartition({1: "A", 2: "B"}))) == 2

    isolated = NetworkCase(buses=(1,), base_mva=100.0, lines=(), gens=(), loads=[0.0], slack_bus=1)
    with pytest.raises(PartitionError, match="neither"):
        build_zone_views(isolated, ZonePartition({1: "A"}))


@pytest.mark.parametrize(
    "kwargs, location",
    [
        ({"base_mva": 0.0}, "base_mva"),
        ({"slack_bus": 7}, "slack_bus"),
        ({"loads": [0.0, -0.1, 0.3]}, "buses[1].load"),
        ({"lines": (Line(1, 2, 0.0, 1.0), Line(2, 3, 5.0, 1.0))}, "lines[0].susceptance_pu"),
        ({"lines": (Line(1, 2, 5.0, 1.0), Line(2, 9, 5.0, 1.0))}, "lines[1]"),
        ({"gens": (Gen(1, 2.0, 1.0, 1.0, 1.0),)}, "gens[0]"),
        ({"lines": (Line(1, 2, 5.0, 1.0),)}, "lines"),
    ],
)
def test_case_validation_locations(kwargs, location):
    fields = dict(
        buses=(1, 2, 3), base_mva=100.0,
        lines=(Line(1, 2, 5.0, 1.0), Line(2, 3, 5.0, 1.0)),
        gens=(Gen(1, 0.0, 3.0, 1.0, 1.0),), loads=[0.0, 0.4, 0.3], slack_bus=1,
    )
    fields.update(kwargs)
    with pytest.raises(CaseValidationError) as info:
        NetworkCase(**fields)
    assert info.value.location == location


def test_case_is_immutable(triangle_case):
    with pytest.raises(ValueError):
        triangle_case.loads[0] = 1.0
    changed = triangle_case.with_loads([0.0, 0.5, 0.3])
    assert changed != triangle_case
    assert changed == triangle_case.with_loads([0.0, 0.5, 0.3])
    assert triangle_case.load_at(2) == pytest.approx(0.4)


def test_case_summary(case6):
    case, _, zones = case6
    summary = case_summary(case, zones)
    assert summary["buses"] == 6
    assert summary["total_load_mw"] == pytest.approx(250.0)
    assert summary["zones"]["C"] == {"domestic": 1, "extended": 3, "boundary": 3}
