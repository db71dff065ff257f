"""
network data model: buses, lines, generators, zones

every quantity stored here is already in per unit on the case's base
"""

import logging
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from src.utils.errors import CaseValidationError, PartitionError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    susceptance: float
    capacity: float


@dataclass(frozen=True)
class Gen:
    bus: int
    p_min: float
    p_max: float
    c2: float
    c1: float

    def cost(self, p):
        return self.c2 * p * p + self.c1 * p


@dataclass(frozen=True)
class NetworkCase:
    """a validated dc network; build through the loader or directly"""

    buses: tuple
    base_mva: float
    lines: tuple
    gens: tuple
    loads: np.ndarray
    slack_bus: int

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(int(b) for b in self.buses))
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "gens", tuple(self.gens))
        loads = np.array(self.loads, dtype=float).ravel()
        loads.flags.writeable = False
        object.__setattr__(self, "loads", loads)
        self._validate()

    def _validate(self):
        if not self.base_mva > 0:
            raise CaseValidationError(f"must be positive, got {self.base_mva}", "base_mva")
        if not self.buses:
            raise CaseValidationError("case has no buses", "buses")
        seen = set()
        for pos, bus in enumerate(self.buses):
            if bus in seen:
                raise CaseValidationError(f"duplicate bus id {bus}", f"buses[{pos}].id")
            seen.add(bus)
        if self.loads.size != len(self.buses):
            raise CaseValidationError(
                f"{self.loads.size} loads for {len(self.buses)} buses", "buses")
        for pos, load in enumerate(self.loads):
            if not np.isfinite(load) or load < 0:
                raise CaseValidationError(f"load must be >= 0, got {load}", f"buses[{pos}].load")
        if self.slack_bus not in seen:
            raise CaseValidationError(f"slack bus {self.slack_bus} is not a bus", "slack_bus")
        for pos, line in enumerate(self.lines):
            where = f"lines[{pos}]"
            for end in (line.from_bus, line.to_bus):
                if end not in seen:
                    raise CaseValidationError(f"unknown bus {end}", where)
            if line.from_bus == line.to_bus:
                raise CaseValidationError("line connects a bus to itself", where)
            if not line.susceptance > 0:
                raise CaseValidationError(
                    f"susceptance must be > 0, got {line.susceptance}", f"{where}.susceptance_pu")
            if not line.capacity > 0:
                raise CaseValidationError(
                    f"capacity must be > 0, got {line.capacity}", f"{where}.capacity")
        for pos, gen in enumerate(self.gens):
            where = f"gens[{pos}]"
            if gen.bus not in seen:
                raise CaseValidationError(f"unknown bus {gen.bus}", where)
            if gen.p_min > gen.p_max:
                raise CaseValidationError(f"pmin {gen.p_min} exceeds pmax {gen.p_max}", where)
            if gen.c2 < 0:
                raise CaseValidationError(f"c2 must be >= 0, got {gen.c2}", f"{where}.c2")
        if len(self.buses) > 1:
            n_parts, _ = connected_components(self._adjacency(), directed=False)
            if n_parts > 1:
                raise CaseValidationError(f"network splits into {n_parts} islands", "lines")

    def _adjacency(self):
        n = len(self.buses)
        rows = [self.bus_index[line.from_bus] for line in self.lines]
        cols = [self.bus_index[line.to_bus] for line in self.lines]
        return coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))

    @cached_property
    def bus_index(self):
        return {bus: pos for pos, bus in enumerate(self.buses)}

    @property
    def n_buses(self):
        return len(self.buses)

    def load_at(self, bus):
        return float(self.loads[self.bus_index[bus]])

    def with_loads(self, loads):
        """copy of the case with a different load vector"""
        return NetworkCase(self.buses, self.base_mva, self.lines, self.gens, loads, self.slack_bus)

    def __eq__(self, other):
        if not isinstance(other, NetworkCase):
            return NotImplemented
        return (
            self.buses == other.buses
            and self.base_mva == other.base_mva
            and self.lines == other.lines
            and self.gens == other.gens
            and np.array_equal(self.loads, other.loads)
            and self.slack_bus == other.slack_bus
        )

    __hash__ = None


@dataclass(frozen=True)
class ZonePartition:
    """bus id -> zone id"""

    assignment: dict

    @cached_property
    def zone_ids(self):
        return tuple(sorted(set(self.assignment.values()), key=str))

    def buses_of(self, zone_id):
        return tuple(sorted(b for b, z in self.assignment.items() if z == zone_id))

    def check_against(self, case):
        missing = [b for b in case.buses if b not in self.assignment]
        if missing:
            raise PartitionError(f"buses without a zone: {missing}", "zones")
        extra = [b for b in self.assignment if b not in case.bus_index]
        if extra:
            raise PartitionError(f"unknown buses in partition: {extra}", "zones")


@dataclass(frozen=True, eq=False)
class ZoneView:
    zone_id: str
    domestic: tuple
    extended: tuple
    boundary: tuple
    local_laplacian_rows: np.ndarray
    local_lines: tuple
    local_gens: tuple
    local_loads: np.ndarray
    slack_bus: int = None

    @cached_property
    def extended_index(self):
        return {bus: pos for pos, bus in enumerate(self.extended)}

    @cached_property
    def boundary_positions(self):
        """positions of the boundary buses inside the extended set"""
        return np.array([self.extended_index[b] for b in self.boundary], dtype=int)

    def load_of(self, bus):
        return float(self.local_loads[self.domestic.index(bus)])


def build_laplacian(case):
    """susceptance-weighted laplacian in the case's bus order"""
    n = case.n_buses
    B = np.zeros((n, n))
    for line in case.lines:
        i, j = case.bus_index[line.from_bus], case.bus_index[line.to_bus]
        B[i, i] += line.susceptance
        B[j, j] += line.susceptance
        B[i, j] -= line.susceptance
        B[j, i] -= line.susceptance
    return B


def build_zone_views(case, partition):
    """derive R_z, V_z and M_z for every zone of the partition"""
    partition.check_against(case)
    B = build_laplacian(case)
    neighbours = defaultdict(set)
    for line in case.lines:
        neighbours[line.from_bus].add(line.to_bus)
        neighbours[line.to_bus].add(line.from_bus)

    extended = {}
    for zone_id in partition.zone_ids:
        domestic = partition.buses_of(zone_id)
        if not domestic:
            raise PartitionError(f"zone {zone_id} has no buses", f"zones.{zone_id}")
        members = set(domestic)
        for bus in domestic:
            members |= neighbours[bus]
        extended[zone_id] = members

    views = []
    for zone_id in partition.zone_ids:
        domestic = partition.buses_of(zone_id)
        domestic_set = set(domestic)
        ext = tuple(sorted(extended[zone_id]))
        others = set().union(*(v for z, v in extended.items() if z != zone_id))
        boundary = tuple(b for b in ext if b in others)
        lines = tuple(
            line for line in case.lines
            if line.from_bus in domestic_set or line.to_bus in domestic_set
        )
        gens = tuple(g for g in case.gens if g.bus in domestic_set)
        has_tie = any(not {l.from_bus, l.to_bus} <= domestic_set for l in lines)
        if not gens and not has_tie:
            raise PartitionError(
                f"zone {zone_id} has neither a generator nor a tie line", f"zones.{zone_id}")
        rows = [case.bus_index[b] for b in domestic]
        cols = [case.bus_index[b] for b in ext]
        laplacian_rows = B[np.ix_(rows, cols)]
        laplacian_rows.flags.writeable = False
        loads = np.array([case.load_at(b) for b in domestic])
        loads.flags.writeable = False
        views.append(ZoneView(
            zone_id=zone_id,
            domestic=domestic,
            extended=ext,
            boundary=boundary,
            local_laplacian_rows=laplacian_rows,
            local_lines=lines,
            local_gens=gens,
            local_loads=loads,
            slack_bus=case.slack_bus if case.slack_bus in extended[zone_id] else None,
        ))
        logger.debug("zone %s: |R|=%d |V|=%d |M|=%d", zone_id, len(domestic), len(ext), len(boundary))
    return views


def case_summary(case, zones=()):
    """counts used for the log line every command prints"""
    summary = {
        "buses": case.n_buses,
        "lines": len(case.lines),
        "gens": len(case.gens),
        "total_load_mw": float(case.loads.sum() * case.base_mva),
        "zones": {},
    }
    for zone in zones:
        summary["zones"][zone.zone_id] = {
            "domestic": len(zone.domestic),
            "extended": len(zone.extended),
            "boundary": len(zone.boundary),
        }
    return summary
