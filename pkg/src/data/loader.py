"""
handles loading cases and zone partitions from native json and matpower text
"""

import json
import logging
import re
from decimal import Context, Decimal
from pathlib import Path

from src.config.settings import UNBOUNDED_CAPACITY_PU
from src.data.network import Gen, Line, NetworkCase, ZonePartition
from src.utils.errors import (
    CaseSchemaError, DataError, MatpowerFormatError, PartitionError, UnsupportedCostModelError,
)

logger = logging.getLogger(__name__)

_NUMBER = (int, float, Decimal)

# wide enough that the final rounding to float is the only one that shows
_WIDE = Context(prec=60)
_RAW = "\x00"


def _rescale(value, base, power):
    """value * base**power rounded to float once"""
    factor = _WIDE.power(Decimal(base), power)
    return float(_WIDE.multiply(Decimal(value), factor))


def _file_value(stored, base, power):
    """shortest decimal that _rescale(., base, power) maps back onto stored"""
    exact = _WIDE.multiply(Decimal(stored), _WIDE.power(Decimal(base), -power))
    for digits in range(1, 18):
        candidate = Context(prec=digits).plus(exact)
        if _rescale(candidate, base, power) == stored:
            return candidate
    return exact


def _number_text(value):
    value = value.normalize(_WIDE)
    if -7 <= value.adjusted() <= 15:
        text = format(value, "f")
        return text if "." in text else text + ".0"
    return format(value, "e")


def _field(record, name, kinds, where):
    if not isinstance(record, dict):
        raise CaseSchemaError("expected an object", where)
    if name not in record:
        raise CaseSchemaError(f"missing field '{name}'", where)
    value = record[name]
    if isinstance(value, bool) or not isinstance(value, kinds):
        expected = "integer" if kinds is int else "number"
        raise CaseSchemaError(f"expected {expected}, got {type(value).__name__}", f"{where}.{name}")
    return value


def _list(record, name):
    if not isinstance(record, dict) or name not in record:
        raise CaseSchemaError(f"missing field '{name}'", name)
    value = record[name]
    if not isinstance(value, list):
        raise CaseSchemaError(f"expected a list, got {type(value).__name__}", name)
    return value


def parse_case_json(text):
    """parse native case json; MW quantities become per unit"""
    try:
        raw = json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise CaseSchemaError(f"invalid json: {exc.msg}", f"line {exc.lineno}") from exc
    if not isinstance(raw, dict):
        raise CaseSchemaError("top level must be an object", "$")

    base = float(_field(raw, "base_mva", _NUMBER, "$"))
    slack = _field(raw, "slack_bus", int, "$")
    bus_rows = _list(raw, "buses")
    line_rows = _list(raw, "lines")
    gen_rows = _list(raw, "gens")
    if not base > 0:
        raise CaseSchemaError(f"must be positive, got {base}", "base_mva")

    buses, loads = [], []
    for pos, row in enumerate(bus_rows):
        where = f"buses[{pos}]"
        buses.append(_field(row, "id", int, where))
        loads.append(_rescale(_field(row, "load_mw", _NUMBER, where), base, -1))

    lines = []
    for pos, row in enumerate(line_rows):
        where = f"lines[{pos}]"
        lines.append(Line(
            from_bus=_field(row, "from", int, where),
            to_bus=_field(row, "to", int, where),
            susceptance=float(_field(row, "susceptance_pu", _NUMBER, where)),
            capacity=_rescale(_field(row, "capacity_mw", _NUMBER, where), base, -1),
        ))

    gens = []
    for pos, row in enumerate(gen_rows):
        where = f"gens[{pos}]"
        gens.append(Gen(
            bus=_field(row, "bus", int, where),
            p_min=_rescale(_field(row, "pmin_mw", _NUMBER, where), base, -1),
            p_max=_rescale(_field(row, "pmax_mw", _NUMBER, where), base, -1),
            c2=_rescale(_field(row, "c2_per_mw2", _NUMBER, where), base, 2),
            c1=_rescale(_field(row, "c1_per_mw", _NUMBER, where), base, 1),
        ))

    return NetworkCase(
        buses=buses, base_mva=base, lines=lines, gens=gens, loads=loads, slack_bus=slack,
    )


def serialize_case(case):
    """
    inverse of parse_case_json, field for field

    MW values are written as the shortest decimal that parses back onto the
    stored per unit float, so they go into the text unquoted and unrounded
    """
    base = case.base_mva

    def mw(stored, power):
        return _RAW + _number_text(_file_value(float(stored), base, power)) + _RAW

    doc = {
        "base_mva": base,
        "slack_bus": case.slack_bus,
        "buses": [
            {"id": bus, "load_mw": mw(load, -1)}
            for bus, load in zip(case.buses, case.loads)
        ],
        "lines": [
            {
                "from": line.from_bus,
                "to": line.to_bus,
                "susceptance_pu": float(line.susceptance),
                "capacity_mw": mw(line.capacity, -1),
            }
            for line in case.lines
        ],
        "gens": [
            {
                "bus": gen.bus,
                "pmin_mw": mw(gen.p_min, -1),
                "pmax_mw": mw(gen.p_max, -1),
                "c2_per_mw2": mw(gen.c2, 2),
                "c1_per_mw": mw(gen.c1, 1),
            }
            for gen in case.gens
        ],
    }
    text = json.dumps(doc, indent=2)
    return re.sub(r'"\\u0000([^"\\]+)\\u0000"', r"\1", text)


# matpower column positions (zero based)
BUS_I, BUS_TYPE, PD = 0, 1, 2
F_BUS, T_BUS, BR_X, RATE_A, BR_STATUS = 0, 1, 3, 5, 10
GEN_BUS, GEN_STATUS, PMAX, PMIN = 0, 7, 8, 9
COST_MODEL, NCOST, COST = 0, 3, 4
POLYNOMIAL = 2
SLACK_TYPE = 3

_COMMENT = re.compile(r"%.*$", re.MULTILINE)


def _matrix_text(text, name):
    match = re.search(rf"mpc\.{name}\s*=\s*\[(.*?)\]\s*;", text, re.DOTALL)
    if match is None:
        raise MatpowerFormatError(f"matrix mpc.{name} not found", f"mpc.{name}")
    return match.group(1)


def _matrix(text, name, min_cols):
    rows = []
    for raw in re.split(r"[;\n]", _matrix_text(text, name)):
        cells = raw.replace(",", " ").split()
        if not cells:
            continue
        where = f"mpc.{name} row {len(rows) + 1}"
        try:
            values = [float(c) for c in cells]
        except ValueError:
            raise MatpowerFormatError(f"non-numeric entry in {raw.strip()!r}", where) from None
        if len(values) < min_cols:
            raise MatpowerFormatError(f"expected at least {min_cols} columns, got {len(values)}", where)
        rows.append(values)
    return rows


def _polynomial_costs(row, where):
    if int(row[COST_MODEL]) != POLYNOMIAL:
        raise UnsupportedCostModelError(
            f"cost model {int(row[COST_MODEL])} is not polynomial", where)
    n = int(row[NCOST])
    coeffs = row[COST:COST + n]
    if len(coeffs) < n:
        raise MatpowerFormatError(f"NCOST={n} but {len(coeffs)} coefficients", where)
    # highest order first; pad to c2 c1 c0
    coeffs = [0.0] * max(0, 3 - n) + list(coeffs)
    higher, (c2, c1, _c0) = coeffs[:-3], coeffs[-3:]
    if any(c != 0 for c in higher):
        raise UnsupportedCostModelError("cost polynomial above second order", where)
    return c2, c1


def parse_matpower(text):
    """extract the dc columns of a matpower case; MW quantities become per unit"""
    text = _COMMENT.sub("", text)
    match = re.search(r"mpc\.baseMVA\s*=\s*([-+0-9.eE]+)\s*;", text)
    if match is None:
        raise MatpowerFormatError("mpc.baseMVA not found", "mpc.baseMVA")
    base = float(match.group(1))

    bus_rows = _matrix(text, "bus", PD + 1)
    branch_rows = _matrix(text, "branch", RATE_A + 1)
    gen_rows = _matrix(text, "gen", PMIN + 1)
    cost_rows = _matrix(text, "gencost", COST)
    if len(cost_rows) < len(gen_rows):
        raise MatpowerFormatError(
            f"{len(gen_rows)} generators but {len(cost_rows)} gencost rows", "mpc.gencost")

    buses = [int(row[BUS_I]) for row in bus_rows]
    loads = [_rescale(row[PD], base, -1) for row in bus_rows]
    slacks = [int(row[BUS_I]) for row in bus_rows if int(row[BUS_TYPE]) == SLACK_TYPE]
    if len(slacks) != 1:
        raise MatpowerFormatError(f"expected one reference bus, found {len(slacks)}", "mpc.bus")

    lines = []
    for pos, row in enumerate(branch_rows):
        if len(row) > BR_STATUS and row[BR_STATUS] <= 0:
            continue
        if row[BR_X] == 0:
            raise MatpowerFormatError("zero reactance", f"mpc.branch row {pos + 1}")
        rate = row[RATE_A]
        lines.append(Line(
            from_bus=int(row[F_BUS]),
            to_bus=int(row[T_BUS]),
            susceptance=1.0 / row[BR_X],
            capacity=_rescale(rate, base, -1) if rate > 0 else UNBOUNDED_CAPACITY_PU,
        ))

    gens = []
    for pos, (row, cost) in enumerate(zip(gen_rows, cost_rows)):
        c2, c1 = _polynomial_costs(cost, f"mpc.gencost row {pos + 1}")
        if row[GEN_STATUS] <= 0:
            continue
        gens.append(Gen(
            bus=int(row[GEN_BUS]),
            p_min=_rescale(row[PMIN], base, -1),
            p_max=_rescale(row[PMAX], base, -1),
            c2=_rescale(c2, base, 2),
            c1=_rescale(c1, base, 1),
        ))

    logger.debug("matpower: %d buses, %d branches, %d gens", len(buses), len(lines), len(gens))
    return NetworkCase(
        buses=buses, base_mva=base, lines=lines, gens=gens, loads=loads, slack_bus=slacks[0],
    )


def parse_zone_partition(text):
    """parse {"zones": {"<zone_id>": [bus ids]}}"""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PartitionError(f"invalid json: {exc.msg}", f"line {exc.lineno}") from exc
    zones = raw.get("zones") if isinstance(raw, dict) else None
    if not isinstance(zones, dict) or not zones:
        raise PartitionError("expected a non-empty 'zones' object", "zones")
    assignment = {}
    for zone_id, members in zones.items():
        where = f"zones.{zone_id}"
        if not isinstance(members, list) or not members:
            raise PartitionError("expected a non-empty list of bus ids", where)
        for bus in members:
            if isinstance(bus, bool) or not isinstance(bus, int):
                raise PartitionError(f"bus id must be an integer, got {bus!r}", where)
            if bus in assignment:
                raise PartitionError(f"bus {bus} already in zone {assignment[bus]}", where)
            assignment[bus] = str(zone_id)
    return ZonePartition(assignment)


def _read(path):
    path = Path(path)
    try:
        return path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataError("file not found", str(path)) from None
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read file: {exc}", str(path)) from exc


def load_case(path):
    """load a case file; .m files go through the matpower parser"""
    text = _read(path)
    case = parse_matpower(text) if Path(path).suffix.lower() == ".m" else parse_case_json(text)
    logger.info("loaded %s: %d buses, %d lines, %d gens",
                Path(path).name, case.n_buses, len(case.lines), len(case.gens))
    return case


def load_partition(path):
    return parse_zone_partition(_read(path))
