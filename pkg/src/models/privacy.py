"""
laplace mechanism, sensitivity calibration and the noise plans fed to admm

a static plan draws one noise vector per zone before the first iteration
and reuses it; a dynamic plan recomputes the zone's local sensitivity every
iteration and draws fresh noise at that scale
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.optimize import linprog

from src.config.settings import (
    DEFAULT_ALPHA, DEFAULT_BUDGET, DEFAULT_EPSILON, DEFAULT_SEED, LOAD_CLAMP_MARGIN,
)
from src.data.network import build_zone_views
from src.models.admm import assemble_subproblem, run_admm
from src.models.qp_solver import DEFAULT_TOLERANCES, QpStatus, solve_qp, solve_qp_batch
from src.utils.errors import ConfigError, LocalSensitivityError

logger = logging.getLogger(__name__)

STATIC_STREAM = 0
DYNAMIC_STREAM = 1
CHECK_STREAM = 2


class SensitivityMode(str, Enum):
    GLOBAL_BOUND = "global"
    LOCAL_PER_ITERATION = "local"
    LOCAL_MAX_OVER_RUN = "local-max"


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float = DEFAULT_EPSILON
    alpha_frac: float = DEFAULT_ALPHA
    attack_budget: int = DEFAULT_BUDGET
    sensitivity_mode: SensitivityMode = SensitivityMode.LOCAL_PER_ITERATION
    seed: int = DEFAULT_SEED
    scale_composition: bool = False
    absolute_alpha: bool = False

    def __post_init__(self):
        object.__setattr__(self, "sensitivity_mode", SensitivityMode(self.sensitivity_mode))
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")
        if self.alpha_frac < 0 or (not self.absolute_alpha and self.alpha_frac > 1):
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha_frac}")
        if self.attack_budget < 1:
            raise ConfigError(f"attack budget must be >= 1, got {self.attack_budget}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")

    def alpha_for(self, load):
        """size of the adjacent change for one load"""
        return self.alpha_frac if self.absolute_alpha else self.alpha_frac * load


@dataclass(frozen=True)
class SensitivityReport:
    zone_id: str
    value: float
    argmax_bus: int = None
    sign: int = 0
    mode: SensitivityMode = SensitivityMode.LOCAL_PER_ITERATION
    iteration: int = None


def zone_rng(seed, stream, zone_index, k):
    """independent generator per (stream, zone, iteration)"""
    return np.random.default_rng([seed, stream, zone_index, k])


def sample_laplace(scale, dim, rng):
    if scale < 0:
        raise ConfigError(f"laplace scale must be >= 0, got {scale}")
    if scale == 0:
        return np.zeros(dim)
    return rng.laplace(loc=0.0, scale=scale, size=dim)


def global_sensitivity_bound(case, zone, ceiling=None):
    """largest load in the universe, system wide, in p.u."""
    universe = {bus: case.load_at(bus) for bus in case.buses}
    if ceiling:
        universe.update({bus: float(value) for bus, value in ceiling.items()})
    bus = max(universe, key=universe.get)
    return SensitivityReport(
        zone_id=zone.zone_id,
        value=max(0.0, universe[bus]),
        argmax_bus=bus,
        sign=1,
        mode=SensitivityMode.GLOBAL_BOUND,
    )


def _feasible_load_range(sub, pos):
    """
    lowest and highest load at domestic position pos for which the zone
    sub-problem keeps a feasible point, pulled in by LOAD_CLAMP_MARGIN;
    None when no load is feasible

    balance row pos reads a'x = -d, so d joins the lp as one more column
    """
    problem = sub.problem
    n = problem.n_vars
    A = np.hstack([problem.A, np.zeros((problem.n_eq, 1))])
    A[pos, n] = 1.0
    b = problem.b.copy()
    b[pos] = 0.0
    inequalities = {}
    if problem.n_ineq:
        inequalities = {"A_ub": np.hstack([problem.G, np.zeros((problem.n_ineq, 1))]), "b_ub": problem.h}
    bounds = [(None, None)] * n + [(0.0, None)]
    ends = []
    for direction in (1.0, -1.0):
        c = np.zeros(n + 1)
        c[n] = direction
        result = linprog(c=c, A_eq=A, b_eq=b, bounds=bounds, method="highs", **inequalities)
        if result.status == 3:
            ends.append(np.inf)
        elif result.status == 0:
            ends.append(float(result.x[n]))
        else:
            return None
    low, high = ends
    low += LOAD_CLAMP_MARGIN * (1.0 + low)
    if np.isfinite(high):
        high -= LOAD_CLAMP_MARGIN * (1.0 + high)
    return low, high


def local_sensitivity(zone, consensus, dual, rho, params, iteration=None,
                      max_workers=1, tolerances=DEFAULT_TOLERANCES):
    """
    largest L1 move of the boundary angles when one domestic load changes by
    its adjacency alpha, up or down

    a change the zone cannot serve is pulled back to the edge of its
    feasible load range and evaluated there; a candidate whose solve still
    does not reach OPTIMAL is skipped
    """
    base = assemble_subproblem(zone, consensus, dual, rho)
    base_sol = solve_qp(base.problem, tolerances)
    if base_sol.status is not QpStatus.OPTIMAL:
        raise LocalSensitivityError(
            f"zone {zone.zone_id} sub-problem at its own loads ended {base_sol.status.value}")
    reference = base.boundary_angles(base_sol.x)

    candidates = []
    for pos, bus in enumerate(zone.domestic):
        load = float(zone.local_loads[pos])
        step = params.alpha_for(load)
        for sign in (1, -1):
            moved = max(0.0, load + sign * step)
            if moved != load:
                candidates.append((pos, bus, sign, moved))

    best = SensitivityReport(zone_id=zone.zone_id, value=0.0, iteration=iteration)
    if not candidates:
        return best
    subs = [_moved_subproblem(zone, consensus, dual, rho, pos, moved) for pos, _, _, moved in candidates]
    solutions = solve_qp_batch([s.problem for s in subs], tolerances, max_workers)
    for (pos, bus, sign, moved), sub, sol in zip(candidates, subs, solutions):
        if sol.status is QpStatus.INFEASIBLE:
            sub, sol = _clamped_candidate(zone, consensus, dual, rho, base, pos, sign, moved, tolerances)
        if sol is None or sol.status is not QpStatus.OPTIMAL:
            logger.warning("zone %s: load change %+d at bus %d has no optimal solve, skipped",
                           zone.zone_id, sign, bus)
            continue
        displacement = float(np.abs(sub.boundary_angles(sol.x) - reference).sum())
        if displacement > best.value:
            best = SensitivityReport(
                zone_id=zone.zone_id, value=displacement, argmax_bus=bus, sign=sign, iteration=iteration,
            )
    logger.debug("zone %s iteration %s: delta %.3e at bus %s (%+d)",
                 zone.zone_id, iteration, best.value, best.argmax_bus, best.sign)
    return best


def _moved_subproblem(zone, consensus, dual, rho, pos, moved):
    loads = np.array(zone.local_loads, dtype=float)
    loads[pos] = moved
    return assemble_subproblem(zone, consensus, dual, rho, loads=loads)


def _clamped_candidate(zone, consensus, dual, rho, base, pos, sign, moved, tolerances):
    load_range = _feasible_load_range(base, pos)
    if load_range is None:
        return None, None
    low, high = load_range
    clamped = min(moved, high) if sign > 0 else max(moved, low)
    if clamped == float(zone.local_loads[pos]) or not low <= clamped <= high:
        return None, None
    logger.debug("zone %s: load at bus %d clamped from %.6f to %.6f",
                 zone.zone_id, zone.domestic[pos], moved, clamped)
    sub = _moved_subproblem(zone, consensus, dual, rho, pos, clamped)
    return sub, solve_qp(sub.problem, tolerances)


def make_dynamic_scale(delta, params):
    scale = delta / params.epsilon
    if params.scale_composition:
        scale *= params.attack_budget
    return scale


@dataclass
class StaticNoisePlan:
    """one laplace vector per zone, drawn up front and reused every iteration"""

    vectors: dict
    scales: dict
    seed: int

    def noise(self, zone, k, consensus, dual, rho):
        return self.vectors[zone.zone_id]


@dataclass
class DynamicNoisePlan:
    """
    fresh noise every iteration; scale from the zone's local sensitivity at
    the received consensus and duals, or from fixed_bounds when given
    """

    zone_ids: tuple
    params: PrivacyParams
    fixed_bounds: dict = None
    max_workers: int = 1
    reports: list = field(default_factory=list)
    scales: list = field(default_factory=list)

    def noise(self, zone, k, consensus, dual, rho):
        if self.fixed_bounds is not None:
            delta = float(self.fixed_bounds[zone.zone_id])
        else:
            report = local_sensitivity(zone, consensus, dual, rho, self.params,
                                       iteration=k, max_workers=self.max_workers)
            self.reports.append(report)
            delta = report.value
        scale = make_dynamic_scale(delta, self.params)
        self.scales.append((k, zone.zone_id, scale))
        rng = zone_rng(self.params.seed, DYNAMIC_STREAM, self.zone_ids.index(zone.zone_id), k)
        return sample_laplace(scale, len(zone.boundary), rng)


def _zone_bounds(case, zones, params, local_bounds, ceiling):
    mode = params.sensitivity_mode
    if mode is SensitivityMode.GLOBAL_BOUND:
        return {z.zone_id: global_sensitivity_bound(case, z, ceiling).value for z in zones}
    if mode is SensitivityMode.LOCAL_MAX_OVER_RUN:
        if local_bounds is None:
            raise ConfigError("local-max sensitivity needs the per-zone bounds of a previous run")
        missing = [z.zone_id for z in zones if z.zone_id not in local_bounds]
        if missing:
            raise ConfigError(f"no local bound for zones {missing}")
        return {z.zone_id: float(local_bounds[z.zone_id]) for z in zones}
    return None


def make_static_plan(case, zones, params, local_bounds=None, ceiling=None):
    """draw xi_z ~ Lap(bound_z / epsilon) once per zone"""
    bounds = _zone_bounds(case, zones, params, local_bounds, ceiling)
    if bounds is None:
        raise ConfigError("a static plan needs the global or local-max sensitivity mode")
    vectors, scales = {}, {}
    for index, zone in enumerate(zones):
        scale = bounds[zone.zone_id] / params.epsilon
        vector = sample_laplace(scale, len(zone.boundary), zone_rng(params.seed, STATIC_STREAM, index, 0))
        vector.flags.writeable = False
        vectors[zone.zone_id] = vector
        scales[zone.zone_id] = scale
    logger.info("static noise scales: %s", {z: round(s, 6) for z, s in scales.items()})
    return StaticNoisePlan(vectors=vectors, scales=scales, seed=params.seed)


def make_dynamic_plan(case, zones, params, local_bounds=None, ceiling=None, max_workers=1):
    bounds = _zone_bounds(case, zones, params, local_bounds, ceiling)
    return DynamicNoisePlan(
        zone_ids=tuple(z.zone_id for z in zones),
        params=params,
        fixed_bounds=bounds,
        max_workers=max_workers,
    )


def max_by_zone(reports):
    """largest recorded delta per zone"""
    bounds = {}
    for report in reports:
        bounds[report.zone_id] = max(bounds.get(report.zone_id, 0.0), report.value)
    return bounds


def local_bound_over_run(case, partition, admm_config, params, zones=None):
    """run dp-admm and keep max_k delta_z^k for every zone"""
    zones = tuple(zones) if zones is not None else tuple(build_zone_views(case, partition))
    plan = DynamicNoisePlan(
        zone_ids=tuple(z.zone_id for z in zones),
        params=replace(params, sensitivity_mode=SensitivityMode.LOCAL_PER_ITERATION),
        max_workers=admm_config.max_workers,
    )
    run_admm(case, partition, admm_config, perturbation=plan, zones=zones)
    bounds = max_by_zone(plan.reports)
    return {z.zone_id: bounds.get(z.zone_id, 0.0) for z in zones}


def zone_query(zone, consensus, dual, rho, tolerances=DEFAULT_TOLERANCES):
    """boundary angles of the zone sub-problem as a function of its domestic loads"""

    def query(loads):
        sub = assemble_subproblem(zone, consensus, dual, rho, loads=loads)
        sol = solve_qp(sub.problem, tolerances)
        if sol.status is not QpStatus.OPTIMAL:
            raise LocalSensitivityError(
                f"zone {zone.zone_id} sub-problem ended {sol.status.value} for queried loads")
        return sub.boundary_angles(sol.x)

    return query


@dataclass(frozen=True)
class DpCheckResult:
    max_log_ratio: float
    degenerate: bool
    bins_compared: int


def empirical_dp_check(query, loads, adjacent_loads, scale, trials, bins=20, seed=DEFAULT_SEED):
    """
    release query(loads) + Lap(scale) and query(adjacent_loads) + Lap(scale)
    `trials` times each and compare their histograms coordinate by coordinate

    bins are pooled quantiles between 1% and 99%, so the tails are cut off;
    the result is the largest |log(freq / freq')| over bins hit on either
    side; a bin hit on one side only makes it infinite
    """
    if trials < 1 or bins < 1:
        raise ConfigError("trials and bins must be positive")
    centre = np.asarray(query(loads), dtype=float)
    centre_adj = np.asarray(query(adjacent_loads), dtype=float)
    rng = np.random.default_rng([seed, CHECK_STREAM])
    released = centre + sample_laplace(scale, (trials, centre.size), rng)
    released_adj = centre_adj + sample_laplace(scale, (trials, centre.size), rng)

    worst, compared, degenerate = 0.0, 0, False
    for j in range(centre.size):
        pooled = np.concatenate([released[:, j], released_adj[:, j]])
        edges = np.unique(np.quantile(pooled, np.linspace(0.01, 0.99, bins + 1)))
        if edges.size < 2:
            degenerate = True
            if not np.isclose(centre[j], centre_adj[j]):
                worst = np.inf
            continue
        counts, _ = np.histogram(released[:, j], bins=edges)
        counts_adj, _ = np.histogram(released_adj[:, j], bins=edges)
        if np.count_nonzero(counts) <= 1 or np.count_nonzero(counts_adj) <= 1:
            degenerate = True
        hit = (counts > 0) | (counts_adj > 0)
        compared += int(hit.sum())
        if np.any(hit & ((counts == 0) | (counts_adj == 0))):
            worst = np.inf
            continue
        if np.any(hit):
            ratios = np.abs(np.log(counts[hit] / counts_adj[hit]))
            worst = max(worst, float(ratios.max()))
    if degenerate:
        logger.warning("empirical dp check: histogram mass collapsed into a single bin")
    return DpCheckResult(max_log_ratio=worst, degenerate=degenerate, bins_compared=compared)


class Algorithm(str, Enum):
    ADMM = "admm"
    SP_ADMM = "sp-admm"
    DP_ADMM = "dp-admm"


def make_plan(algorithm, case, zones, params, admm_config, local_bounds=None, ceiling=None):
    """noise plan for an algorithm; None for plain admm"""
    algorithm = Algorithm(algorithm)
    if algorithm is Algorithm.ADMM:
        return None
    if params.sensitivity_mode is SensitivityMode.LOCAL_MAX_OVER_RUN and local_bounds is None:
        local_bounds = local_bound_over_run(case, None, admm_config, params, zones=zones)
        logger.info("local bounds over a dp-admm run: %s",
                    {z: round(v, 6) for z, v in local_bounds.items()})
    if algorithm is Algorithm.SP_ADMM:
        return make_static_plan(case, zones, params, local_bounds=local_bounds, ceiling=ceiling)
    return make_dynamic_plan(case, zones, params, local_bounds=local_bounds, ceiling=ceiling,
                             max_workers=admm_config.max_workers)


def run_algorithm(algorithm, case, zones, admm_config, params, local_bounds=None, ceiling=None):
    """one seeded run of admm, sp-admm or dp-admm; returns the run and its plan"""
    zones = tuple(zones)
    plan = make_plan(algorithm, case, zones, params, admm_config, local_bounds, ceiling)
    run = run_admm(case, None, admm_config, perturbation=plan, zones=zones)
    return run, plan
