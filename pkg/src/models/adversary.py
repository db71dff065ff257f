"""
worst-case load inference from captured coordination signals

the adversary sees the consensus and duals a zone received over T rounds
plus what it released, knows costs, topology, rho and every load but one,
and looks for the load that makes the zone answer the way it did
"""

import logging
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd
from scipy.linalg import block_diag
from scipy.optimize import minimize_scalar

from src.config.settings import (
    ATTACK_GRID_POINTS, ATTACK_XATOL, DEFAULT_UPSILON, UNBOUNDED_CAPACITY_PU,
)
from src.models.admm import assemble_subproblem
from src.models.privacy import Algorithm, run_algorithm
from src.models.qp_solver import DEFAULT_TOLERANCES, QpProblem, QpStatus, solve_qp
from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)

METHODS = ("response", "joint")


@dataclass(frozen=True, eq=False)
class AttackObservation:
    zone: object
    target_bus: int
    iterations: tuple
    consensus_in: tuple
    duals_in: tuple
    released: tuple
    rho: float
    upsilon: float = DEFAULT_UPSILON
    search_ceiling: float = None

    def __post_init__(self):
        lengths = {len(self.iterations), len(self.consensus_in), len(self.duals_in), len(self.released)}
        if len(lengths) != 1 or not self.iterations:
            raise ConfigError("observation sequences must be non-empty and of equal length")
        if self.target_bus not in self.zone.domestic:
            raise ConfigError(f"bus {self.target_bus} is not domestic to zone {self.zone.zone_id}")
        if self.upsilon < 0:
            raise ConfigError(f"upsilon must be >= 0, got {self.upsilon}")

    @property
    def budget(self):
        return len(self.iterations)

    @property
    def target_position(self):
        return self.zone.domestic.index(self.target_bus)

    def loads_with(self, target_load):
        """known domestic loads with the target replaced"""
        loads = np.array(self.zone.local_loads, dtype=float)
        loads[self.target_position] = target_load
        return loads

    def ceiling(self):
        if self.search_ceiling is not None:
            return float(self.search_ceiling)
        zone = self.zone
        supply = sum(g.p_max for g in zone.local_gens)
        domestic = set(zone.domestic)
        imports = sum(
            min(line.capacity, UNBOUNDED_CAPACITY_PU)
            for line in zone.local_lines
            if not {line.from_bus, line.to_bus} <= domestic
        )
        return supply + min(imports, UNBOUNDED_CAPACITY_PU)


@dataclass(frozen=True, eq=False)
class AttackResult:
    inferred_load: float
    objective: float
    angles: tuple
    status: QpStatus
    method: str = "response"


@dataclass(frozen=True, eq=False)
class AttackProblem:
    """
    joint qp over (p^t, theta^t for every observed round, shared load);
    qp.objective(x) + constant is the attack objective
    """

    qp: QpProblem
    constant: float
    block_size: int
    n_gens: int
    budget: int

    def load_index(self):
        return self.block_size * self.budget

    def block(self, x, t):
        return x[t * self.block_size:(t + 1) * self.block_size]


def observation_from_run(run, zone_id, target_bus, budget, end=None, upsilon=DEFAULT_UPSILON,
                         search_ceiling=None):
    """the last `budget` rounds of a finished run up to iteration `end`"""
    end = len(run.trace) if end is None else end
    if budget < 1 or end < budget or end > len(run.trace):
        raise ConfigError(f"cannot observe {budget} rounds ending at {end} of a {len(run.trace)}-round run")
    records = run.trace[end - budget:end]
    signals = [rec.zones[zone_id] for rec in records]
    return AttackObservation(
        zone=run.zone(zone_id),
        target_bus=target_bus,
        iterations=tuple(rec.iteration for rec in records),
        consensus_in=tuple(s.consensus_in for s in signals),
        duals_in=tuple(s.dual_in for s in signals),
        released=tuple(s.released for s in signals),
        rho=run.rho,
        upsilon=upsilon,
        search_ceiling=search_ceiling,
    )


def build_attack_problem(obs):
    """
    stack one sub-problem per observed round, share the unknown load as an
    extra column in the target's balance rows and pull the boundary angles
    towards what was released with weight upsilon
    """
    blocks, eq_rows, eq_rhs, ineq_rows, ineq_rhs, linear = [], [], [], [], [], []
    constant = 0.0
    n_gens = block_size = 0
    loads = obs.loads_with(0.0)
    for consensus, dual, released in zip(obs.consensus_in, obs.duals_in, obs.released):
        sub = assemble_subproblem(obs.zone, consensus, dual, obs.rho, loads=loads)
        Q = sub.problem.Q.copy()
        q = sub.problem.q.copy()
        idx = sub.boundary_index
        Q[idx, idx] += 2.0 * obs.upsilon
        q[idx] -= 2.0 * obs.upsilon * released
        constant += obs.upsilon * float(released @ released)
        blocks.append(Q)
        linear.append(q)
        eq_rows.append(sub.problem.A)
        eq_rhs.append(sub.problem.b)
        ineq_rows.append(sub.problem.G)
        ineq_rhs.append(sub.problem.h)
        n_gens, block_size = sub.n_gens, sub.problem.n_vars

    T = obs.budget
    n = T * block_size + 1
    Q = np.zeros((n, n))
    Q[:-1, :-1] = block_diag(*blocks)
    q = np.concatenate(linear + [np.zeros(1)])

    A = np.hstack([block_diag(*eq_rows), np.zeros((sum(a.shape[0] for a in eq_rows), 1))])
    offset = 0
    for a in eq_rows:
        # balance rows come first inside each block, in domestic order
        A[offset + obs.target_position, -1] = 1.0
        offset += a.shape[0]
    b = np.concatenate(eq_rhs)

    G = np.hstack([block_diag(*ineq_rows), np.zeros((sum(g.shape[0] for g in ineq_rows), 1))])
    nonneg = np.zeros((1, n))
    nonneg[0, -1] = -1.0
    G = np.vstack([G, nonneg])
    h = np.concatenate(ineq_rhs + [np.zeros(1)])

    return AttackProblem(
        qp=QpProblem(Q=Q, q=q, A=A, b=b, G=G, h=h),
        constant=constant,
        block_size=block_size,
        n_gens=n_gens,
        budget=T,
    )


def _response_angles(obs, target_load, tolerances):
    loads = obs.loads_with(target_load)
    angles = []
    for consensus, dual in zip(obs.consensus_in, obs.duals_in):
        sub = assemble_subproblem(obs.zone, consensus, dual, obs.rho, loads=loads)
        sol = solve_qp(sub.problem, tolerances)
        if sol.status is not QpStatus.OPTIMAL:
            return None
        angles.append(sub.boundary_angles(sol.x))
    return angles


def _mismatch(obs, target_load, tolerances):
    angles = _response_angles(obs, target_load, tolerances)
    if angles is None:
        return np.inf
    return float(sum(np.sum((a - r) ** 2) for a, r in zip(angles, obs.released)))


def _infer_by_response(obs, tolerances):
    grid = np.linspace(0.0, obs.ceiling(), ATTACK_GRID_POINTS)
    values = np.array([_mismatch(obs, d, tolerances) for d in grid])
    if not np.any(np.isfinite(values)):
        return AttackResult(np.nan, np.inf, (), QpStatus.INFEASIBLE, "response")
    best = int(np.argmin(values))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, grid.size - 1)]
    estimate, objective = float(grid[best]), float(values[best])
    if hi > lo:
        result = minimize_scalar(
            lambda d: _mismatch(obs, d, tolerances),
            bounds=(lo, hi), method="bounded", options={"xatol": ATTACK_XATOL},
        )
        if np.isfinite(result.fun) and result.fun <= objective:
            estimate, objective = float(result.x), float(result.fun)
    estimate = max(0.0, estimate)
    angles = tuple(_response_angles(obs, estimate, tolerances) or ())
    return AttackResult(estimate, objective, angles, QpStatus.OPTIMAL, "response")


def _infer_jointly(obs, tolerances):
    attack = build_attack_problem(obs)
    sol = solve_qp(attack.qp, tolerances)
    estimate = max(0.0, float(sol.x[attack.load_index()]))
    angles = tuple(
        attack.block(sol.x, t)[attack.n_gens:] for t in range(attack.budget)
    )
    return AttackResult(estimate, sol.objective + attack.constant, angles, sol.status, "joint")


def infer_load(obs, method="response", tolerances=DEFAULT_TOLERANCES):
    """
    estimate the target load

    "joint" solves the stacked attack qp; with a generator at the target bus
    the load and that generator's output are only identified through the
    cost, so "response" (a bounded scalar search over the load matching the
    released angles) is the default
    """
    if method not in METHODS:
        raise ConfigError(f"unknown attack method {method!r}, expected one of {METHODS}")
    result = _infer_by_response(obs, tolerances) if method == "response" else _infer_jointly(obs, tolerances)
    logger.debug("zone %s bus %d, T=%d: inferred %.6f p.u. (%s)",
                 obs.zone.zone_id, obs.target_bus, obs.budget, result.inferred_load, method)
    return result


def infer_across_iterations(run, zone_id, target_bus, budget, method="response",
                            upsilon=DEFAULT_UPSILON, search_ceiling=None):
    """slide a window of `budget` rounds over the run; one estimate per window end"""
    rows = []
    for end in range(budget, len(run.trace) + 1):
        obs = observation_from_run(run, zone_id, target_bus, budget, end=end,
                                   upsilon=upsilon, search_ceiling=search_ceiling)
        result = infer_load(obs, method=method)
        rows.append({"iter": end, "inferred_pu": result.inferred_load})
    return pd.DataFrame(rows, columns=["iter", "inferred_pu"])


def zone_of(zones, bus):
    for zone in zones:
        if bus in zone.domestic:
            return zone
    raise ConfigError(f"bus {bus} is not in any zone")


def system_capacity(case):
    """total installed generation, the attacker's search ceiling"""
    return float(sum(g.p_max for g in case.gens))


def attack_sweep(case, zones, algorithm, params, target_bus, budgets, alphas, runs,
                 admm_config, method="response", progress=None):
    """
    mean |inferred - true| in MW over `runs` seeded runs; rows alpha, columns T

    each observation is the final T rounds of a run. with composition
    scaling the noise depends on T, so every T gets its own runs
    """
    algorithm = Algorithm(algorithm)
    zones = tuple(zones)
    zone = zone_of(zones, target_bus)
    truth = case.load_at(target_bus)
    ceiling = system_capacity(case)
    per_budget = params.scale_composition and algorithm is not Algorithm.ADMM
    errors = pd.DataFrame(0.0, index=pd.Index(alphas, name="alpha"), columns=list(budgets))

    jobs = [(alpha, r) for alpha in alphas for r in range(runs)]
    for alpha, r in (progress(jobs) if progress else jobs):
        base = replace(params, alpha_frac=alpha, seed=params.seed + r)
        shared = None
        for T in budgets:
            if per_budget or shared is None:
                run_params = replace(base, attack_budget=T) if per_budget else base
                run, _ = run_algorithm(algorithm, case, zones, admm_config, run_params)
                shared = run
            run = shared
            budget = min(T, len(run.trace))
            if budget < T:
                logger.warning("run %d (alpha %s) stopped after %d rounds; column T=%d observes only those",
                               r, alpha, budget, T)
            obs = observation_from_run(run, zone.zone_id, target_bus, budget,
                                       search_ceiling=ceiling)
            inferred = infer_load(obs, method=method).inferred_load
            errors.loc[alpha, T] += abs(inferred - truth) * case.base_mva / runs
    return errors
