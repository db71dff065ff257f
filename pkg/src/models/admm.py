"""
consensus admm over zones

each iteration solves every zone sub-problem (independently, possibly in
parallel), releases the boundary angles with optional noise, averages them
into the consensus and moves the duals. noise is only ever added to what a
zone releases; the constrained solve never sees it
"""

import logging
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from src.config.settings import DEFAULT_MAX_ITERS, DEFAULT_RHO, DEFAULT_TOL, FEASIBILITY_TOL
from src.data.network import build_zone_views
from src.models.opf import assemble_dispatch, dispatch_cost
from src.models.qp_solver import (
    DEFAULT_TOLERANCES, QpProblem, QpStatus, primal_violation, solve_qp_batch,
)
from src.utils.errors import ConfigError, SubproblemAssemblyError, SubproblemInfeasibleError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdmmConfig:
    rho: float = DEFAULT_RHO
    max_iters: int = DEFAULT_MAX_ITERS
    tol: float = DEFAULT_TOL
    # bus -> starting consensus angle; zone id -> starting duals over its boundary
    initial_consensus: dict = None
    initial_duals: dict = None
    max_workers: int = 1

    def __post_init__(self):
        if not self.rho > 0:
            raise ConfigError(f"rho must be > 0, got {self.rho}")
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be > 0, got {self.tol}")
        if self.max_workers < 1:
            raise ConfigError(f"max_workers must be >= 1, got {self.max_workers}")


class Perturbation(Protocol):
    """noise source for released boundary angles"""

    def noise(self, zone, k, consensus, dual, rho):
        """noise vector over zone.boundary for iteration k"""
        ...


@dataclass(frozen=True, eq=False)
class ZoneSubproblem:
    zone: object
    problem: QpProblem
    n_gens: int
    boundary_index: np.ndarray

    def theta(self, x):
        return x[self.n_gens:]

    def dispatch(self, x):
        return x[:self.n_gens]

    def boundary_angles(self, x):
        return x[self.boundary_index]


def assemble_subproblem(zone, consensus, dual, rho, loads=None):
    """
    qp over (p, theta_z) for one zone

    the objective is c_z(p) - dual'theta_M + rho/2 |consensus - theta_M|^2
    where theta_M are the boundary entries of theta_z
    """
    if not zone.boundary and zone.slack_bus is None:
        raise SubproblemAssemblyError(f"zone {zone.zone_id} has no boundary and no slack bus")
    consensus = np.asarray(consensus, dtype=float)
    dual = np.asarray(dual, dtype=float)
    if consensus.shape != (len(zone.boundary),) or dual.shape != consensus.shape:
        raise SubproblemAssemblyError(
            f"zone {zone.zone_id}: consensus and dual must have {len(zone.boundary)} entries")

    block = assemble_dispatch(
        rows=zone.domestic,
        columns=zone.extended,
        laplacian_rows=zone.local_laplacian_rows,
        lines=zone.local_lines,
        gens=zone.local_gens,
        loads=zone.local_loads if loads is None else loads,
        slack_bus=zone.slack_bus,
    )
    idx = block.n_gens + zone.boundary_positions
    Q = block.Q.copy()
    q = block.q.copy()
    Q[idx, idx] += rho
    q[idx] += -rho * consensus - dual
    problem = QpProblem(Q=Q, q=q, A=block.A, b=block.b, G=block.G, h=block.h)
    return ZoneSubproblem(zone=zone, problem=problem, n_gens=block.n_gens, boundary_index=idx)


@dataclass(frozen=True)
class BoundaryLayout:
    """global ordering of all boundary buses and each zone's slots in it"""

    buses: tuple
    slots: dict

    @classmethod
    def from_boundaries(cls, boundaries):
        buses = tuple(sorted({b for members in boundaries.values() for b in members}))
        index = {bus: pos for pos, bus in enumerate(buses)}
        slots = {
            zone_id: np.array([index[b] for b in members], dtype=int)
            for zone_id, members in boundaries.items()
        }
        return cls(buses=buses, slots=slots)

    @classmethod
    def of(cls, zones):
        return cls.from_boundaries({z.zone_id: z.boundary for z in zones})

    def restrict(self, consensus, zone_id):
        return consensus[self.slots[zone_id]]


def consensus_update(layout, released, duals, rho):
    """closed form minimizer: mean of (released - dual / rho) over the zones sharing a bus"""
    total = np.zeros(len(layout.buses))
    count = np.zeros(len(layout.buses))
    for zone_id, slots in layout.slots.items():
        np.add.at(total, slots, np.asarray(released[zone_id]) - np.asarray(duals[zone_id]) / rho)
        np.add.at(count, slots, 1.0)
    return np.divide(total, count, out=np.zeros_like(total), where=count > 0)


def dual_update(dual, consensus, released, rho):
    return np.asarray(dual) + rho * (np.asarray(consensus) - np.asarray(released))


@dataclass(frozen=True, eq=False)
class ZoneSignal:
    """what one zone received and released in one iteration"""

    consensus_in: np.ndarray
    dual_in: np.ndarray
    released: np.ndarray
    theta: np.ndarray
    p: np.ndarray
    status: QpStatus
    violation: float


@dataclass(frozen=True, eq=False)
class IterationRecord:
    iteration: int
    residual: float
    cost_estimate: float
    max_violation: float
    zones: dict

    @property
    def statuses(self):
        return {zone_id: signal.status for zone_id, signal in self.zones.items()}


@dataclass
class AdmmState:
    layout: BoundaryLayout
    consensus: np.ndarray
    duals: dict
    iteration: int = 0
    theta: dict = field(default_factory=dict)
    released: dict = field(default_factory=dict)
    dispatch: dict = field(default_factory=dict)
    residuals: list = field(default_factory=list)
    converged: bool = False


@dataclass(frozen=True, eq=False)
class AdmmRun:
    state: AdmmState
    trace: tuple
    zones: tuple
    config: AdmmConfig

    @property
    def rho(self):
        return self.config.rho

    @property
    def iterations(self):
        return self.state.iteration

    @property
    def converged(self):
        return self.state.converged

    @property
    def final_cost(self):
        return self.trace[-1].cost_estimate if self.trace else float("nan")

    @property
    def residuals(self):
        return np.array(self.state.residuals)

    def zone(self, zone_id):
        for zone in self.zones:
            if zone.zone_id == zone_id:
                return zone
        raise KeyError(zone_id)


def _initial_state(zones, config):
    layout = BoundaryLayout.of(zones)
    consensus = np.zeros(len(layout.buses))
    if config.initial_consensus:
        for pos, bus in enumerate(layout.buses):
            consensus[pos] = float(config.initial_consensus.get(bus, 0.0))
    duals = {}
    for zone in zones:
        start = (config.initial_duals or {}).get(zone.zone_id)
        dual = np.zeros(len(zone.boundary)) if start is None else np.asarray(start, dtype=float)
        if dual.shape != (len(zone.boundary),):
            raise ConfigError(f"initial duals of zone {zone.zone_id} need {len(zone.boundary)} entries")
        duals[zone.zone_id] = dual
    return AdmmState(layout=layout, consensus=consensus, duals=duals)


def run_admm(case, partition, config, perturbation=None, zones=None, tolerances=DEFAULT_TOLERANCES):
    """
    run consensus admm until the primal residual reaches config.tol or
    config.max_iters iterations are done

    perturbation=None gives the non-private algorithm
    """
    zones = tuple(zones) if zones is not None else tuple(build_zone_views(case, partition))
    state = _initial_state(zones, config)
    layout, rho = state.layout, config.rho
    trace = []

    for k in range(1, config.max_iters + 1):
        inputs = {
            z.zone_id: (layout.restrict(state.consensus, z.zone_id), state.duals[z.zone_id])
            for z in zones
        }
        subs = [assemble_subproblem(z, *inputs[z.zone_id], rho) for z in zones]
        solutions = solve_qp_batch([s.problem for s in subs], tolerances, config.max_workers)

        released = {}
        signals = {}
        for zone, sub, sol in zip(zones, subs, solutions):
            if sol.status is QpStatus.INFEASIBLE:
                raise SubproblemInfeasibleError(f"zone {zone.zone_id} sub-problem infeasible at iteration {k}")
            if sol.status is QpStatus.MAX_ITERATIONS:
                logger.warning("zone %s sub-problem hit the qp iteration cap at iteration %d", zone.zone_id, k)
            angles = sub.boundary_angles(sol.x)
            if perturbation is not None:
                angles = angles + perturbation.noise(zone, k, *inputs[zone.zone_id], rho)
            released[zone.zone_id] = angles
            state.theta[zone.zone_id] = sub.theta(sol.x)
            state.dispatch[zone.zone_id] = sub.dispatch(sol.x)
            signals[zone.zone_id] = ZoneSignal(
                consensus_in=inputs[zone.zone_id][0],
                dual_in=inputs[zone.zone_id][1],
                released=angles,
                theta=state.theta[zone.zone_id],
                p=state.dispatch[zone.zone_id],
                status=sol.status,
                violation=primal_violation(sub.problem, sol.x),
            )

        consensus = consensus_update(layout, released, state.duals, rho)
        residual = 0.0
        for zone in zones:
            local = layout.restrict(consensus, zone.zone_id)
            residual += float(np.linalg.norm(released[zone.zone_id] - local))
            state.duals[zone.zone_id] = dual_update(state.duals[zone.zone_id], local, released[zone.zone_id], rho)

        state.consensus = consensus
        state.released = released
        state.iteration = k
        state.residuals.append(residual)
        cost = sum(dispatch_cost(z.local_gens, state.dispatch[z.zone_id]) for z in zones)
        trace.append(IterationRecord(
            iteration=k,
            residual=residual,
            cost_estimate=cost,
            max_violation=max((s.violation for s in signals.values()), default=0.0),
            zones=signals,
        ))
        if trace[-1].max_violation > FEASIBILITY_TOL:
            logger.warning("iteration %d: zone constraints violated by %.3e", k, trace[-1].max_violation)
        logger.debug("iteration %d: residual %.3e cost %.6f", k, residual, cost)

        if residual <= config.tol:
            state.converged = True
            break

    if not state.converged:
        logger.warning("admm stopped at K=%d with residual %.3e > %.3e",
                       config.max_iters, state.residuals[-1], config.tol)
    else:
        logger.info("admm converged in %d iterations", state.iteration)
    return AdmmRun(state=state, trace=tuple(trace), zones=zones, config=config)
