"""
centralized dc optimal power flow

the same assembly routine builds the constraint block of a zone
sub-problem, so a single zone covering the whole network reproduces the
centralized problem term by term
"""

import logging
from dataclasses import dataclass

import numpy as np

from src.data.network import build_laplacian
from src.models.qp_solver import QpProblem, QpStatus, dual_objective, solve_qp
from src.utils.errors import InfeasibleProblemError, SolverError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DispatchBlock:
    """qp data over variables [p for gens, theta for columns]"""

    Q: np.ndarray
    q: np.ndarray
    A: np.ndarray
    b: np.ndarray
    G: np.ndarray
    h: np.ndarray
    gens: tuple
    columns: tuple

    @property
    def n_gens(self):
        return len(self.gens)

    def theta_slice(self):
        return slice(self.n_gens, self.n_gens + len(self.columns))

    def with_loads(self, loads):
        """same block with the balance rhs rebuilt for other loads"""
        loads = np.asarray(loads, dtype=float)
        b = self.b.copy()
        b[:loads.size] = -loads
        return DispatchBlock(self.Q, self.q, self.A, b, self.G, self.h, self.gens, self.columns)


def assemble_dispatch(rows, columns, laplacian_rows, lines, gens, loads, slack_bus=None):
    """
    balance rows for buses in rows, generator limits, two-sided line limits

    balance for bus n reads sum_m B_nm theta_m - p_n = -d_n; the first
    len(rows) equality rows are the balance rows in order
    """
    col_index = {bus: pos for pos, bus in enumerate(columns)}
    n_g, n_t = len(gens), len(columns)
    n = n_g + n_t

    Q = np.zeros((n, n))
    q = np.zeros(n)
    for k, gen in enumerate(gens):
        Q[k, k] = 2.0 * gen.c2
        q[k] = gen.c1

    row_index = {bus: pos for pos, bus in enumerate(rows)}
    balance = np.zeros((len(rows), n))
    balance[:, n_g:] = laplacian_rows
    for k, gen in enumerate(gens):
        balance[row_index[gen.bus], k] = -1.0
    eq_rows = [balance]
    eq_rhs = [-np.asarray(loads, dtype=float)]

    if slack_bus is not None:
        pin = np.zeros((1, n))
        pin[0, n_g + col_index[slack_bus]] = 1.0
        eq_rows.append(pin)
        eq_rhs.append(np.zeros(1))

    ineq_rows, ineq_rhs = [], []
    for k, gen in enumerate(gens):
        row = np.zeros(n)
        row[k] = 1.0
        if gen.p_min == gen.p_max:
            eq_rows.append(row[None, :])
            eq_rhs.append(np.array([gen.p_max]))
            continue
        ineq_rows += [row, -row]
        ineq_rhs += [gen.p_max, -gen.p_min]

    for line in lines:
        row = np.zeros(n)
        row[n_g + col_index[line.from_bus]] = line.susceptance
        row[n_g + col_index[line.to_bus]] = -line.susceptance
        ineq_rows += [row, -row]
        ineq_rhs += [line.capacity, line.capacity]

    G = np.array(ineq_rows) if ineq_rows else np.zeros((0, n))
    return DispatchBlock(
        Q=Q, q=q,
        A=np.vstack(eq_rows), b=np.concatenate(eq_rhs),
        G=G, h=np.array(ineq_rhs, dtype=float),
        gens=tuple(gens), columns=tuple(columns),
    )


@dataclass(frozen=True, eq=False)
class OpfSolution:
    p: np.ndarray
    theta: np.ndarray
    cost: float
    flows: np.ndarray
    prices: np.ndarray
    duality_gap: float = 0.0


def build_opf_problem(case):
    block = assemble_dispatch(
        rows=case.buses,
        columns=case.buses,
        laplacian_rows=build_laplacian(case),
        lines=case.lines,
        gens=case.gens,
        loads=case.loads,
        slack_bus=case.slack_bus,
    )
    return QpProblem(Q=block.Q, q=block.q, A=block.A, b=block.b, G=block.G, h=block.h)


def line_flows(case, theta):
    return np.array([
        line.susceptance * (theta[case.bus_index[line.from_bus]] - theta[case.bus_index[line.to_bus]])
        for line in case.lines
    ])


def dispatch_cost(gens, p):
    return float(sum(gen.cost(value) for gen, value in zip(gens, p)))


def solve_centralized(case, tolerances=None):
    """solve the whole network as one qp; the reference every run is judged against"""
    problem = build_opf_problem(case)
    solution = solve_qp(problem) if tolerances is None else solve_qp(problem, tolerances)
    if solution.status is QpStatus.INFEASIBLE:
        raise InfeasibleProblemError(
            f"no dispatch serves {case.loads.sum() * case.base_mva:.1f} MW of load")
    if solution.status is not QpStatus.OPTIMAL:
        raise SolverError(f"centralized opf stopped with status {solution.status.value}")

    n_g = len(case.gens)
    p = solution.x[:n_g]
    theta = solution.x[n_g:]
    cost = dispatch_cost(case.gens, p)
    gap = abs(solution.objective - dual_objective(problem, solution))
    logger.debug("centralized opf: cost %.6f after %d qp iterations", cost, solution.iterations)
    return OpfSolution(
        p=p,
        theta=theta,
        cost=cost,
        flows=line_flows(case, theta),
        prices=solution.lambda_eq[:case.n_buses].copy(),
        duality_gap=gap,
    )
