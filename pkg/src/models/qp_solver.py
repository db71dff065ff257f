"""
dense convex quadratic programming with a primal-dual interior point method

every optimization in the package (zone sub-problems, centralized opf,
local sensitivity, attack problems) ends up here. problems have the form

    minimize    0.5 x'Qx + q'x
    subject to  Ax  = b
                Gx <= h

and the kkt residuals reported for a solution use the sign convention
Qx + q + A'lambda + G'mu = 0 with mu >= 0.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.linalg import LinAlgError, lu_factor, lu_solve
from scipy.optimize import linprog

from src.config.settings import (
    QP_DIVERGENCE_LIMIT, QP_KKT_REGULARIZATION, QP_MAX_ITERS, QP_REFINEMENT_STEPS,
    QP_STEP_FRACTION, QP_TOL_COMP, QP_TOL_FEAS, QP_TOL_STAT, SYMMETRY_TOL,
)
from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)


class QpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITERATIONS = "max_iterations"


@dataclass(frozen=True)
class QpTolerances:
    feasibility: float = QP_TOL_FEAS
    stationarity: float = QP_TOL_STAT
    complementarity: float = QP_TOL_COMP
    max_iterations: int = QP_MAX_ITERS

    def __post_init__(self):
        if min(self.feasibility, self.stationarity, self.complementarity) <= 0:
            raise ConfigError("qp tolerances must be positive")
        if self.max_iterations < 1:
            raise ConfigError("qp iteration cap must be at least 1")


DEFAULT_TOLERANCES = QpTolerances()


def _frozen(array, shape=None):
    out = np.array(array, dtype=float, copy=True)
    if shape is not None:
        out = out.reshape(shape)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class QpProblem:
    """immutable qp data; missing constraint blocks become empty matrices"""

    Q: np.ndarray
    q: np.ndarray
    A: np.ndarray = None
    b: np.ndarray = None
    G: np.ndarray = None
    h: np.ndarray = None

    def __post_init__(self):
        q = _frozen(self.q).ravel()
        n = q.size
        Q = _frozen(self.Q, (n, n)) if np.size(self.Q) == n * n else None
        if Q is None:
            raise ConfigError(f"Q must be {n}x{n}, got shape {np.shape(self.Q)}")
        if n and np.max(np.abs(Q - Q.T)) > SYMMETRY_TOL:
            raise ConfigError("Q is not symmetric")
        A, b = self._block(self.A, self.b, n, "A", "b")
        G, h = self._block(self.G, self.h, n, "G", "h")
        for name, value in (("Q", Q), ("q", q), ("A", A), ("b", b), ("G", G), ("h", h)):
            object.__setattr__(self, name, value)

    @staticmethod
    def _block(matrix, rhs, n, matrix_name, rhs_name):
        if matrix is None or np.size(matrix) == 0:
            return _frozen(np.zeros((0, n))), _frozen(np.zeros(0))
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        rhs = np.asarray(rhs, dtype=float).ravel()
        if matrix.shape[1] != n:
            raise ConfigError(f"{matrix_name} has {matrix.shape[1]} columns, expected {n}")
        if rhs.size != matrix.shape[0]:
            raise ConfigError(f"{rhs_name} has {rhs.size} rows, expected {matrix.shape[0]}")
        return _frozen(matrix), _frozen(rhs)

    @property
    def n_vars(self):
        return self.q.size

    @property
    def n_eq(self):
        return self.b.size

    @property
    def n_ineq(self):
        return self.h.size

    def objective(self, x):
        return float(0.5 * x @ self.Q @ x + self.q @ x)


@dataclass(frozen=True, eq=False)
class QpSolution:
    x: np.ndarray
    lambda_eq: np.ndarray
    mu_ineq: np.ndarray
    objective: float
    status: QpStatus
    iterations: int = 0

    @property
    def is_optimal(self):
        return self.status is QpStatus.OPTIMAL


@dataclass(frozen=True)
class KktResiduals:
    primal_eq: float
    primal_ineq: float
    dual_feasibility: float
    stationarity: float
    complementarity: float


def kkt_residuals(problem, solution):
    """absolute kkt residuals of a solution"""
    x, lam, mu = solution.x, solution.lambda_eq, solution.mu_ineq
    slack = problem.G @ x - problem.h
    grad = problem.Q @ x + problem.q + problem.A.T @ lam + problem.G.T @ mu
    return KktResiduals(
        primal_eq=_inf_norm(problem.A @ x - problem.b),
        primal_ineq=float(max(0.0, slack.max())) if slack.size else 0.0,
        dual_feasibility=float(max(0.0, -mu.min())) if mu.size else 0.0,
        stationarity=_inf_norm(grad),
        complementarity=_inf_norm(mu * slack),
    )


def primal_violation(problem, x):
    """largest equality or inequality violation of a point"""
    eq = _inf_norm(problem.A @ x - problem.b)
    slack = problem.G @ x - problem.h
    ineq = float(max(0.0, slack.max())) if slack.size else 0.0
    return max(eq, ineq)


def dual_objective(problem, solution):
    """lagrange dual value -0.5 x'Qx - b'lambda - h'mu at the solution"""
    x = solution.x
    return float(
        -0.5 * x @ problem.Q @ x
        - problem.b @ solution.lambda_eq
        - problem.h @ solution.mu_ineq
    )


def _inf_norm(v):
    return float(np.max(np.abs(v))) if v.size else 0.0


def _meets_tolerances(problem, solution, tol):
    """absolute kkt check every OPTIMAL return has to pass"""
    res = kkt_residuals(problem, solution)
    return (
        res.primal_eq <= tol.feasibility
        and res.primal_ineq <= tol.feasibility
        and res.dual_feasibility <= tol.feasibility
        and res.stationarity <= tol.stationarity
        and res.complementarity <= tol.complementarity
    )


@dataclass
class _Scales:
    """data magnitudes; only used to decide when to try accepting an iterate"""

    stationarity: float
    equality: float
    inequality: np.ndarray = field(repr=False)

    @classmethod
    def of(cls, problem):
        q_scale = _inf_norm(problem.q)
        Q_scale = _inf_norm(problem.Q)
        return cls(
            stationarity=1.0 + max(q_scale, Q_scale),
            equality=1.0 + _inf_norm(problem.b),
            inequality=1.0 + np.abs(problem.h),
        )


def solve_qp(problem, tolerances=DEFAULT_TOLERANCES):
    """
    solve a convex qp with mehrotra's predictor-corrector method

    the result is deterministic for identical inputs. the solver never raises
    on bad problems; it reports INFEASIBLE (confirmed by a phase-one lp) or
    MAX_ITERATIONS instead. OPTIMAL means the absolute kkt residuals are
    within `tolerances`
    """
    if problem.n_ineq == 0:
        return _solve_equality_qp(problem, tolerances)
    return _InteriorPoint(problem, tolerances).run()


def solve_qp_batch(problems, tolerances=DEFAULT_TOLERANCES, max_workers=1):
    """solve independent qps, possibly in parallel; order is preserved"""
    problems = list(problems)
    if max_workers <= 1 or len(problems) <= 1:
        return [solve_qp(p, tolerances) for p in problems]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(lambda p: solve_qp(p, tolerances), problems))


def _solve_kkt(Q, q, C, d):
    """
    stationary point of 0.5 x'Qx + q'x subject to Cx = d

    the regularized system is solved first and then refined against the
    exact one
    """
    n, m = q.size, d.size
    reg = QP_KKT_REGULARIZATION
    exact = np.block([[Q, C.T], [C, np.zeros((m, m))]])
    kkt = exact + np.diag(np.concatenate([np.full(n, reg), np.full(m, -reg)]))
    rhs = np.concatenate([-q, d])
    with np.errstate(all="ignore"):
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        for _ in range(QP_REFINEMENT_STEPS):
            sol = sol + np.linalg.lstsq(kkt, rhs - exact @ sol, rcond=None)[0]
    return sol[:n], sol[n:]


def _solve_equality_qp(problem, tol):
    x, lam = _solve_kkt(problem.Q, problem.q, problem.A, problem.b)
    result = QpSolution(
        x=x, lambda_eq=lam, mu_ineq=np.zeros(0),
        objective=problem.objective(x), status=QpStatus.OPTIMAL, iterations=1,
    )
    if _meets_tolerances(problem, result, tol):
        return result
    res = kkt_residuals(problem, result)
    if res.primal_eq > tol.feasibility * _Scales.of(problem).equality:
        return _with_status(result, QpStatus.INFEASIBLE)
    # consistent equalities but no finite minimizer
    return _with_status(result, QpStatus.MAX_ITERATIONS)


def _with_status(solution, status):
    return QpSolution(
        x=solution.x, lambda_eq=solution.lambda_eq, mu_ineq=solution.mu_ineq,
        objective=solution.objective, status=status, iterations=solution.iterations,
    )


def _max_step(v, dv):
    negative = dv < 0
    if not np.any(negative):
        return 1.0
    return float(min(1.0, np.min(-v[negative] / dv[negative])))


def _finite(*arrays):
    return all(np.all(np.isfinite(a)) for a in arrays)


class _InteriorPoint:
    """one solve; keeps the iterate and the factorization helpers together"""

    def __init__(self, problem, tol):
        self.p = problem
        self.tol = tol
        self.scales = _Scales.of(problem)
        self.n, self.me, self.mi = problem.n_vars, problem.n_eq, problem.n_ineq

    def _initial_point(self):
        p = self.p
        H = p.Q + p.G.T @ p.G + QP_KKT_REGULARIZATION * np.eye(self.n)
        kkt = np.block([[H, p.A.T], [p.A, -QP_KKT_REGULARIZATION * np.eye(self.me)]])
        rhs = np.concatenate([-p.q + p.G.T @ p.h, p.b])
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        x = sol[:self.n]
        y = np.zeros(self.me)
        s = np.maximum(p.h - p.G @ x, 1.0)
        z = np.ones(self.mi)
        return x, y, s, z

    def _near_optimal(self, x, r_d, r_eq, s, z):
        p, tol, sc = self.p, self.tol, self.scales
        if _inf_norm(r_d) > tol.stationarity * sc.stationarity:
            return False
        if _inf_norm(r_eq) > tol.feasibility * sc.equality:
            return False
        violation = p.G @ x - p.h
        if np.any(violation > tol.feasibility * sc.inequality):
            return False
        comp_scale = 1.0 + abs(p.objective(x))
        return float(np.max(s * z)) <= tol.complementarity * comp_scale

    def _polish(self, s, z):
        """re-solve with the constraints the iterate treats as active held tight"""
        p = self.p
        active = z > s
        C = np.vstack([p.A, p.G[active]])
        d = np.concatenate([p.b, p.h[active]])
        x, lam = _solve_kkt(p.Q, p.q, C, d)
        mu = np.zeros(self.mi)
        mu[active] = lam[self.me:]
        if not _finite(x, lam) or (mu.size and mu.min() < -self.tol.feasibility):
            return None
        return x, lam[:self.me], np.maximum(mu, 0.0)

    def _accept(self, x, y, s, z, iteration):
        """the polished point or the iterate itself, if either meets the tolerances"""
        candidates = [self._polish(s, z), (x, y, z)]
        for candidate in candidates:
            if candidate is None:
                continue
            cx, cy, cz = candidate
            solution = QpSolution(
                x=cx, lambda_eq=cy, mu_ineq=cz, objective=self.p.objective(cx),
                status=QpStatus.OPTIMAL, iterations=iteration,
            )
            if _meets_tolerances(self.p, solution, self.tol):
                return solution
        return None

    def _newton(self, lu, s, z, r_d, r_eq, r_in, r_c):
        p = self.p
        rhs = np.concatenate([-r_d - p.G.T @ ((z * r_in - r_c) / s), -r_eq])
        sol = lu_solve(lu, rhs)
        dx, dy = sol[:self.n], sol[self.n:]
        ds = -r_in - p.G @ dx
        dz = (-r_c - z * ds) / s
        return dx, dy, ds, dz

    def run(self):
        p = self.p
        x, y, s, z = self._initial_point()
        iteration = 0
        with np.errstate(all="ignore"):
            for iteration in range(1, self.tol.max_iterations + 1):
                r_d = p.Q @ x + p.q + p.A.T @ y + p.G.T @ z
                r_eq = p.A @ x - p.b
                r_in = p.G @ x + s - p.h
                if self._near_optimal(x, r_d, r_eq, s, z):
                    solution = self._accept(x, y, s, z, iteration)
                    if solution is not None:
                        return solution
                if _inf_norm(z) > QP_DIVERGENCE_LIMIT * self.scales.stationarity:
                    logger.debug("qp duals diverged at iteration %d", iteration)
                    break
                step = self._step(x, y, s, z, r_d, r_eq, r_in)
                if step is None:
                    logger.debug("qp iteration %d produced no usable step", iteration)
                    break
                x, y, s, z = step

        status = QpStatus.INFEASIBLE if _phase_one_infeasible(p) else QpStatus.MAX_ITERATIONS
        return QpSolution(
            x=x, lambda_eq=y, mu_ineq=z, objective=p.objective(x),
            status=status, iterations=iteration,
        )

    def _step(self, x, y, s, z, r_d, r_eq, r_in):
        """one predictor-corrector step; None when it breaks down"""
        p, reg = self.p, QP_KKT_REGULARIZATION
        mu = float(s @ z) / self.mi
        H = p.Q + p.G.T @ ((z / s)[:, None] * p.G)
        kkt = np.block([
            [H + reg * np.eye(self.n), p.A.T],
            [p.A, -reg * np.eye(self.me)],
        ])
        try:
            lu = lu_factor(kkt, check_finite=True)

            # predictor
            dx, dy, ds, dz = self._newton(lu, s, z, r_d, r_eq, r_in, s * z)
            a_p, a_d = _max_step(s, ds), _max_step(z, dz)
            mu_aff = float((s + a_p * ds) @ (z + a_d * dz)) / self.mi
            sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0

            # corrector
            r_c = s * z + ds * dz - sigma * mu
            dx, dy, ds, dz = self._newton(lu, s, z, r_d, r_eq, r_in, r_c)
        except (LinAlgError, ValueError):
            return None
        step = min(1.0, QP_STEP_FRACTION * min(_max_step(s, ds), _max_step(z, dz)))
        if not step >= 1e-14:
            return None
        new = (x + step * dx, y + step * dy, s + step * ds, z + step * dz)
        if not _finite(*new):
            return None
        return new


def _phase_one_infeasible(problem):
    """lp feasibility check run only when the interior point method fails"""
    n = problem.n_vars
    result = linprog(
        c=np.zeros(n),
        A_ub=problem.G if problem.n_ineq else None,
        b_ub=problem.h if problem.n_ineq else None,
        A_eq=problem.A if problem.n_eq else None,
        b_eq=problem.b if problem.n_eq else None,
        bounds=[(None, None)] * n,
        method="highs",
    )
    return result.status == 2
