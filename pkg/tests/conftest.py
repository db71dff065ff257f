"""
shared fixtures: bundled cases, small hand-built networks and an
active-set enumeration oracle for the qp tests
"""

import itertools

import numpy as np
import pytest

from src.config.settings import BUNDLED_CASES
from src.data.loader import load_case, load_partition
from src.data.network import Gen, Line, NetworkCase, ZonePartition, build_zone_views


def _bundle(name):
    case_path, zones_path = BUNDLED_CASES[name]
    case = load_case(case_path)
    partition = load_partition(zones_path)
    return case, partition, tuple(build_zone_views(case, partition))


@pytest.fixture(scope="session")
def case2():
    return _bundle("case2")


@pytest.fixture(scope="session")
def case3():
    return _bundle("case3")


@pytest.fixture(scope="session")
def case6():
    return _bundle("case6_ring")


@pytest.fixture(scope="session", params=sorted(BUNDLED_CASES))
def bundled(request):
    return _bundle(request.param)


@pytest.fixture
def one_bus_case():
    return NetworkCase(
        buses=(1,), base_mva=100.0, lines=(),
        gens=(Gen(bus=1, p_min=0.0, p_max=2.0, c2=1.0, c1=0.0),),
        loads=[1.0], slack_bus=1,
    )


@pytest.fixture
def triangle_case():
    lines = (Line(1, 2, 5.0, 1.0), Line(2, 3, 5.0, 1.0), Line(3, 1, 5.0, 1.0))
    return NetworkCase(
        buses=(1, 2, 3), base_mva=100.0, lines=lines,
        gens=(Gen(1, 0.0, 3.0, 1.0, 1.0),),
        loads=[0.0, 0.4, 0.3], slack_bus=1,
    )


def single_zone(case):
    """partition putting every bus in one zone"""
    return ZonePartition({bus: "all" for bus in case.buses})


def active_set_oracle(Q, q, A, b, G, h, feas_tol=1e-9):
    """
    minimum of a strictly convex qp by trying every set of active
    inequalities, solving the kkt system of each and keeping the best
    feasible point
    """
    n = q.size
    best_x, best_obj = None, np.inf
    for size in range(min(G.shape[0], n - A.shape[0]) + 1):
        for active in itertools.combinations(range(G.shape[0]), size):
            E = np.vstack([A, G[list(active)]]) if active else A
            f = np.concatenate([b, h[list(active)]]) if active else b
            m = E.shape[0]
            kkt = np.block([[Q, E.T], [E, np.zeros((m, m))]])
            try:
                sol = np.linalg.solve(kkt, np.concatenate([-q, f]))
            except np.linalg.LinAlgError:
                continue
            x = sol[:n]
            if np.any(G @ x - h > feas_tol) or np.max(np.abs(A @ x - b), initial=0.0) > feas_tol:
                continue
            obj = 0.5 * x @ Q @ x + q @ x
            if obj < best_obj:
                best_x, best_obj = x, obj
    return best_x, best_obj


def random_qp(rng, n, m_eq, m_ineq):
    """strictly convex qp with a strictly feasible point"""
    M = rng.normal(size=(n, n))
    Q = M @ M.T + 0.5 * np.eye(n)
    q = rng.normal(size=n) * 3.0
    x0 = rng.normal(size=n)
    A = rng.normal(size=(m_eq, n))
    b = A @ x0
    G = rng.normal(size=(m_ineq, n))
    h = G @ x0 + rng.uniform(0.05, 1.0, size=m_ineq)
    return Q, q, A, b, G, h


@pytest.fixture
def qp_oracle():
    return active_set_oracle


@pytest.fixture
def make_random_qp():
    return random_qp


@pytest.fixture
def whole_network_zone():
    return single_zone
