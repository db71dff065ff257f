"""
app configuration and constants
"""

import os
from pathlib import Path

# bundled data
PROJECT_ROOT = Path(__file__).resolve().parents[2]
CASES_DIR = PROJECT_ROOT / "data" / "cases"
CASE2_PATH = CASES_DIR / "case2.json"
CASE2_ZONES_PATH = CASES_DIR / "case2_zones.json"
CASE3_PATH = CASES_DIR / "case3.json"
CASE3_ZONES_PATH = CASES_DIR / "case3_zones.json"
CASE6_PATH = CASES_DIR / "case6_ring.json"
CASE6_ZONES_PATH = CASES_DIR / "case6_ring_zones.json"
CASE3_MATPOWER_PATH = CASES_DIR / "case3.m"

BUNDLED_CASES = {
    "case2": (CASE2_PATH, CASE2_ZONES_PATH),
    "case3": (CASE3_PATH, CASE3_ZONES_PATH),
    "case6_ring": (CASE6_PATH, CASE6_ZONES_PATH),
}

# admm defaults (experiment section of the study)
DEFAULT_RHO = 100.0
DEFAULT_MAX_ITERS = 300
DEFAULT_TOL = 0.5

# privacy defaults
DEFAULT_EPSILON = 1.0
DEFAULT_ALPHA = 0.01
ALPHA_SWEEP = (0.01, 0.025, 0.05, 0.07, 0.10)
DEFAULT_BUDGET = 1

# adversary defaults
DEFAULT_UPSILON = 1e6
ATTACK_GRID_POINTS = 17
ATTACK_XATOL = 1e-9

# harness defaults
DEFAULT_RUNS = 1
DEFAULT_SEED = 42
DEFAULT_OUTPUT_DIR = Path("results")

# network conventions
UNBOUNDED_CAPACITY_PU = 1e6
SYMMETRY_TOL = 1e-9

# qp solver
QP_TOL_FEAS = 1e-8
QP_TOL_STAT = 1e-8
QP_TOL_COMP = 1e-8
QP_MAX_ITERS = 100
QP_KKT_REGULARIZATION = 1e-10
QP_STEP_FRACTION = 0.995
QP_DIVERGENCE_LIMIT = 1e12
QP_REFINEMENT_STEPS = 2

# largest constraint violation tolerated in run traces
FEASIBILITY_TOL = 1e-6

# relative step inside the feasible load range when a load change is clamped
LOAD_CLAMP_MARGIN = 1e-9

# parallelism
THREADS_ENV_VAR = "DPOPF_THREADS"
DEFAULT_MAX_THREADS = 4

# logging
LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"
LOG_DATE_FORMAT = "%H:%M:%S"

# exit codes
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA_ERROR = 2
EXIT_SOLVER_ERROR = 3


def default_thread_count():
    """worker count used when the env var is unset"""
    return max(1, min(DEFAULT_MAX_THREADS, os.cpu_count() or 1))
