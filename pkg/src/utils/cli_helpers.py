"""
shared helpers for the command line front end
"""

import logging
import os
import sys

from tqdm import tqdm

from src.config.settings import (
    ALPHA_SWEEP, DEFAULT_ALPHA, DEFAULT_BUDGET, DEFAULT_EPSILON, DEFAULT_MAX_ITERS,
    DEFAULT_OUTPUT_DIR, DEFAULT_RHO, DEFAULT_RUNS, DEFAULT_SEED, DEFAULT_TOL,
    LOG_DATE_FORMAT, LOG_FORMAT, THREADS_ENV_VAR, default_thread_count,
)
from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)

ALGORITHMS = ("admm", "sp-admm", "dp-admm")
SENSITIVITY_CHOICES = ("global", "local", "local-max")


def setup_logging(verbose=False, quiet=False):
    """configure the root logger once per process"""
    level = logging.INFO
    if verbose:
        level = logging.DEBUG
    elif quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT, datefmt=LOG_DATE_FORMAT, force=True)


def thread_count():
    """worker cap from DPOPF_THREADS, falling back to the cpu count"""
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None or raw.strip() == "":
        return default_thread_count()
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError(f"{THREADS_ENV_VAR} must be at least 1, got {value}")
    return value


def progress(iterable, total=None, desc=None, quiet=False):
    """tqdm bar on stderr; silent when quiet or not attached to a terminal"""
    disable = quiet or not sys.stderr.isatty()
    return tqdm(iterable, total=total, desc=desc, disable=disable, leave=False, file=sys.stderr)


def parse_float_list(text):
    """comma separated floats, e.g. '0.01,0.05'"""
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma separated list of numbers, got {text!r}") from None
    if not values:
        raise ConfigError("empty list")
    return values


def parse_int_list(text):
    """comma separated integers, e.g. '1,5,10'"""
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma separated list of integers, got {text!r}") from None
    if not values:
        raise ConfigError("empty list")
    return values


def add_case_options(parser):
    parser.add_argument("--case", required=True, help="case file (.json native or .m matpower)")
    parser.add_argument("--zones", required=True, help="zone partition json")


def add_admm_options(parser):
    parser.add_argument("--rho", type=float, default=DEFAULT_RHO, help="admm penalty factor")
    parser.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS, help="iteration limit K")
    parser.add_argument("--tol", type=float, default=DEFAULT_TOL, help="primal residual tolerance")


def add_privacy_options(parser, alpha_list=False):
    """privacy flags; the attack sweep takes lists where runs take scalars"""
    parser.add_argument("--algo", choices=ALGORITHMS, default="dp-admm", help="algorithm")
    parser.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON, help="privacy loss")
    if alpha_list:
        default = ",".join(str(a) for a in ALPHA_SWEEP)
        parser.add_argument("--alpha", type=parse_float_list, default=parse_float_list(default),
                            help="adjacency values, comma separated")
        parser.add_argument("--budget", type=parse_int_list, default=[DEFAULT_BUDGET],
                            help="attack budgets T, comma separated")
    else:
        parser.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="adjacency")
        parser.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="attack budget T")
    parser.add_argument("--scale-composition", action="store_true",
                        help="scale dynamic noise by T for sequential composition")
    parser.add_argument("--absolute-alpha", action="store_true",
                        help="read alpha in p.u. instead of a fraction of the load")
    parser.add_argument("--sensitivity", choices=SENSITIVITY_CHOICES, default=None,
                        help="sensitivity mode (default: global for sp-admm, local for dp-admm)")


def add_run_options(parser):
    parser.add_argument("--runs", type=int, default=DEFAULT_RUNS, help="monte-carlo runs")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED, help="master seed")
    parser.add_argument("--out", default=str(DEFAULT_OUTPUT_DIR), help="output directory")


def add_logging_options(parser):
    group = parser.add_mutually_exclusive_group()
    group.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    group.add_argument("--quiet", action="store_true", help="warnings only, no progress bars")
