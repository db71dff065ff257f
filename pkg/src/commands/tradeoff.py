"""
tradeoff subcommand: optimality loss and convergence of sp-admm and dp-admm
across adjacency values
"""

import logging

from src.commands.common import centralized_cost, config_from_args, load_inputs, monte_carlo
from src.data.processor import metrics_frame, summarize_metrics
from src.models.privacy import Algorithm
from src.reporting.tables import OutputWriter
from src.utils.cli_helpers import (
    add_admm_options, add_case_options, add_logging_options, add_privacy_options, add_run_options,
)

logger = logging.getLogger(__name__)

PRIVATE_ALGORITHMS = (Algorithm.DP_ADMM, Algorithm.SP_ADMM)


def register(subparsers):
    parser = subparsers.add_parser("tradeoff", help="loss and convergence of the private variants over alpha")
    add_case_options(parser)
    add_admm_options(parser)
    add_privacy_options(parser, alpha_list=True)
    add_run_options(parser)
    add_logging_options(parser)
    return parser


def cmd_tradeoff(configs):
    """
    configs maps (algorithm, alpha) to an ExperimentConfig; writes
    tradeoff.csv (one row per pair) and tradeoff_runs.csv
    """
    first = next(iter(configs.values()))
    case, zones = load_inputs(first)
    reference = centralized_cost(case)
    metrics = []
    for (algorithm, alpha), config in configs.items():
        results = monte_carlo(config, case, zones, reference, desc=f"{algorithm.value} a={alpha}")
        metrics += [m for m, _, _ in results]
    runs = metrics_frame(metrics)
    summary = summarize_metrics(runs)
    with OutputWriter(first.output_dir) as out:
        out.write_csv(summary, "tradeoff.csv")
        out.write_csv(runs, "tradeoff_runs.csv")
    logger.info("tradeoff:\n%s", summary.to_string(index=False))
    return summary


def main(args):
    configs = {
        (algorithm, alpha): config_from_args(args, algorithm=algorithm, alpha=alpha, budget=max(args.budget))
        for algorithm in PRIVATE_ALGORITHMS
        for alpha in args.alpha
    }
    cmd_tradeoff(configs)
