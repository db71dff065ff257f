"""
run subcommand: monte-carlo runs of one algorithm against the centralized optimum
"""

import logging

from src.commands.common import centralized_cost, config_from_args, load_inputs, monte_carlo
from src.data.processor import metrics_frame, residual_envelope, trace_frame
from src.reporting.tables import OutputWriter
from src.utils.cli_helpers import (
    add_admm_options, add_case_options, add_logging_options, add_privacy_options, add_run_options,
)

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser("run", help="run admm, sp-admm or dp-admm")
    add_case_options(parser)
    add_admm_options(parser)
    add_privacy_options(parser)
    add_run_options(parser)
    add_logging_options(parser)
    return parser


def cmd_run(config):
    """execute the runs and write traces, the residual envelope and metrics"""
    case, zones = load_inputs(config)
    reference = centralized_cost(case)
    with OutputWriter(config.output_dir) as out:
        results = monte_carlo(config, case, zones, reference)
        for metrics, run, _ in results:
            out.write_csv(trace_frame(run), f"trace_run_{metrics.run:03d}.csv")
        out.write_csv(residual_envelope([m.residuals for m, _, _ in results]), "residual_envelope.csv")
        metrics = [m for m, _, _ in results]
        out.write_csv(metrics_frame(metrics), "metrics.csv")
    mean_loss = sum(m.optimality_loss for m in metrics) / len(metrics)
    logger.info("%s: mean optimality loss %.4f%% over %d runs", config.algorithm.value, mean_loss, len(metrics))
    return metrics


def main(args):
    cmd_run(config_from_args(args))
