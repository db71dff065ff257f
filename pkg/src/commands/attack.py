"""
attack subcommand: inference error of the load-inference attack over
adjacency values and attack budgets
"""

import logging
from dataclasses import replace

import pandas as pd

from src.commands.common import config_from_args, load_inputs
from src.models.adversary import (
    METHODS, attack_sweep, infer_across_iterations, system_capacity, zone_of,
)
from src.models.privacy import run_algorithm
from src.reporting.tables import OutputWriter
from src.utils.cli_helpers import (
    add_admm_options, add_case_options, add_logging_options, add_privacy_options, add_run_options,
    progress, thread_count,
)

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser("attack", help="sweep the load-inference attack")
    add_case_options(parser)
    add_admm_options(parser)
    add_privacy_options(parser, alpha_list=True)
    add_run_options(parser)
    parser.add_argument("--target", type=int, required=True, help="bus whose load is attacked")
    parser.add_argument("--method", choices=METHODS, default="response", help="attack formulation")
    parser.add_argument("--trace-inference", action="store_true",
                        help="also write the inferred load of every window of every run")
    add_logging_options(parser)
    return parser


def cmd_attack(config, target_bus, budgets, alphas, method="response", trace_inference=False):
    """writes attack_errors.csv (rows alpha, columns T, MW) and optionally inferred_loads.csv"""
    case, zones = load_inputs(config)
    admm = replace(config.admm, max_workers=thread_count())
    errors = attack_sweep(
        case, zones, config.algorithm, config.privacy, target_bus, budgets, alphas,
        config.runs, admm, method=method,
        progress=lambda jobs: progress(jobs, total=len(jobs), desc="attack", quiet=config.quiet),
    )
    with OutputWriter(config.output_dir) as out:
        table = errors.copy()
        table.columns = [str(T) for T in table.columns]
        out.write_csv(table, "attack_errors.csv", index=True)
        if trace_inference:
            out.write_csv(_inference_trace(config, case, zones, target_bus, budgets[0], alphas, admm, method),
                          "inferred_loads.csv")
    logger.info("attack errors (MW):\n%s", errors.to_string())
    return errors


def _inference_trace(config, case, zones, target_bus, budget, alphas, admm, method):
    zone = zone_of(zones, target_bus)
    ceiling = system_capacity(case)
    frames = []
    for alpha in alphas:
        for r in range(config.runs):
            params = replace(config.privacy, alpha_frac=alpha, attack_budget=budget,
                             seed=config.privacy.seed + r)
            run, _ = run_algorithm(config.algorithm, case, zones, admm, params)
            frame = infer_across_iterations(run, zone.zone_id, target_bus, min(budget, len(run.trace)),
                                            method=method, search_ceiling=ceiling)
            frame.insert(0, "run", r)
            frame.insert(0, "alpha", alpha)
            frame["inferred_mw"] = frame.pop("inferred_pu") * case.base_mva
            frame["true_mw"] = case.load_at(target_bus) * case.base_mva
            frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def main(args):
    config = config_from_args(args, alpha=max(args.alpha), budget=max(args.budget))
    cmd_attack(config, args.target, args.budget, args.alpha, args.method, args.trace_inference)
