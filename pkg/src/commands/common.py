"""
experiment configuration and the monte-carlo loop shared by the commands
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from src.data.loader import load_case, load_partition
from src.data.network import build_zone_views, case_summary
from src.data.processor import RunMetrics, iterations_to_tol, optimality_loss
from src.models.admm import AdmmConfig
from src.models.opf import solve_centralized
from src.models.privacy import Algorithm, PrivacyParams, SensitivityMode, run_algorithm
from src.utils.cli_helpers import progress, thread_count
from src.utils.errors import ConfigError, DataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentConfig:
    case_path: Path
    zones_path: Path
    algorithm: Algorithm
    admm: AdmmConfig
    privacy: PrivacyParams
    runs: int = 1
    output_dir: Path = Path("results")
    quiet: bool = False

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if self.runs < 1:
            raise ConfigError(f"runs must be >= 1, got {self.runs}")
        for path in (self.case_path, self.zones_path):
            if not Path(path).is_file():
                raise DataError("file not found", str(path))


def default_mode(algorithm, requested=None):
    """
    sp-admm needs a fixed bound (global, or local-max from a dp-admm run);
    dp-admm defaults to per-iteration local sensitivity
    """
    algorithm = Algorithm(algorithm)
    if requested is None:
        mode = SensitivityMode.GLOBAL_BOUND if algorithm is Algorithm.SP_ADMM else SensitivityMode.LOCAL_PER_ITERATION
    else:
        mode = SensitivityMode(requested)
    if algorithm is Algorithm.SP_ADMM and mode is SensitivityMode.LOCAL_PER_ITERATION:
        mode = SensitivityMode.LOCAL_MAX_OVER_RUN
    return mode


def config_from_args(args, algorithm=None, alpha=None, budget=None):
    algorithm = Algorithm(algorithm or args.algo)
    admm = AdmmConfig(rho=args.rho, max_iters=args.max_iters, tol=args.tol)
    privacy = PrivacyParams(
        epsilon=args.epsilon,
        alpha_frac=args.alpha if alpha is None else alpha,
        attack_budget=args.budget if budget is None else budget,
        sensitivity_mode=default_mode(algorithm, args.sensitivity),
        seed=args.seed,
        scale_composition=args.scale_composition,
        absolute_alpha=args.absolute_alpha,
    )
    return ExperimentConfig(
        case_path=Path(args.case),
        zones_path=Path(args.zones),
        algorithm=algorithm,
        admm=admm,
        privacy=privacy,
        runs=args.runs,
        output_dir=Path(args.out),
        quiet=args.quiet,
    )


def load_inputs(config):
    """case, zone views and the log line describing them"""
    case = load_case(config.case_path)
    partition = load_partition(config.zones_path)
    zones = tuple(build_zone_views(case, partition))
    summary = case_summary(case, zones)
    logger.info("case: %d buses, %d lines, %d gens, %.1f MW load; zones %s",
                summary["buses"], summary["lines"], summary["gens"],
                summary["total_load_mw"], summary["zones"])
    return case, zones


def for_run(config, r):
    """params of run r: seeds advance with the run index"""
    return replace(config.privacy, seed=config.privacy.seed + r)


def monte_carlo(config, case, zones, centralized_cost, desc=None):
    """
    run the configured algorithm `runs` times; returns (metrics, run, plan)
    per run in run order
    """
    workers = thread_count()
    parallel_runs = min(workers, config.runs)
    # zone solves get the threads when there is a single run
    admm = replace(config.admm, max_workers=workers if parallel_runs <= 1 else 1)

    def one(r):
        params = for_run(config, r)
        run, plan = run_algorithm(config.algorithm, case, zones, admm, params)
        metrics = RunMetrics(
            run=r,
            seed=params.seed,
            algorithm=config.algorithm.value,
            alpha=params.alpha_frac,
            final_cost=run.final_cost,
            centralized_cost=centralized_cost,
            optimality_loss=optimality_loss(run.final_cost, centralized_cost),
            iterations=run.iterations,
            iterations_to_tol=iterations_to_tol(run.residuals, config.admm.tol),
            converged=run.converged,
            final_residual=float(run.residuals[-1]),
            residuals=tuple(run.residuals),
        )
        return metrics, run, plan

    bar_desc = desc or config.algorithm.value
    if parallel_runs <= 1:
        results = [one(r) for r in progress(range(config.runs), total=config.runs,
                                            desc=bar_desc, quiet=config.quiet)]
    else:
        with ThreadPoolExecutor(max_workers=parallel_runs) as pool:
            results = list(progress(pool.map(one, range(config.runs)), total=config.runs,
                                    desc=bar_desc, quiet=config.quiet))
    for metrics, _, _ in results:
        logger.info("run %d (seed %d): %d iterations, optimality loss %.4f%%",
                    metrics.run, metrics.seed, metrics.iterations, metrics.optimality_loss)
    return results


def centralized_cost(case):
    solution = solve_centralized(case)
    logger.info("centralized cost %.6f", solution.cost)
    return solution.cost
