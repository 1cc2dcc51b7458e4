"""
Restoration table: blur once, then deblur under every boundary condition, with and without
flipping, with each configured solver.
"""

import argparse
import dataclasses
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional

from flipblur.apps.blur import cmd_blur
from flipblur.apps.common import add_experiment_arguments, config_from_args, run_main
from flipblur.apps.deblur import DeblurResult, IterateScore, cmd_deblur
from flipblur.lib.boundary_ops import BcKind
from flipblur.lib.config import ExperimentConfig, get_thread_count
from flipblur.lib.krylov import SolverKind
from flipblur.lib.log import get_logger
from flipblur.lib.report import write_csv

logger = get_logger("flipblur-grid")

TABLE_HEADER = [
    "bc",
    "flip",
    "solver",
    "best_rre",
    "best_psnr",
    "best_iter",
    "discrepancy_rre",
    "discrepancy_psnr",
    "discrepancy_iter",
]


@dataclasses.dataclass(frozen=True)
class GridRow:
    bc: BcKind
    flip: bool
    solver: SolverKind
    result: DeblurResult


def grid_configs(config: ExperimentConfig) -> List[ExperimentConfig]:
    """
    One configuration per (boundary condition, flip, solver), all reading the same blur outputs.
    """
    return [
        dataclasses.replace(config, bc=bc, flip=flip, solver=solver, input_dir=config.output_dir)
        for bc in BcKind
        for flip in (False, True)
        for solver in config.solvers
    ]


def _cells(score: Optional[IterateScore]) -> tuple:
    return (None, None, None) if score is None else (score.rre, score.psnr, score.iter)


def cmd_grid(config: ExperimentConfig) -> List[GridRow]:
    """
    Blur into the output directory, run the grid in worker threads and write table.csv.
    """
    cmd_blur(config)
    configs = grid_configs(config)
    workers = min(get_thread_count(), len(configs))
    logger.info(f"Running {len(configs)} restorations with {workers} worker(s)")
    with ThreadPoolExecutor(max_workers=workers) as executor:
        results = list(executor.map(cmd_deblur, configs))

    rows = [GridRow(c.bc, c.flip, c.solver, result) for c, result in zip(configs, results)]
    write_csv(
        Path(config.output_dir) / "table.csv",
        TABLE_HEADER,
        [
            (row.bc.value, str(row.flip).lower(), row.solver.value)
            + _cells(row.result.best)
            + _cells(row.result.discrepancy)
            for row in rows
        ],
    )
    return rows


def main():
    """
    Entry point for the grid command.
    """
    parser = argparse.ArgumentParser(description=__doc__)
    add_experiment_arguments(parser)
    parser.add_argument("--solvers", type=str, default=None, help="Comma-separated solvers to run. Default: gmres")
    args = parser.parse_args()

    def command(args: argparse.Namespace):
        extra = {"solvers": [s for s in args.solvers.split(",") if s]} if args.solvers else {}
        rows = cmd_grid(config_from_args(args, **extra))
        print(f"{'bc':<15} {'flip':<5} {'solver':<7} {'best rre':>10} {'iter':>5} {'dp rre':>10} {'iter':>5}")
        for row in rows:
            best, dp = row.result.best, row.result.discrepancy
            best_cells = f"{best.rre:>10.6f} {best.iter:>5}" if best else f"{'-':>10} {'-':>5}"
            dp_cells = f"{dp.rre:>10.6f} {dp.iter:>5}" if dp else f"{'-':>10} {'-':>5}"
            print(f"{row.bc.value:<15} {str(row.flip).lower():<5} {row.solver.value:<7} {best_cells} {dp_cells}")

    run_main(logger, args, command)


if __name__ == "__main__":
    main()
