"""
Restore a blurred image with GMRES or MINRES, optionally on the flipped system Y A f = Y g.
"""

import argparse
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from flipblur.apps.common import (
    BLURRED_FILE,
    SIDECAR_FILE,
    TRUTH_FILE,
    add_experiment_arguments,
    config_from_args,
    resolve_psf,
    run_main,
)
from flipblur.lib.boundary_ops import BlurOperator, flip_image
from flipblur.lib.config import ExperimentConfig
from flipblur.lib.errors import UsageError
from flipblur.lib.image import write_pgm
from flipblur.lib.krylov import IterationHistory, SolverKind, StoppingRule, get_solver
from flipblur.lib.log import get_logger, log_elapsed
from flipblur.lib.metrics import measure
from flipblur.lib.report import write_json

logger = get_logger("flipblur-deblur")


@dataclass(frozen=True)
class IterateScore:
    """
    One row half of the restoration table: quality of the iterate chosen by a criterion.
    """

    rre: float
    psnr: float
    iter: int


@dataclass(frozen=True)
class DeblurResult:
    """
    Attributes:
        run_dir: Directory holding this run's outputs.
        history: Iteration diagnostics.
        best: Score of the minimum-error iterate; None without a truth.
        discrepancy: Score of the discrepancy iterate; None if the principle never held or without a truth.
        delta: Noise norm used by the discrepancy principle.
    """

    run_dir: Path
    history: IterationHistory
    best: Optional[IterateScore]
    discrepancy: Optional[IterateScore]
    delta: float


def run_name(config: ExperimentConfig) -> str:
    return f"{config.bc.value}-{'flip' if config.flip else 'noflip'}-{config.solver.value}"


def _read_sidecar(directory: Path) -> dict:
    path = directory / SIDECAR_FILE
    if not (directory / BLURRED_FILE).is_file() or not path.is_file():
        raise UsageError(f"no blur output in {directory}; run flipblur-blur first", field="input_dir")
    return json.loads(path.read_text())


def cmd_deblur(config: ExperimentConfig) -> DeblurResult:
    """
    Solve the (flipped) blur system from the blur outputs in the input directory.

    Writes restored_best.pgm and restored_discrepancy.pgm when those iterates exist, history.csv,
    metrics.json with the best and discrepancy {rre, psnr, iter} and run.json with diagnostics.
    """
    source = config.source_dir
    sidecar = _read_sidecar(source)
    blurred = np.load(source / BLURRED_FILE, allow_pickle=False)
    truth = np.load(source / TRUTH_FILE, allow_pickle=False) if (source / TRUTH_FILE).is_file() else None
    psf = resolve_psf(config, blurred.ndim, directory=source)
    op = BlurOperator(psf, config.bc, blurred.shape)

    if config.flip:
        apply_fn, rhs = op.flip_apply, flip_image(blurred, op.ndim)
    else:
        apply_fn, rhs = op.apply, blurred
    delta = float(sidecar["delta"])
    rule = StoppingRule(max_iter=config.max_iter, delta=delta, tau=config.tau, halt=config.halt_at_discrepancy)
    solver = get_solver(config.solver)
    if config.solver is SolverKind.MINRES and not config.flip:
        logger.warning("MINRES on the unflipped system assumes a symmetric operator; results are approximate")

    name = run_name(config)
    with log_elapsed(logger, f"Run {name}"):
        report = solver(apply_fn, rhs, rule, truth=truth)
    history = report.history

    run_dir = Path(config.output_dir) / name
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "history.csv").write_text(history.to_csv())

    def score(solution: Optional[np.ndarray], k: Optional[int]) -> Optional[IterateScore]:
        if solution is None or truth is None:
            return None
        metrics = measure(solution, truth, config.psnr_convention)
        return IterateScore(rre=metrics.rre, psnr=metrics.psnr, iter=k)

    best = score(report.solution_at_best, history.best_iter)
    discrepancy = score(report.solution_at_discrepancy, history.discrepancy_iter)
    if report.solution_at_best is not None:
        (run_dir / "restored_best.pgm").write_bytes(write_pgm(report.solution_at_best))
    if report.solution_at_discrepancy is not None:
        (run_dir / "restored_discrepancy.pgm").write_bytes(write_pgm(report.solution_at_discrepancy))
    write_json(run_dir / "metrics.json", {"best": best, "discrepancy": discrepancy})
    write_json(
        run_dir / "run.json",
        {
            "bc": config.bc,
            "flip": config.flip,
            "solver": config.solver,
            "shape": op.shape,
            "psf_half_bandwidth": psf.m,
            "delta": delta,
            "tau": config.tau,
            "max_iter": config.max_iter,
            "iterations": history.iterations,
            "stopped_by": history.stopped_by,
            "breakdown": history.breakdown,
            "discrepancy_iter": history.discrepancy_iter,
            "best_iter": history.best_iter,
            "final_residual_norm": history.residual_norms[-1],
        },
    )
    logger.info(f"{name}: {history.iterations} iteration(s), stopped by {history.stopped_by.value}")
    return DeblurResult(run_dir=run_dir, history=history, best=best, discrepancy=discrepancy, delta=delta)


def main():
    """
    Entry point for the deblur command.
    """
    parser = argparse.ArgumentParser(description=__doc__)
    add_experiment_arguments(parser)
    args = parser.parse_args()

    def command(args: argparse.Namespace):
        result = cmd_deblur(config_from_args(args))
        if result.best is not None:
            print(f"best: rre={result.best.rre:.6f} psnr={result.best.psnr:.4f} iter={result.best.iter}")
        if result.discrepancy is not None:
            print(f"discrepancy: rre={result.discrepancy.rre:.6f} psnr={result.discrepancy.psnr:.4f} iter={result.discrepancy.iter}")
        else:
            print("discrepancy: not met")

    run_main(logger, args, command)


if __name__ == "__main__":
    main()
