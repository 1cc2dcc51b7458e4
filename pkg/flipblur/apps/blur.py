"""
Blur a scene and contaminate it with Gaussian noise of a relative level.

The scene extends beyond the field of view by the PSF half-bandwidth, so the blurred data
follow none of the boundary conditions the restorations assume.
"""

import argparse
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from flipblur.apps.common import (
    BLURRED_FILE,
    BLURRED_PGM,
    PSF_FILE,
    SIDECAR_FILE,
    TRUTH_FILE,
    add_experiment_arguments,
    config_from_args,
    resolve_scene,
    run_main,
)
from flipblur.lib.boundary_ops import field_of_view, observe
from flipblur.lib.config import ExperimentConfig
from flipblur.lib.image import write_pgm
from flipblur.lib.krylov import discrepancy_delta
from flipblur.lib.log import get_logger
from flipblur.lib.metrics import NoiseSpec, add_noise
from flipblur.lib.psf_symbol import format_psf
from flipblur.lib.report import write_json

logger = get_logger("flipblur-blur")


@dataclass(frozen=True)
class BlurResult:
    """
    Attributes:
        truth: The ground-truth image, the field of view of the scene.
        blurred: The blurred, noisy image.
        blurred_norm: ||A f||, the norm of the noise-free blurred image.
        delta: Norm of the injected noise.
        output_dir: Where the files were written.
    """

    truth: np.ndarray
    blurred: np.ndarray
    blurred_norm: float
    delta: float
    output_dir: Path


def cmd_blur(config: ExperimentConfig) -> BlurResult:
    """
    Write the truth, the blurred noisy field of view (.npy and 16-bit PGM), the PSF and the JSON sidecar.
    """
    scene, psf = resolve_scene(config)
    exact = observe(psf, scene)
    truth = field_of_view(scene, psf.m)
    logger.info(f"Blurred the {truth.shape} field of view of a {scene.shape} scene with a PSF of half-bandwidth {psf.m}")

    blurred_norm = float(np.linalg.norm(exact))
    blurred = add_noise(exact, NoiseSpec(config.gamma, config.seed))
    delta = discrepancy_delta(config.gamma, blurred_norm)
    logger.debug(f"||A f|| = {blurred_norm:.6e}, delta = {delta:.6e}")

    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    np.save(output_dir / TRUTH_FILE, truth)
    np.save(output_dir / BLURRED_FILE, blurred)
    (output_dir / BLURRED_PGM).write_bytes(write_pgm(blurred, maxval=65535))
    (output_dir / PSF_FILE).write_text(format_psf(psf))
    write_json(
        output_dir / SIDECAR_FILE,
        {
            "gamma": config.gamma,
            "seed": config.seed,
            "blurred_norm": blurred_norm,
            "delta": delta,
            "shape": truth.shape,
            "scene_shape": scene.shape,
        },
    )
    return BlurResult(truth=truth, blurred=blurred, blurred_norm=blurred_norm, delta=delta, output_dir=output_dir)


def main():
    """
    Entry point for the blur command.
    """
    parser = argparse.ArgumentParser(description=__doc__)
    add_experiment_arguments(parser)
    args = parser.parse_args()

    def command(args: argparse.Namespace):
        result = cmd_blur(config_from_args(args))
        logger.info(f"Wrote blurred image to {result.output_dir}")

    run_main(logger, args, command)


if __name__ == "__main__":
    main()
