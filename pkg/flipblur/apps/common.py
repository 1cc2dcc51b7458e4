"""
Flags, configuration and error handling shared by the command-line apps.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np

from flipblur.lib.boundary_ops import BcKind
from flipblur.lib.config import ExperimentConfig, build_config, load_config_file
from flipblur.lib.errors import FlipblurError
from flipblur.lib.image import ImageKind, load_image, synth_image
from flipblur.lib.krylov import SolverKind
from flipblur.lib.log import set_stream_handler_verbosity
from flipblur.lib.metrics import PsnrConvention
from flipblur.lib.psf_symbol import Psf, PsfKind, crop_psf, make_psf, read_psf, with_dims

PSF_FILE = "psf.txt"
TRUTH_FILE = "truth.npy"
BLURRED_FILE = "blurred.npy"
BLURRED_PGM = "blurred.pgm"
SIDECAR_FILE = "blurred.json"


def _choices(enum) -> list:
    return [member.value for member in enum]


def add_verbosity_argument(parser: argparse.ArgumentParser):
    parser.add_argument("-v", "--verbose", action="count", default=0, help="Increase verbosity level. 0=ERROR, 1=WARNING, 2=INFO, 3=DEBUG. Default: %(default)s")


def add_experiment_arguments(parser: argparse.ArgumentParser):
    """
    Add the experiment flags. Every flag defaults to None so that unset flags keep config file values.
    """
    parser.add_argument("--config", type=str, default=None, help="Flat JSON configuration file. Flags override its values.")
    parser.add_argument("--psf", dest="psf_path", type=str, default=None, help="PSF text file. Default: a synthetic PSF")
    parser.add_argument("--psf-kind", type=str, choices=_choices(PsfKind), default=None, help="Synthetic PSF family. Default: motion")
    parser.add_argument("--psf-radius", type=int, default=None, help="Synthetic PSF half-bandwidth. Default: 3")
    parser.add_argument("--psf-crop", type=int, default=None, help="Crop the PSF to this half-bandwidth. Default: no cropping")
    parser.add_argument("--image", dest="image_path", type=str, default=None, help="Ground-truth image, PGM or .npy. Default: a synthetic image")
    parser.add_argument("--synth", type=str, choices=_choices(ImageKind), default=None, help="Synthetic image family. Default: blob")
    parser.add_argument("--size", type=str, default=None, help="Image shape, e.g. 64x64 or 128. Default: 64x64")
    parser.add_argument("--bc", type=str, choices=_choices(BcKind), default=None, help="Boundary condition. Default: reflective")
    parser.add_argument("--flip", action=argparse.BooleanOptionalAction, default=None, help="Solve the flipped system. Default: on")
    parser.add_argument("--solver", type=str, choices=_choices(SolverKind), default=None, help="Krylov solver. Default: gmres")
    parser.add_argument("--gamma", type=float, default=None, help="Relative noise level. Default: 0.01")
    parser.add_argument("--seed", type=int, default=None, help="Noise seed. Default: 0")
    parser.add_argument("--tau", type=float, default=None, help="Discrepancy safety factor, >= 1. Default: 1.0")
    parser.add_argument("--max-iter", type=int, default=None, help="Iteration budget. Default: 100")
    parser.add_argument("--out", dest="output_dir", type=str, default=None, help="Output directory. Default: out")
    parser.add_argument("--input", dest="input_dir", type=str, default=None, help="Directory holding blur outputs. Default: the output directory")
    parser.add_argument("--dense-cap", type=int, default=None, help="Largest dense matrix order. Default: 16384")
    parser.add_argument("--psnr-convention", type=str, choices=_choices(PsnrConvention), default=None, help="PSNR numerator: total (N) or rms (sqrt N). Default: total")
    parser.add_argument("--halt-at-discrepancy", action=argparse.BooleanOptionalAction, default=None, help="Stop at the discrepancy iteration. Default: off")
    add_verbosity_argument(parser)


def config_from_args(args: argparse.Namespace, **extra) -> ExperimentConfig:
    """
    Merge the config file named by --config with the flags.
    """
    file_values = load_config_file(args.config) if args.config else None
    names = (
        "psf_path",
        "psf_kind",
        "psf_radius",
        "psf_crop",
        "image_path",
        "synth",
        "size",
        "bc",
        "flip",
        "solver",
        "gamma",
        "seed",
        "tau",
        "max_iter",
        "output_dir",
        "input_dir",
        "dense_cap",
        "psnr_convention",
        "halt_at_discrepancy",
    )
    overrides = {name: getattr(args, name) for name in names}
    overrides.update(extra)
    return build_config(file_values, **overrides)


def resolve_psf(config: ExperimentConfig, dims: int, directory: Optional[Path] = None) -> Psf:
    """
    The configured PSF file, else a PSF saved by a previous run in `directory`, else a synthetic PSF,
    cropped to `config.psf_crop` when set.
    """
    if config.psf_path is not None:
        psf = with_dims(read_psf(config.psf_path), dims)
    elif directory is not None and (directory / PSF_FILE).is_file():
        psf = with_dims(read_psf(directory / PSF_FILE), dims)
    else:
        psf = make_psf(config.psf_kind, config.psf_radius, dims=dims, seed=config.seed)
    return psf if config.psf_crop is None else crop_psf(psf, config.psf_crop)


def resolve_scene(config: ExperimentConfig) -> Tuple[np.ndarray, Psf]:
    """
    The scene to blur and its PSF.

    The scene reaches the PSF half-bandwidth beyond the field of view: a synthetic scene is
    drawn with that margin around `config.size`, an image file is the whole scene and its
    interior is the field of view.
    """
    if config.image_path is not None:
        scene = load_image(config.image_path)
        return scene, resolve_psf(config, scene.ndim)
    psf = resolve_psf(config, len(config.size))
    return synth_image(config.synth, config.size, margin=psf.m), psf


def run_main(logger: logging.Logger, args: argparse.Namespace, command: Callable[[argparse.Namespace], None]):
    """
    Set verbosity, run the command and exit with the code of any flipblur error.
    """
    set_stream_handler_verbosity(args.verbose)
    try:
        command(args)
    except FlipblurError as e:
        logger.error(str(e))
        sys.exit(e.exit_code)
    except KeyboardInterrupt:
        logger.info("Stopped")
        sys.exit(130)
