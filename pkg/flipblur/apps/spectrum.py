"""
Eigenvalue study of flipped and non-flipped blur matrices across image sizes.
"""

import argparse
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple

from flipblur.apps.common import add_experiment_arguments, config_from_args, resolve_psf, run_main
from flipblur.lib.boundary_ops import BlurOperator, flip_dense
from flipblur.lib.config import ExperimentConfig, get_thread_count
from flipblur.lib.log import get_logger
from flipblur.lib.psf_symbol import format_psf, sample_psi
from flipblur.lib.report import write_csv, write_json
from flipblur.lib.spectral import (
    asymmetry,
    compare_singular_values,
    compare_to_psi,
    eigen_dense,
    psi_nodes_for,
    singular_values_dense,
)

logger = get_logger("flipblur-spectrum")

WNORM_HEADER = [
    "size",
    "trace_norm",
    "spectral_norm",
    "mean_abs_dev",
    "max_abs_dev",
    "nonreal_plain",
    "nonreal_flip",
]


@dataclass(frozen=True)
class SizeSummary:
    """
    Spectral statistics of one image size.
    """

    size: Tuple[int, ...]
    nonreal_plain: int
    nonreal_flip: int
    max_abs_imag_plain: float
    max_abs_imag_flip: float
    asymmetry_plain: float
    asymmetry_flip: float
    mean_abs_dev: float
    max_abs_dev: float
    singular_mean_abs_dev: float
    trace_norm: float
    spectral_norm: float


def size_tag(size: Tuple[int, ...]) -> str:
    return "x".join(str(n) for n in size)


def analyze_size(config: ExperimentConfig, size: Tuple[int, ...], output_dir: Path, workers: int) -> SizeSummary:
    """
    Assemble the operator of one size, write its eigenvalue and comparison CSVs and summarize it.
    """
    psf = resolve_psf(config, len(size))
    op = BlurOperator(psf, config.bc, size)
    dense = op.assemble_dense(cap=config.dense_cap, workers=workers)
    flipped = flip_dense(dense)
    tag = size_tag(size)

    plain_spectrum = eigen_dense(dense)
    flip_spectrum = eigen_dense(flipped)
    (output_dir / f"eig_{tag}_plain.csv").write_text(plain_spectrum.to_csv())
    (output_dir / f"eig_{tag}_flip.csv").write_text(flip_spectrum.to_csv())

    comparison = compare_to_psi(flip_spectrum, sample_psi(psf, psi_nodes_for(size)))
    (output_dir / f"psi_{tag}.csv").write_text(comparison.to_csv())
    singular = compare_singular_values(dense, psf, size)

    correction = dense - op.toeplitz_part(cap=config.dense_cap, workers=workers)
    correction_values = singular_values_dense(correction)
    logger.info(
        f"{tag}: non-real eigenvalues {plain_spectrum.nonreal_count} -> {flip_spectrum.nonreal_count} after flipping, "
        f"mean |dev| from psi {comparison.mean_abs_dev:.4e}"
    )
    return SizeSummary(
        size=size,
        nonreal_plain=plain_spectrum.nonreal_count,
        nonreal_flip=flip_spectrum.nonreal_count,
        max_abs_imag_plain=plain_spectrum.max_abs_imag,
        max_abs_imag_flip=flip_spectrum.max_abs_imag,
        asymmetry_plain=asymmetry(dense),
        asymmetry_flip=asymmetry(flipped),
        mean_abs_dev=comparison.mean_abs_dev,
        max_abs_dev=comparison.max_abs_dev,
        singular_mean_abs_dev=singular.mean_abs_dev,
        trace_norm=float(correction_values.sum()),
        spectral_norm=float(correction_values.max()) if correction_values.size else 0.0,
    )


def cmd_spectrum(config: ExperimentConfig) -> List[SizeSummary]:
    """
    For every configured size write eig_<size>_{plain,flip}.csv (re, im), psi_<size>.csv
    (index, eig_real, psi_sample, deviation), then wnorms.csv and summary.json across sizes.
    """
    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    workers = get_thread_count()
    summaries = [analyze_size(config, size, output_dir, workers) for size in config.sizes]

    write_csv(
        output_dir / "wnorms.csv",
        WNORM_HEADER,
        [
            (
                size_tag(s.size),
                s.trace_norm,
                s.spectral_norm,
                s.mean_abs_dev,
                s.max_abs_dev,
                s.nonreal_plain,
                s.nonreal_flip,
            )
            for s in summaries
        ],
    )
    psfs = {len(size): resolve_psf(config, len(size)) for size in config.sizes}
    for dims, psf in sorted(psfs.items()):
        (output_dir / f"psf_{dims}d.txt").write_text(format_psf(psf))
    write_json(output_dir / "summary.json", {"bc": config.bc, "sizes": summaries})
    return summaries


def _sizes(value: str) -> List[str]:
    return [part for part in value.split(",") if part]


def main():
    """
    Entry point for the spectrum command.
    """
    parser = argparse.ArgumentParser(description=__doc__)
    add_experiment_arguments(parser)
    parser.add_argument("--sizes", type=str, default=None, help="Image shapes to sweep, e.g. 12x12,20x20. Default: 12x12,20x20")
    args = parser.parse_args()

    def command(args: argparse.Namespace):
        extra = {"sizes": _sizes(args.sizes)} if args.sizes else {}
        summaries = cmd_spectrum(config_from_args(args, **extra))
        print(f"{'size':>10} {'nonreal':>8} {'flipped':>8} {'mean|dev|':>12} {'||W||_1':>12}")
        for s in summaries:
            print(f"{size_tag(s.size):>10} {s.nonreal_plain:>8} {s.nonreal_flip:>8} {s.mean_abs_dev:>12.4e} {s.trace_norm:>12.6f}")

    run_main(logger, args, command)


if __name__ == "__main__":
    main()
