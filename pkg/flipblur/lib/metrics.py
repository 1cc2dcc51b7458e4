"""
Noise model and restoration-quality metrics.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Tuple, Union

import numpy as np

from flipblur.lib.errors import NumericalFailureError, UsageError


class InvalidNoiseError(UsageError):
    """
    Raised for a negative or non-finite noise level.
    """


class UndefinedRREError(UsageError):
    """
    Raised when the relative error is taken against a zero truth.
    """


class PsnrConvention(Enum):
    """
    TOTAL puts the pixel count N in the numerator against the total error norm, RMS its square root
    (peak over root-mean-square error).
    """

    TOTAL = "total"
    RMS = "rms"


@dataclass(frozen=True)
class NoiseSpec:
    """
    Attributes:
        gamma: Relative noise level: the noise norm is gamma times the norm of the blurred image.
        seed: Seed of the Gaussian generator.
    """

    gamma: float
    seed: int = 0

    def __post_init__(self):
        if not math.isfinite(self.gamma) or self.gamma < 0:
            raise InvalidNoiseError(f"must be finite and >= 0, got {self.gamma}", field="gamma")


@dataclass(frozen=True)
class Metrics:
    """
    Attributes:
        rre: Relative restoration error.
        psnr: Peak signal-to-noise ratio in dB; inf for an exact reconstruction.
    """

    rre: float
    psnr: float


def gaussian_white(shape: Tuple[int, ...], seed: int) -> np.ndarray:
    """
    Standard normal samples by Box-Muller over uniforms from a counter-based Philox generator.
    """
    size = int(np.prod(shape))
    rng = np.random.Generator(np.random.Philox(seed))
    u1, u2 = rng.random((2, size))
    return (np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)).reshape(shape)


def add_noise(g: np.ndarray, spec: NoiseSpec) -> np.ndarray:
    """
    g + (zeta / ||zeta||) * gamma * ||g|| with zeta Gaussian white noise.

    The injected noise has 2-norm exactly gamma * ||g|| up to rounding.
    """
    g = np.asarray(g, dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise UsageError("image contains non-finite values", field="image")
    if spec.gamma == 0:
        return g.copy()
    zeta = gaussian_white(g.shape, spec.seed)
    norm = np.linalg.norm(zeta)
    if norm == 0:
        raise NumericalFailureError("degenerate noise draw")
    return g + zeta * (spec.gamma * np.linalg.norm(g) / norm)


def _pair(candidate: np.ndarray, truth: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    candidate = np.asarray(candidate, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if candidate.shape != truth.shape:
        raise UsageError(f"shape {candidate.shape} does not match truth shape {truth.shape}", field="image")
    return candidate, truth


def rre(candidate: np.ndarray, truth: np.ndarray) -> float:
    """
    ||candidate - truth|| / ||truth||.

    Raises:
        UndefinedRREError: If the truth is zero.
    """
    candidate, truth = _pair(candidate, truth)
    scale = np.linalg.norm(truth)
    if scale == 0:
        raise UndefinedRREError("truth image is zero", field="truth")
    return float(np.linalg.norm(candidate - truth) / scale)


def psnr(
    candidate: np.ndarray, truth: np.ndarray, convention: Union[PsnrConvention, str] = PsnrConvention.TOTAL
) -> float:
    """
    20 log10(c * max(truth) / ||candidate - truth||) with c = N (TOTAL) or sqrt(N) (RMS),
    N the pixel count. Returns inf when the images coincide.
    """
    candidate, truth = _pair(candidate, truth)
    error = np.linalg.norm(candidate - truth)
    if error == 0:
        return math.inf
    peak = float(truth.max())
    if peak <= 0:
        raise UsageError("truth peak must be positive", field="truth")
    count = truth.size if PsnrConvention(convention) is PsnrConvention.TOTAL else math.sqrt(truth.size)
    return float(20.0 * math.log10(count * peak / error))


def measure(
    candidate: np.ndarray, truth: np.ndarray, convention: Union[PsnrConvention, str] = PsnrConvention.TOTAL
) -> Metrics:
    return Metrics(rre=rre(candidate, truth), psnr=psnr(candidate, truth, convention))
