"""
Dense spectral analysis of assembled blur operators.

Eigenvalues and singular values come from LAPACK through scipy. The statistics built
on top of them (non-real counts, outlier counts around a set, sorted comparisons with
symbol samplings) only ever consume sorted values, so the backend's ordering does not
matter.
"""

import csv
import hashlib
import io
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from flipblur.lib.errors import NumericalFailureError, UsageError
from flipblur.lib.log import get_logger, log_elapsed
from flipblur.lib.psf_symbol import Psf, PsiSample, sample_abs_symbol, symbol_range

logger = get_logger("flipblur.spectral")

NONREAL_TOLERANCE = 1e-10
RANK_TOLERANCE = 1e-12


class EigensolverFailureError(NumericalFailureError):
    """
    Raised when LAPACK fails to converge on a matrix.
    """

    def __init__(self, matrix: np.ndarray, reason: str):
        super().__init__(f"Eigensolver failed on matrix {matrix_digest(matrix)} ({matrix.shape[0]}x{matrix.shape[1]}): {reason}")


class InvalidOrderError(UsageError):
    """
    Raised for a Schatten order p < 1.
    """

    def __init__(self, p: float):
        super().__init__(f"Schatten order must be >= 1, got {p}", field="p")


class InvalidSetError(UsageError):
    """
    Raised for an empty or malformed cluster set.
    """


class SampleSizeError(UsageError):
    """
    Raised when a spectrum and a symbol sampling have different cardinalities.
    """


def matrix_digest(matrix: np.ndarray) -> str:
    """
    Short SHA-256 digest of a matrix's bytes, to identify it in error messages.
    """
    return hashlib.sha256(np.ascontiguousarray(matrix, dtype=np.float64).tobytes()).hexdigest()[:16]


def _square(matrix: np.ndarray) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise UsageError(f"expected a square matrix, got shape {matrix.shape}", field="matrix")
    return matrix


def norm_estimate(matrix: np.ndarray) -> float:
    """
    sqrt(||M||_1 ||M||_inf), an upper bound of the spectral norm that needs no decomposition.
    """
    if matrix.size == 0:
        return 0.0
    return float(np.sqrt(np.abs(matrix).sum(axis=0).max() * np.abs(matrix).sum(axis=1).max()))


@dataclass(frozen=True)
class SpectrumReport:
    """
    Eigenvalues of a dense matrix and their non-real statistics.

    Attributes:
        eigenvalues: All N eigenvalues, sorted lexicographically by (real, imaginary) part.
        nonreal_count: Number of eigenvalues with |Im| > tol.
        max_abs_imag: Largest |Im| over the spectrum.
        tol: Cutoff separating numerically real from non-real eigenvalues.
    """

    eigenvalues: np.ndarray
    nonreal_count: int
    max_abs_imag: float
    tol: float

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def to_csv(self) -> str:
        """
        CSV with columns re, im.
        """
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["re", "im"])
        for value in self.eigenvalues:
            writer.writerow([repr(float(value.real)), repr(float(value.imag))])
        return buffer.getvalue()


def spectrum_from_values(eigenvalues: np.ndarray, tol: float) -> SpectrumReport:
    """
    Build a report from already computed eigenvalues.
    """
    eigenvalues = np.sort(np.asarray(eigenvalues, dtype=np.complex128).ravel())
    imag = np.abs(eigenvalues.imag)
    return SpectrumReport(
        eigenvalues=eigenvalues,
        nonreal_count=int(np.count_nonzero(imag > tol)),
        max_abs_imag=float(imag.max()) if imag.size else 0.0,
        tol=float(tol),
    )


def eigen_dense(matrix: np.ndarray, rel_tol: float = NONREAL_TOLERANCE) -> SpectrumReport:
    """
    All eigenvalues of a real nonsymmetric matrix.

    Args:
        matrix: Square real matrix.
        rel_tol: Non-real cutoff relative to the norm estimate of the matrix.

    Raises:
        EigensolverFailureError: If LAPACK does not converge.
    """
    matrix = _square(matrix)
    try:
        with log_elapsed(logger, f"Eigendecomposition N={matrix.shape[0]}"):
            values = linalg.eigvals(matrix, check_finite=True)
    except (linalg.LinAlgError, ValueError) as e:
        raise EigensolverFailureError(matrix, str(e))
    return spectrum_from_values(values, rel_tol * norm_estimate(matrix))


def singular_values_dense(matrix: np.ndarray) -> np.ndarray:
    """
    Singular values, nonincreasing.

    Raises:
        EigensolverFailureError: If the SVD does not converge.
    """
    matrix = _square(matrix)
    try:
        with log_elapsed(logger, f"SVD N={matrix.shape[0]}"):
            return linalg.svdvals(matrix, check_finite=True)
    except (linalg.LinAlgError, ValueError) as e:
        raise EigensolverFailureError(matrix, str(e))


def schatten_norm(matrix: np.ndarray, p: float) -> float:
    """
    Schatten p-norm: the p-norm of the singular-value vector. p = 1 is the trace norm,
    p = inf the spectral norm.

    Raises:
        InvalidOrderError: If p < 1.
    """
    if not p >= 1:
        raise InvalidOrderError(p)
    values = singular_values_dense(matrix)
    if values.size == 0:
        return 0.0
    return float(np.linalg.norm(values, ord=p))


def asymmetry(matrix: np.ndarray) -> float:
    """
    ||M - M^T||_F / ||M||_F, zero for symmetric matrices.
    """
    matrix = _square(matrix)
    scale = np.linalg.norm(matrix)
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(matrix - matrix.T) / scale)


def is_hankel(matrix: np.ndarray, atol: float = 1e-15) -> bool:
    """
    True if every antidiagonal of the matrix is constant.
    """
    matrix = np.asarray(matrix)
    return bool(np.allclose(matrix[1:, :-1], matrix[:-1, 1:], rtol=0.0, atol=atol))


def numerical_rank(values: np.ndarray, tol: float = RANK_TOLERANCE) -> int:
    """
    Number of singular values above `tol`.
    """
    return int(np.count_nonzero(np.asarray(values) > tol))


###############################################################################
# Cluster sets


@dataclass(frozen=True)
class Points:
    """
    A finite set of points of the complex plane.
    """

    values: Tuple[complex, ...]


@dataclass(frozen=True)
class Interval:
    """
    The real segment [lo, hi].
    """

    lo: float
    hi: float


@dataclass(frozen=True)
class SymbolRange:
    """
    The segment [-max|f|, max|f|] covering the values of the ±|f| symbol, with max|f| from a dense sampling.
    """

    psf: Psf
    nodes: Optional[Union[int, Sequence[int]]] = None

    def resolve(self) -> Interval:
        _, peak = symbol_range(self.psf, self.nodes)
        return Interval(-peak, peak)


SetDescriptor = Union[Points, Interval, SymbolRange]


@dataclass(frozen=True)
class ClusterCount:
    """
    Attributes:
        epsilon: Radius of the neighbourhood.
        set_descriptor: The set S.
        count_outside: Number of values farther than epsilon from S.
        total: Number of values examined.
    """

    epsilon: float
    set_descriptor: SetDescriptor
    count_outside: int
    total: int


def _distances(values: np.ndarray, target: SetDescriptor) -> np.ndarray:
    if isinstance(target, SymbolRange):
        target = target.resolve()
    if isinstance(target, Points):
        points = np.asarray(target.values, dtype=np.complex128).ravel()
        if points.size == 0:
            raise InvalidSetError("point set is empty", field="set")
        return np.abs(values[:, None] - points[None, :]).min(axis=1)
    if isinstance(target, Interval):
        if not (np.isfinite(target.lo) and np.isfinite(target.hi)) or target.lo > target.hi:
            raise InvalidSetError(f"invalid interval [{target.lo}, {target.hi}]", field="set")
        outside = np.maximum(np.maximum(target.lo - values.real, values.real - target.hi), 0.0)
        return np.hypot(outside, values.imag)
    raise InvalidSetError(f"unknown set descriptor {target!r}", field="set")


def cluster_count(
    spectrum: Union[SpectrumReport, np.ndarray], target: SetDescriptor, epsilon: float
) -> ClusterCount:
    """
    Count the values lying outside the epsilon-neighbourhood of a set.

    Args:
        spectrum: A spectrum report, or a raw array of (possibly complex) values such as singular values.
        target: The set S: points, a real interval, or the symbol range of a PSF.
        epsilon: Neighbourhood radius, > 0.

    Raises:
        InvalidSetError: If the set is empty or malformed.
    """
    if not epsilon > 0:
        raise UsageError(f"must be > 0, got {epsilon}", field="epsilon")
    values = spectrum.eigenvalues if isinstance(spectrum, SpectrumReport) else spectrum
    values = np.asarray(values, dtype=np.complex128).ravel()
    outside = int(np.count_nonzero(_distances(values, target) > epsilon))
    return ClusterCount(epsilon=float(epsilon), set_descriptor=target, count_outside=outside, total=values.size)


###############################################################################
# Comparison with symbol samplings


@dataclass(frozen=True)
class SymbolComparison:
    """
    Index-wise comparison of two sorted sequences of equal length.

    Attributes:
        sorted_eig_real_parts: Sorted spectral values (eigenvalue real parts, or singular values).
        sorted_psi_samples: Sorted symbol samples.
        max_abs_dev: Largest absolute deviation.
        mean_abs_dev: Mean absolute deviation.
    """

    sorted_eig_real_parts: np.ndarray
    sorted_psi_samples: np.ndarray
    max_abs_dev: float
    mean_abs_dev: float

    @property
    def deviations(self) -> np.ndarray:
        return self.sorted_eig_real_parts - self.sorted_psi_samples

    def to_csv(self) -> str:
        """
        CSV with columns index, eig_real, psi_sample, deviation.
        """
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["index", "eig_real", "psi_sample", "deviation"])
        for index, (value, sample, deviation) in enumerate(
            zip(self.sorted_eig_real_parts, self.sorted_psi_samples, self.deviations)
        ):
            writer.writerow([index, repr(float(value)), repr(float(sample)), repr(float(deviation))])
        return buffer.getvalue()


def _compare_sorted(values: np.ndarray, samples: np.ndarray) -> SymbolComparison:
    if values.size != samples.size:
        raise SampleSizeError(f"{values.size} spectral values against {samples.size} samples", field="nodes")
    values, samples = np.sort(values), np.sort(samples)
    deviations = np.abs(values - samples)
    return SymbolComparison(
        sorted_eig_real_parts=values,
        sorted_psi_samples=samples,
        max_abs_dev=float(deviations.max()) if deviations.size else 0.0,
        mean_abs_dev=float(deviations.mean()) if deviations.size else 0.0,
    )


def compare_to_psi(spectrum: SpectrumReport, psi: PsiSample) -> SymbolComparison:
    """
    Compare the sorted real parts of a spectrum with the sorted samples {+|f|, -|f|}.

    Raises:
        SampleSizeError: If the sampling does not have one value per eigenvalue.
    """
    return _compare_sorted(spectrum.eigenvalues.real.copy(), np.asarray(psi.values, dtype=np.float64))


def compare_singular_values(matrix: np.ndarray, psf: Psf, shape: Sequence[int]) -> SymbolComparison:
    """
    Compare the sorted singular values of a matrix with |f| sampled on the image grid.

    Flipping permutes rows, so the flipped and non-flipped operators give the same comparison.
    """
    values = singular_values_dense(matrix)
    return _compare_sorted(values, sample_abs_symbol(psf, tuple(shape)))


def psi_nodes_for(shape: Sequence[int]) -> Tuple[int, ...]:
    """
    Symbol grid for the ±|f| samples with 2 * prod(nodes) = prod(shape): the last even dimension is halved.

    Raises:
        SampleSizeError: If every dimension is odd.
    """
    shape = tuple(int(n) for n in shape)
    for axis in reversed(range(len(shape))):
        if shape[axis] % 2 == 0:
            return shape[:axis] + (shape[axis] // 2,) + shape[axis + 1 :]
    raise SampleSizeError(f"no even dimension in {shape} to split between +|f| and -|f|", field="size")
