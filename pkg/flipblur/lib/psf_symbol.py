"""
Point-spread functions and their generating symbol.

A PSF holds the normalized blur coefficients h_j, j in [-m, m] (1D), or
h_{j1,j2}, (j1, j2) in [-m, m]^2 (2D). Coefficients are always stored as a 2D
array; a 1D PSF is a single row. Entry `coeffs[m + j1, m + j2]` is h_{j1,j2}.

The symbol is f(theta) = sum_j h_j exp(i <j, theta>), the convention under which
the zero-boundary blur matrix has entry (l, k) = h_{l-k}.
"""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from flipblur.lib.errors import UsageError
from flipblur.lib.log import get_logger

logger = get_logger("flipblur.psf")

NORMALIZATION_TOLERANCE = 1e-12

Nodes = Union[int, Sequence[int]]


class MalformedPsfError(UsageError):
    """
    Raised when a PSF grid has even extent, ragged rows or non-finite entries.
    """


class DegeneratePsfError(UsageError):
    """
    Raised when the PSF coefficients sum to zero and cannot be normalized.
    """


class PsfParseError(UsageError):
    """
    Raised when a PSF file holds a token that is not a real number.
    """


class InvalidCropError(UsageError):
    """
    Raised when cropping to a half-bandwidth outside [0, m].
    """


class PsfKind(Enum):
    """
    Families of synthetic PSFs.
    """

    GAUSSIAN = "gaussian"
    MOTION = "motion"
    SPECKLE = "speckle"


@dataclass(frozen=True, eq=False)
class Psf:
    """
    Normalized, immutable point-spread function.

    Attributes:
        coeffs: Coefficient grid of shape (1, 2m+1) for dims=1 or (2m+1, 2m+1) for dims=2.
        dims: 1 for signals, 2 for images.
        normalized: True if the coefficients had to be divided by their sum on construction.
    """

    coeffs: np.ndarray
    dims: int
    normalized: bool = field(default=False, compare=False)

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=np.float64)
        if self.dims not in (1, 2):
            raise MalformedPsfError(f"dims must be 1 or 2, got {self.dims}")
        if coeffs.ndim != 2 or (self.dims == 1 and coeffs.shape[0] != 1):
            raise MalformedPsfError(f"coefficient grid of shape {coeffs.shape} does not match dims={self.dims}")
        if any(extent % 2 == 0 for extent in coeffs.shape):
            raise MalformedPsfError(f"coefficient grid must have odd extent, got {coeffs.shape}")
        if self.dims == 2 and coeffs.shape[0] != coeffs.shape[1]:
            raise MalformedPsfError(f"2D coefficient grid must be square, got {coeffs.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise MalformedPsfError("coefficients must be finite")
        if abs(coeffs.sum() - 1.0) > NORMALIZATION_TOLERANCE:
            raise MalformedPsfError(f"coefficients sum to {coeffs.sum()!r}, expected 1")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Psf):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.coeffs, other.coeffs)

    @classmethod
    def from_array(cls, values: np.ndarray, dims: Optional[int] = None) -> "Psf":
        """
        Build a PSF from raw weights, normalizing them to unit sum.

        A 1D array (or a single-row 2D array when `dims` is not given) is a 1D PSF. A
        non-square 2D grid with odd extents is zero-padded to a square around its center.

        Raises:
            MalformedPsfError: If an extent is even or a value is not finite.
            DegeneratePsfError: If the weights sum to zero.
        """
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            values = values[np.newaxis, :]
            dims = 1
        if values.ndim != 2 or values.size == 0:
            raise MalformedPsfError(f"expected a 1D or 2D grid, got shape {values.shape}")
        if dims is None:
            dims = 1 if values.shape[0] == 1 else 2
        if any(extent % 2 == 0 for extent in values.shape):
            raise MalformedPsfError(f"PSF grid must have odd extent, got {values.shape[0]} x {values.shape[1]}")
        if not np.all(np.isfinite(values)):
            raise MalformedPsfError("PSF coefficients must be finite")
        if dims == 2 and values.shape[0] != values.shape[1]:
            extent = max(values.shape)
            pad_rows = (extent - values.shape[0]) // 2
            pad_cols = (extent - values.shape[1]) // 2
            values = np.pad(values, ((pad_rows, pad_rows), (pad_cols, pad_cols)))

        total = values.sum()
        if abs(total) <= 1e-14 * max(np.abs(values).sum(), np.finfo(float).tiny):
            raise DegeneratePsfError("PSF coefficients sum to zero")
        normalized = abs(total - 1.0) > NORMALIZATION_TOLERANCE
        if normalized:
            logger.warning(f"PSF coefficients sum to {total!r}; dividing by the sum")
            values = values / total
        return cls(values, dims, normalized=normalized)

    @property
    def m(self) -> int:
        """
        Half-bandwidth.
        """
        return (self.coeffs.shape[1] - 1) // 2

    @property
    def kernel(self) -> np.ndarray:
        """
        Coefficients shaped like the signals they blur: 1D for dims=1, 2D for dims=2.
        """
        return self.coeffs[0] if self.dims == 1 else self.coeffs

    @property
    def abs_sum(self) -> float:
        """
        sum_j |h_j|, an upper bound of |f| and of the spectral norm of every blur matrix.
        """
        return float(np.abs(self.coeffs).sum())

    def coefficient(self, *j: int) -> float:
        """
        h_j (1D) or h_{j1,j2} (2D); zero outside the band.
        """
        if len(j) != self.dims:
            raise UsageError(f"expected {self.dims} indices, got {len(j)}", field="j")
        m = self.m
        if any(abs(index) > m for index in j):
            return 0.0
        if self.dims == 1:
            return float(self.coeffs[0, m + j[0]])
        return float(self.coeffs[m + j[0], m + j[1]])


def load_psf(text: str) -> Psf:
    """
    Parse the PSF text format: rows of whitespace-separated decimals, odd row and column
    counts, center at the middle cell. A single row is a 1D PSF.

    Raises:
        PsfParseError: On a non-numeric token.
        MalformedPsfError: On ragged rows, even extents or non-finite values.
        DegeneratePsfError: If the coefficients sum to zero.
    """
    rows = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        try:
            rows.append([float(token) for token in tokens])
        except ValueError as e:
            raise PsfParseError(f"line {line_number}: {e}")
    if not rows:
        raise MalformedPsfError("PSF file holds no coefficients")
    if len({len(row) for row in rows}) != 1:
        raise MalformedPsfError("PSF rows have different lengths")
    return Psf.from_array(np.array(rows), dims=1 if len(rows) == 1 else 2)


def read_psf(path: Union[str, Path]) -> Psf:
    """
    Load a PSF file from disk.
    """
    return load_psf(Path(path).read_text())


def format_psf(p: Psf) -> str:
    """
    Render a PSF in the text format read by `load_psf`.
    """
    return "".join(" ".join(f"{value:.17g}" for value in row) + "\n" for row in p.coeffs)


def with_dims(p: Psf, dims: int) -> Psf:
    """
    The same coefficients as a PSF of `dims` dimensions. A 1D PSF becomes a 2D PSF blurring within
    each row; a 2D PSF converts to 1D only when it is a single cell.

    Raises:
        MalformedPsfError: If a 2D PSF with m > 0 is converted to 1D.
    """
    if p.dims == dims:
        return p
    if dims == 2:
        return Psf.from_array(p.coeffs, dims=2)
    if p.m == 0:
        return Psf.from_array(p.coeffs, dims=1)
    raise MalformedPsfError(f"a {p.coeffs.shape[0]}x{p.coeffs.shape[1]} PSF cannot blur 1D signals")


def crop_psf(p: Psf, m_new: int) -> Psf:
    """
    Keep the central (2 m_new + 1)-window and renormalize it to unit sum.

    Raises:
        InvalidCropError: If m_new is negative or larger than the PSF's half-bandwidth.
        DegeneratePsfError: If the retained window sums to zero.
    """
    if m_new < 0 or m_new > p.m:
        raise InvalidCropError(f"cannot crop a PSF of half-bandwidth {p.m} to {m_new}")
    lo, hi = p.m - m_new, p.m + m_new + 1
    window = p.coeffs[:, lo:hi] if p.dims == 1 else p.coeffs[lo:hi, lo:hi]
    return Psf.from_array(window, dims=p.dims)


def is_centrosymmetric(p: Psf, atol: float = 0.0) -> bool:
    """
    True if h_{-j} = h_j for every j.
    """
    return bool(np.allclose(p.coeffs, p.coeffs[::-1, ::-1], rtol=0.0, atol=atol))


def _offsets(p: Psf) -> np.ndarray:
    return np.arange(-p.m, p.m + 1)


def _as_nodes(p: Psf, nodes: Nodes) -> Tuple[int, ...]:
    nodes = (int(nodes),) * p.dims if np.isscalar(nodes) else tuple(int(n) for n in nodes)
    if len(nodes) != p.dims or any(n < 1 for n in nodes):
        raise UsageError(f"expected {p.dims} node counts >= 1, got {nodes}", field="nodes")
    return nodes


def _phase(nodes: int, offsets: np.ndarray) -> np.ndarray:
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    return np.exp(1j * np.outer(theta, offsets))


def eval_symbol(p: Psf, theta: Sequence[float]) -> complex:
    """
    Evaluate f(theta) = sum_j h_j exp(i <j, theta>).

    Args:
        p: The PSF.
        theta: Angles, one per dimension.

    Returns:
        The complex symbol value.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    if theta.shape != (p.dims,):
        raise UsageError(f"expected {p.dims} angles, got {theta.shape[0]}", field="theta")
    offsets = _offsets(p)
    row_phase = np.exp(1j * offsets * theta[0]) if p.dims == 2 else np.ones(1)
    col_phase = np.exp(1j * offsets * theta[-1])
    return complex(row_phase @ p.coeffs @ col_phase)


def symbol_grid(p: Psf, nodes: Nodes) -> np.ndarray:
    """
    f on the uniform grid theta_k = 2 pi k / nodes, k = 0..nodes-1, per dimension.

    Returns:
        Complex array of shape `nodes`.
    """
    nodes = _as_nodes(p, nodes)
    offsets = _offsets(p)
    cols = _phase(nodes[-1], offsets)
    if p.dims == 1:
        return cols @ p.coeffs[0]
    rows = _phase(nodes[0], offsets)
    return rows @ p.coeffs @ cols.T


def sample_abs_symbol(p: Psf, nodes: Nodes) -> np.ndarray:
    """
    Uniform sampling of |f|, sorted nondecreasing.
    """
    return np.sort(np.abs(symbol_grid(p, nodes)).ravel())


@dataclass(frozen=True)
class PsiSample:
    """
    Sorted samples of the ±|f| symbol, i.e. |f| and -|f| over one uniform grid.

    Attributes:
        values: 2 * prod(grid) sorted values, closed under negation.
        grid: Node count per dimension.
    """

    values: np.ndarray
    grid: Tuple[int, ...]

    def __len__(self) -> int:
        return len(self.values)


def sample_psi(p: Psf, nodes: Nodes) -> PsiSample:
    """
    Multiset {+|f(theta_k)|, -|f(theta_k)|} over the uniform grid, sorted.
    """
    magnitude = np.abs(symbol_grid(p, nodes)).ravel()
    return PsiSample(np.sort(np.concatenate([magnitude, -magnitude])), _as_nodes(p, nodes))


def symbol_range(p: Psf, nodes: Optional[Nodes] = None, chunk: int = 256) -> Tuple[float, float]:
    """
    (min |f|, max |f|) over a dense uniform grid, evaluated in row chunks to bound memory.

    Args:
        p: The PSF.
        nodes: Grid size per dimension. Default: 4096 in 1D, 1024 per dimension in 2D.
        chunk: Rows of the 2D grid evaluated at once.
    """
    if nodes is None:
        nodes = 4096 if p.dims == 1 else 1024
    nodes = _as_nodes(p, nodes)
    if p.dims == 1:
        magnitude = np.abs(symbol_grid(p, nodes))
        return float(magnitude.min()), float(magnitude.max())

    offsets = _offsets(p)
    rows = _phase(nodes[0], offsets)
    cols = _phase(nodes[1], offsets)
    lo, hi = np.inf, 0.0
    for start in range(0, nodes[0], chunk):
        magnitude = np.abs(rows[start : start + chunk] @ p.coeffs @ cols.T)
        lo, hi = min(lo, magnitude.min()), max(hi, magnitude.max())
    return float(lo), float(hi)


def make_psf(kind: Union[PsfKind, str], radius: int, dims: int = 2, seed: int = 0) -> Psf:
    """
    Synthetic PSF of half-bandwidth `radius`.

    - gaussian: isotropic Gaussian, centrosymmetric.
    - motion: one-sided camera-shake path that starts one pixel off the center along the last axis
      and then bends along the first, with weights decaying along the path. The center carries no
      weight for radius >= 1. Nonsymmetric.
    - speckle: fully developed speckle (exponential intensity statistics) under a Gaussian envelope,
      drawn from a seeded generator. Nonsymmetric.

    Args:
        kind: PSF family.
        radius: Half-bandwidth m >= 0.
        dims: 1 or 2.
        seed: Seed of the speckle pattern.
    """
    kind = PsfKind(kind)
    if radius < 0:
        raise UsageError(f"radius must be >= 0, got {radius}", field="psf_radius")
    if dims not in (1, 2):
        raise UsageError(f"dims must be 1 or 2, got {dims}", field="dims")
    offsets = np.arange(-radius, radius + 1)
    if dims == 1:
        rows, cols = np.zeros(1), offsets.astype(np.float64)
        shape = (1, offsets.size)
    else:
        rows, cols = np.meshgrid(offsets, offsets, indexing="ij")
        shape = rows.shape
    sigma = max(radius / 2.0, 0.5)
    envelope = np.exp(-(rows**2 + cols**2) / (2.0 * sigma**2))

    if kind is PsfKind.GAUSSIAN:
        weights = envelope
    elif kind is PsfKind.SPECKLE:
        rng = np.random.default_rng(seed)
        weights = rng.exponential(size=shape) * envelope
    else:
        weights = np.zeros(shape)
        samples = 8 * radius + 1
        t = np.linspace(0.0, 1.0, samples)
        start = min(1, radius)
        if dims == 1:
            path_rows = np.zeros(samples)
            path_cols = start + t * (radius - start)
        else:
            bend = 0.6
            path_rows = np.where(t < bend, 0.0, (t - bend) / (1.0 - bend) * (radius / 2.0))
            path_cols = np.where(t < bend, start + t / bend * (radius - start), radius)
        row_index = np.rint(path_rows).astype(int) + (radius if dims == 2 else 0)
        col_index = np.rint(path_cols).astype(int) + radius
        np.add.at(weights, (row_index, col_index), np.exp(-1.5 * t))
    return Psf.from_array(weights, dims=dims)
