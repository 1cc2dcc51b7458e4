"""
Blur operators under zero, periodic, reflective and anti-reflective boundary conditions.

The operator is applied matrix-free by extending the image with the boundary rule and
convolving with the PSF (out_i = sum_k h_k padded_{i-k}). The dense matrix is assembled
by applying the operator to canonical basis images, so both paths share one source of
truth for every boundary rule. Images are vectorized in row-major order; the flip
(backward identity) reverses that order.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy import signal

from flipblur.lib.errors import UsageError
from flipblur.lib.log import LogMixin
from flipblur.lib.psf_symbol import Psf

DEFAULT_DENSE_CAP = 16384
COLUMN_CHUNK = 256


class PadTooWideError(UsageError):
    """
    Raised when the requested padding is not smaller than every image dimension.
    """


class DimensionError(UsageError):
    """
    Raised when an image does not match the operator's shape or dimensionality.
    """


class OperatorSizeError(UsageError):
    """
    Raised when an image dimension is smaller than the PSF support 2m+1.
    """


class SizeCapExceededError(UsageError):
    """
    Raised when a dense matrix would exceed the configured size cap.
    """

    def __init__(self, size: int, cap: int):
        super().__init__(f"dense matrix of order {size} exceeds the cap of {cap}", field="dense_cap")


class BcKind(Enum):
    """
    Boundary conditions.
    """

    ZERO = "zero"
    PERIODIC = "periodic"
    REFLECTIVE = "reflective"
    ANTIREFLECTIVE = "antireflective"


Padder = Callable[[np.ndarray, Tuple[Tuple[int, int], ...]], np.ndarray]

_PADDER_MAP: Dict[BcKind, Padder] = {}


def _register(bc: BcKind, padder: Padder):
    _PADDER_MAP[bc] = padder


def get_padder(bc: BcKind) -> Padder:
    """
    Get the padding rule for a boundary condition.
    """
    return _PADDER_MAP[BcKind(bc)]


###############################################################################
# numpy pads one axis at a time over the already extended array, so in 2D the
# corners come out as the anti-reflection of the padded edges:
# f_{1-i,1-j} = 4 f_{1,1} - 2 f_{1,j+1} - 2 f_{i+1,1} + f_{i+1,j+1}.

_register(BcKind.ZERO, lambda data, width: np.pad(data, width, mode="constant"))
_register(BcKind.PERIODIC, lambda data, width: np.pad(data, width, mode="wrap"))
# f_0 = f_1: whole-sample reflection repeats the edge value
_register(BcKind.REFLECTIVE, lambda data, width: np.pad(data, width, mode="symmetric"))
# f_{1-j} = 2 f_1 - f_{j+1}
_register(BcKind.ANTIREFLECTIVE, lambda data, width: np.pad(data, width, mode="reflect", reflect_type="odd"))


def extend(img: np.ndarray, m: int, bc: BcKind, ndim: Optional[int] = None) -> np.ndarray:
    """
    Pad the trailing `ndim` axes of an image (or a batch of images) by m cells per side.

    Args:
        img: Image of shape (n,) or (n1, n2), optionally with leading batch axes.
        m: Cells added on each side of each image axis.
        bc: Boundary condition defining the padded values.
        ndim: Number of trailing image axes. Default: all axes.

    Returns:
        The padded array; the interior equals `img`.

    Raises:
        PadTooWideError: If m is negative or not smaller than every image dimension.
    """
    img = np.asarray(img, dtype=np.float64)
    ndim = img.ndim if ndim is None else ndim
    shape = img.shape[img.ndim - ndim :]
    if m < 0 or m >= min(shape):
        raise PadTooWideError(f"cannot pad an image of shape {shape} by {m}")
    width = ((0, 0),) * (img.ndim - ndim) + ((m, m),) * ndim
    return get_padder(bc)(img, width)


def flip_image(img: np.ndarray, ndim: int) -> np.ndarray:
    """
    Reverse the trailing `ndim` axes, i.e. reverse the vectorized image.
    """
    return np.flip(img, axis=tuple(range(img.ndim - ndim, img.ndim)))


def flip_dense(matrix: np.ndarray) -> np.ndarray:
    """
    Y M: reverse the row order of a dense matrix.
    """
    return np.ascontiguousarray(np.asarray(matrix)[::-1, :])


@dataclass(frozen=True)
class BlurOperator(LogMixin):
    """
    Square blur operator of a PSF under a boundary condition on images of a fixed shape.

    Attributes:
        psf: The point-spread function.
        bc: Boundary condition.
        shape: Image shape, (n,) for 1D or (n1, n2) for 2D.
    """

    psf: Psf
    bc: BcKind
    shape: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "bc", BcKind(self.bc))
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        if len(self.shape) != self.psf.dims:
            raise DimensionError(f"a {self.psf.dims}D PSF cannot blur images of shape {self.shape}")
        support = 2 * self.psf.m + 1
        if any(n < support for n in self.shape):
            raise OperatorSizeError(f"image shape {self.shape} is smaller than the PSF support {support}")

    @property
    def size(self) -> int:
        """
        Order N of the matrix, the number of pixels.
        """
        return int(np.prod(self.shape))

    @property
    def ndim(self) -> int:
        return len(self.shape)

    def _check(self, img: np.ndarray) -> np.ndarray:
        img = np.asarray(img, dtype=np.float64)
        if img.shape[img.ndim - self.ndim :] != self.shape:
            raise DimensionError(f"expected images of shape {self.shape}, got {img.shape}")
        return img

    def apply(self, img: np.ndarray) -> np.ndarray:
        """
        Blur an image (or a batch of images along leading axes).

        Returns:
            Images of the same shape: out_i = sum_{|k|<=m} h_k padded_{i-k}.

        Raises:
            DimensionError: If the trailing axes do not match the operator shape.
        """
        img = self._check(img)
        padded = extend(img, self.psf.m, self.bc, ndim=self.ndim)
        kernel = self.psf.kernel.reshape((1,) * (img.ndim - self.ndim) + self.psf.kernel.shape)
        return signal.convolve(padded, kernel, mode="valid", method="direct")

    def flip_apply(self, img: np.ndarray) -> np.ndarray:
        """
        Y A img: the blurred image with its vectorized entries in reverse order.
        """
        return flip_image(self.apply(img), self.ndim)

    def assemble_dense(self, cap: int = DEFAULT_DENSE_CAP, workers: int = 1) -> np.ndarray:
        """
        Dense N x N matrix whose column j is apply(e_j).

        Args:
            cap: Largest admissible order N.
            workers: Threads evaluating chunks of basis columns.

        Raises:
            SizeCapExceededError: If N exceeds `cap`.
        """
        size = self.size
        if size > cap:
            raise SizeCapExceededError(size, cap)
        matrix = np.empty((size, size))

        def fill(start: int):
            stop = min(start + COLUMN_CHUNK, size)
            basis = np.zeros((stop - start, size))
            basis[np.arange(stop - start), np.arange(start, stop)] = 1.0
            columns = self.apply(basis.reshape((stop - start,) + self.shape))
            matrix[:, start:stop] = columns.reshape(stop - start, size).T

        starts = range(0, size, COLUMN_CHUNK)
        self.logger.debug(f"Assembling {self.bc.value} operator of order {size} with {workers} worker(s)")
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                list(executor.map(fill, starts))
        else:
            for start in starts:
                fill(start)
        return matrix

    def toeplitz_part(self, cap: int = DEFAULT_DENSE_CAP, workers: int = 1) -> np.ndarray:
        """
        Dense zero-boundary (multilevel Toeplitz) matrix T_n(f) of the same PSF and shape.
        """
        return BlurOperator(self.psf, BcKind.ZERO, self.shape).assemble_dense(cap, workers)

    def correction_part(self, cap: int = DEFAULT_DENSE_CAP, workers: int = 1) -> np.ndarray:
        """
        W_n = A_n - T_n(f), the boundary correction of this operator.
        """
        return self.assemble_dense(cap, workers) - self.toeplitz_part(cap, workers)


def apply(op: BlurOperator, img: np.ndarray) -> np.ndarray:
    """
    Blur `img` with `op`; see `BlurOperator.apply`.
    """
    return op.apply(img)


def flip_apply(op: BlurOperator, img: np.ndarray) -> np.ndarray:
    """
    Blur `img` with `op` and reverse the vectorized result.
    """
    return op.flip_apply(img)


def assemble_dense(op: BlurOperator, cap: int = DEFAULT_DENSE_CAP, workers: int = 1) -> np.ndarray:
    """
    Dense matrix of `op`; see `BlurOperator.assemble_dense`.
    """
    return op.assemble_dense(cap, workers)


def toeplitz_part(op: BlurOperator, cap: int = DEFAULT_DENSE_CAP, workers: int = 1) -> np.ndarray:
    """
    Dense zero-boundary matrix of `op`'s PSF and shape.
    """
    return op.toeplitz_part(cap, workers)


###############################################################################


def observe(psf: Psf, scene: np.ndarray) -> np.ndarray:
    """
    Blur a scene that reaches m pixels beyond the field of view on every side.

    Every output pixel is a weighted sum of true scene pixels, so the observation
    assumes no boundary condition. For a scene built as `extend(img, m, bc)` it equals
    `BlurOperator(psf, bc, img.shape).apply(img)`.

    Returns:
        The blurred field of view, m pixels per side smaller than the scene.

    Raises:
        DimensionError: If the scene and the PSF differ in dimension.
        OperatorSizeError: If the field of view is smaller than the PSF support.
    """
    scene = np.asarray(scene, dtype=np.float64)
    if scene.ndim != psf.dims:
        raise DimensionError(f"a {psf.dims}D PSF cannot blur a scene of shape {scene.shape}")
    support = 2 * psf.m + 1
    if any(n - 2 * psf.m < support for n in scene.shape):
        raise OperatorSizeError(f"scene shape {scene.shape} leaves a field of view smaller than the PSF support {support}")
    return signal.convolve(scene, psf.kernel, mode="valid", method="direct")


def field_of_view(scene: np.ndarray, m: int) -> np.ndarray:
    """
    The scene without its m-pixel margin.
    """
    return np.asarray(scene)[tuple(slice(m, n - m) for n in np.shape(scene))]
