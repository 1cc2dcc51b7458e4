"""
Grayscale image encoding and decoding utilities, and synthetic test images.
"""

from abc import ABC, abstractmethod
from enum import Enum
from pathlib import Path
from typing import Dict, Sequence, Tuple, Type, Union

import cv2
import numpy as np

from flipblur.lib.errors import UsageError

MAXVALS = (255, 65535)


class PgmFormatError(UsageError):
    """
    Raised for a malformed PGM header or pixel payload.
    """


class UnsupportedEncodingError(UsageError):
    """
    Exception raised when an unsupported PGM encoding is requested.
    """

    def __init__(self, encoding: object):
        super().__init__(f"Unsupported PGM encoding: {encoding}", field="encoding")


class PgmEncoding(Enum):
    """
    PGM flavours: plain (ASCII) and raw (binary).
    """

    P2 = "P2"
    P5 = "P5"


class PgmEncoder(ABC):
    """
    Abstract class for PGM encoders.
    """

    @abstractmethod
    def encode(self, data: np.ndarray) -> bytes:
        """
        Encode an unsigned integer image (uint8 for maxval 255, uint16 for 65535).

        Args:
            data: The quantized image, shape (height, width).

        Returns:
            The encoded PGM file content.
        """
        raise NotImplementedError


class OpenCVPgmEncoder(PgmEncoder):
    binary = True

    def encode(self, data: np.ndarray) -> bytes:
        ok, buffer = cv2.imencode(".pgm", data, [cv2.IMWRITE_PXM_BINARY, int(self.binary)])
        if not ok:
            raise PgmFormatError(f"OpenCV could not encode an image of shape {data.shape} and dtype {data.dtype}")
        return buffer.tobytes()


class AsciiPgmEncoder(OpenCVPgmEncoder):
    binary = False


class BinaryPgmEncoder(OpenCVPgmEncoder):
    binary = True


_ENCODER_MAP: Dict[PgmEncoding, Type[PgmEncoder]] = {}


def _register(encoding: PgmEncoding, encoder: Type[PgmEncoder]):
    _ENCODER_MAP[encoding] = encoder


def get_encoder(encoding: Union[PgmEncoding, str]) -> Type[PgmEncoder]:
    """
    Get the PGM encoder class for the given encoding.

    Raises:
        UnsupportedEncodingError: If the encoding is not supported.
    """
    try:
        return _ENCODER_MAP[PgmEncoding(encoding)]
    except (KeyError, ValueError):
        raise UnsupportedEncodingError(encoding)


_register(PgmEncoding.P2, AsciiPgmEncoder)
_register(PgmEncoding.P5, BinaryPgmEncoder)


def _header(data: bytes) -> Tuple[PgmEncoding, int, int, int]:
    """
    Parse magic, width, height and maxval, skipping '#' comments.
    """
    tokens = []
    position = 0
    while len(tokens) < 4 and position < len(data):
        byte = data[position : position + 1]
        if byte == b"#":
            end = data.find(b"\n", position)
            position = len(data) if end < 0 else end + 1
        elif byte.isspace():
            position += 1
        else:
            start = position
            while position < len(data) and not data[position : position + 1].isspace() and data[position : position + 1] != b"#":
                position += 1
            tokens.append(data[start:position])
    if len(tokens) < 4:
        raise PgmFormatError("truncated PGM header")
    try:
        encoding = PgmEncoding(tokens[0].decode("ascii"))
    except (UnicodeDecodeError, ValueError):
        raise PgmFormatError(f"bad magic number {tokens[0][:8]!r}, expected P2 or P5")
    try:
        width, height, maxval = (int(token) for token in tokens[1:])
    except ValueError:
        raise PgmFormatError("non-numeric PGM header field")
    if width < 1 or height < 1:
        raise PgmFormatError(f"bad dimensions {width}x{height}")
    if maxval not in MAXVALS:
        raise PgmFormatError(f"maxval {maxval} is not supported, expected one of {MAXVALS}")
    return encoding, width, height, maxval


def read_pgm(data: bytes) -> np.ndarray:
    """
    Decode a P2 or P5 PGM into a float image in [0, 1].

    Raises:
        PgmFormatError: On a bad magic number, header or payload.
    """
    _, width, height, maxval = _header(data)
    decoded = cv2.imdecode(np.frombuffer(data, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if decoded is None:
        raise PgmFormatError("OpenCV could not decode the PGM payload")
    if decoded.shape[:2] != (height, width):
        raise PgmFormatError(f"payload shape {decoded.shape[:2]} does not match header {height}x{width}")
    if decoded.ndim == 3:
        decoded = decoded[:, :, 0]
    return decoded.astype(np.float64) / maxval


def quantize(img: np.ndarray, maxval: int = 255) -> np.ndarray:
    """
    Clip to [0, 1] and round to the integer grid {0, ..., maxval}.
    """
    if maxval not in MAXVALS:
        raise PgmFormatError(f"maxval {maxval} is not supported, expected one of {MAXVALS}")
    dtype = np.uint8 if maxval == 255 else np.uint16
    return np.rint(np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * maxval).astype(dtype)


def write_pgm(img: np.ndarray, maxval: int = 255, encoding: Union[PgmEncoding, str] = PgmEncoding.P5) -> bytes:
    """
    Encode a float image as PGM. 1D images are written as a single row.

    Args:
        img: Image, nominally in [0, 1]; values outside are clipped.
        maxval: 255 (8-bit) or 65535 (16-bit).
        encoding: P2 (ASCII) or P5 (binary).
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 1:
        img = img.reshape(1, -1)
    if img.ndim != 2 or img.size == 0:
        raise PgmFormatError(f"cannot write an image of shape {img.shape} as PGM")
    return get_encoder(encoding)().encode(quantize(img, maxval))


def load_image(path: Union[str, Path]) -> np.ndarray:
    """
    Load an image from a `.npy` array or a PGM file.
    """
    path = Path(path)
    if path.suffix == ".npy":
        return np.load(path, allow_pickle=False).astype(np.float64)
    return read_pgm(path.read_bytes())


###############################################################################


class ImageKind(Enum):
    """
    Synthetic image families.
    """

    RAMP = "ramp"
    CHECKER = "checker"
    BLOB = "blob"


def _unit_coordinates(index: np.ndarray, shape: Tuple[int, ...]) -> Tuple[np.ndarray, ...]:
    # 0 on the first and 1 on the last pixel of the field of view
    return tuple(index[axis] / (n - 1) if n > 1 else np.full(index.shape[1:], 0.5) for axis, n in enumerate(shape))


def synth_image(kind: Union[ImageKind, str], shape: Sequence[int], margin: int = 0) -> np.ndarray:
    """
    Deterministic test image with values in [0, 1] on a field of view of `shape`.

    With a margin the pattern continues `margin` pixels beyond every side of the field of
    view; cropping the margin gives back the `margin=0` image.

    - ramp: linear in the index sum, 0 at the first pixel and 1 at the last.
    - checker: alternating squares of side max(1, min(shape) // 8).
    - blob: two Gaussian bumps on a dark background, normalized to peak 1; below 1e-3 on the boundary.
    """
    kind = ImageKind(kind)
    shape = tuple(int(n) for n in shape)
    if len(shape) not in (1, 2) or any(n < 1 for n in shape):
        raise UsageError(f"expected a positive 1D or 2D shape, got {shape}", field="size")
    if margin < 0:
        raise UsageError(f"must be >= 0, got {margin}", field="margin")
    index = np.indices(tuple(n + 2 * margin for n in shape)) - margin

    if kind is ImageKind.RAMP:
        span = sum(n - 1 for n in shape)
        return index.sum(axis=0) / span if span > 0 else np.zeros(index.shape[1:])
    if kind is ImageKind.CHECKER:
        side = max(1, min(shape) // 8)
        return ((index // side).sum(axis=0) % 2).astype(np.float64)

    coords = _unit_coordinates(index, shape)
    bumps = ((1.0, (0.4, 0.42), 0.1), (0.6, (0.66, 0.64), 0.08))
    img = np.zeros(index.shape[1:])
    for amplitude, center, sigma in bumps:
        squared = sum((c - center[axis]) ** 2 for axis, c in enumerate(coords))
        img += amplitude * np.exp(-squared / (2.0 * sigma**2))
    return img / img[tuple(slice(margin, margin + n) for n in shape)].max()
