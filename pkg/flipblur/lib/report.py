"""
Utilities for writing reproducible JSON and CSV reports.
"""

import csv
import dataclasses
import io
import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Sequence, Union

import numpy as np


def encode_value(value: Any) -> Any:
    """
    Encode a value as JSON-safe data.

    Dataclasses become dictionaries, enums their values, arrays and tuples lists, numpy scalars
    Python scalars. NaN becomes None and infinities the strings "inf" / "-inf".

    Args:
        value: Value to encode.

    Returns:
        Encoded value.
    """
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: encode_value(getattr(value, f.name)) for f in dataclasses.fields(value)}
    elif isinstance(value, Enum):
        return value.value
    elif isinstance(value, np.ndarray):
        return encode_value(value.tolist())
    elif isinstance(value, np.generic):
        return encode_value(value.item())
    elif isinstance(value, (list, tuple)):
        return list(map(encode_value, value))
    elif isinstance(value, dict):
        return {str(key): encode_value(item) for key, item in value.items()}
    elif isinstance(value, Path):
        return str(value)
    elif isinstance(value, complex):
        return [encode_value(value.real), encode_value(value.imag)]
    elif isinstance(value, float):
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
    return value


def encode_json(value: Any) -> str:
    """
    Encode a value as indented JSON with sorted keys and a trailing newline.
    """
    return json.dumps(encode_value(value), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path: Union[str, Path], value: Any):
    Path(path).write_text(encode_json(value))


def encode_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """
    Encode rows as CSV. Floats use repr, None an empty cell.
    """

    def cell(value: Any) -> str:
        value = encode_value(value)
        if value is None:
            return ""
        if isinstance(value, float):
            return repr(value)
        return str(value)

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([cell(value) for value in row])
    return buffer.getvalue()


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence[Any]]):
    Path(path).write_text(encode_csv(header, rows))
