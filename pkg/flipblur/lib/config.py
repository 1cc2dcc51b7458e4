"""
Experiment configuration: a flat JSON file overridden by command-line flags.
"""

import dataclasses
import json
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from flipblur.lib.boundary_ops import DEFAULT_DENSE_CAP, BcKind
from flipblur.lib.errors import UsageError
from flipblur.lib.image import ImageKind
from flipblur.lib.krylov import SolverKind
from flipblur.lib.metrics import PsnrConvention
from flipblur.lib.psf_symbol import PsfKind

THREADS_ENV = "FLIPBLUR_THREADS"


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One experiment of the restoration or spectral protocol.

    Attributes:
        psf_path: PSF text file. When None, a synthetic PSF of `psf_kind` and `psf_radius` is used.
        psf_kind: Synthetic PSF family.
        psf_radius: Half-bandwidth of the synthetic PSF.
        psf_crop: Half-bandwidth to crop the PSF to, keeping its central window. None keeps it whole.
        image_path: Ground-truth image (PGM or .npy). When None, a synthetic `synth` image is used.
        synth: Synthetic image family.
        size: Image shape for synthetic images and operators.
        sizes: Image shapes swept by the spectrum command.
        bc: Boundary condition.
        flip: Solve the flipped system Y A f = Y g.
        solver: Krylov solver.
        solvers: Solvers run by the grid command.
        gamma: Relative noise level.
        seed: Noise seed (also seeds speckle PSFs).
        tau: Discrepancy safety factor.
        max_iter: Iteration budget.
        output_dir: Directory receiving the outputs.
        input_dir: Directory holding blur outputs for deblurring. Default: `output_dir`.
        dense_cap: Largest dense matrix order.
        psnr_convention: PSNR numerator convention.
        halt_at_discrepancy: Stop at the discrepancy iteration instead of running to `max_iter`.
    """

    psf_path: Optional[str] = None
    psf_kind: PsfKind = PsfKind.MOTION
    psf_radius: int = 3
    psf_crop: Optional[int] = None
    image_path: Optional[str] = None
    synth: ImageKind = ImageKind.BLOB
    size: Tuple[int, ...] = (64, 64)
    sizes: Tuple[Tuple[int, ...], ...] = ((12, 12), (20, 20))
    bc: BcKind = BcKind.REFLECTIVE
    flip: bool = True
    solver: SolverKind = SolverKind.GMRES
    solvers: Tuple[SolverKind, ...] = (SolverKind.GMRES,)
    gamma: float = 0.01
    seed: int = 0
    tau: float = 1.0
    max_iter: int = 100
    output_dir: str = "out"
    input_dir: Optional[str] = None
    dense_cap: int = DEFAULT_DENSE_CAP
    psnr_convention: PsnrConvention = PsnrConvention.TOTAL
    halt_at_discrepancy: bool = False

    @property
    def source_dir(self) -> Path:
        return Path(self.input_dir if self.input_dir is not None else self.output_dir)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _shape(value: Any, name: str) -> Tuple[int, ...]:
    if isinstance(value, (int, str)):
        value = [int(part) for part in str(value).lower().replace("x", ",").split(",") if part]
    shape = tuple(int(n) for n in value)
    if len(shape) not in (1, 2) or any(n < 1 for n in shape):
        raise UsageError(f"expected 1 or 2 positive dimensions, got {shape}", field=name)
    return shape


def _coerce(name: str, value: Any) -> Any:
    """
    Convert a raw JSON or flag value to the type of field `name`.
    """
    default = _FIELDS[name].default
    try:
        if name == "size":
            return _shape(value, name)
        if name == "sizes":
            return tuple(_shape(item, name) for item in value)
        if name == "solvers":
            return tuple(SolverKind(item) for item in ([value] if isinstance(value, str) else value))
        if isinstance(default, Enum):
            return type(default)(value)
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ValueError(f"expected true or false, got {value!r}")
            return value
        if isinstance(default, int) or name == "psf_crop":
            if value is None:
                return None
            if isinstance(value, bool) or float(value) != int(value):
                raise ValueError(f"expected an integer, got {value!r}")
            return int(value)
        if isinstance(default, float):
            return float(value)
        return None if value is None else str(value)
    except (TypeError, ValueError) as e:
        raise UsageError(str(e), field=name)


def _validate(config: ExperimentConfig):
    for name in ("psf_path", "image_path"):
        path = getattr(config, name)
        if path is not None and not Path(path).is_file():
            raise UsageError(f"file not found: {path}", field=name)
    if not config.gamma >= 0:
        raise UsageError(f"must be >= 0, got {config.gamma}", field="gamma")
    if not config.tau >= 1:
        raise UsageError(f"must be >= 1, got {config.tau}", field="tau")
    if config.max_iter < 1:
        raise UsageError(f"must be >= 1, got {config.max_iter}", field="max_iter")
    if config.psf_radius < 0:
        raise UsageError(f"must be >= 0, got {config.psf_radius}", field="psf_radius")
    if config.psf_crop is not None and config.psf_crop < 0:
        raise UsageError(f"must be >= 0, got {config.psf_crop}", field="psf_crop")
    if config.dense_cap < 1:
        raise UsageError(f"must be >= 1, got {config.dense_cap}", field="dense_cap")
    if not config.solvers:
        raise UsageError("at least one solver is required", field="solvers")


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read a flat JSON object of configuration values.

    Raises:
        UsageError: If the file is missing, not JSON, or not a flat object.
    """
    try:
        values = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"file not found: {path}", field="config")
    except json.JSONDecodeError as e:
        raise UsageError(f"invalid JSON in {path}: {e}", field="config")
    if not isinstance(values, dict):
        raise UsageError(f"{path} must contain a JSON object", field="config")
    return values


def build_config(file_values: Optional[Mapping[str, Any]] = None, **overrides: Any) -> ExperimentConfig:
    """
    Build a validated configuration. Overrides set to None are ignored, so unset flags keep file values.

    Raises:
        UsageError: For unknown keys or invalid values, naming the field.
    """
    values: Dict[str, Any] = {}
    for source in (file_values or {}, {key: value for key, value in overrides.items() if value is not None}):
        for name, value in source.items():
            if name not in _FIELDS:
                raise UsageError("unknown configuration key", field=name)
            values[name] = _coerce(name, value)
    config = ExperimentConfig(**values)
    _validate(config)
    return config


def get_thread_count() -> int:
    """
    Worker threads allowed by the FLIPBLUR_THREADS environment variable. Default: 1.
    """
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        count = int(raw)
    except ValueError:
        raise UsageError(f"expected a positive integer, got {raw!r}", field=THREADS_ENV)
    if count < 1:
        raise UsageError(f"expected a positive integer, got {raw!r}", field=THREADS_ENV)
    return count
