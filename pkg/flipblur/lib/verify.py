"""
Oracle checks on the operator construction.

Each check is a function registered under a name; it returns a short detail string on
success and raises `CheckFailure` otherwise. `run_checks` runs a selection and collects
the outcomes.
"""

from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional

import numpy as np

from flipblur.lib.boundary_ops import BcKind, BlurOperator, OperatorSizeError, extend, flip_dense
from flipblur.lib.log import get_logger
from flipblur.lib.psf_symbol import Psf, PsfKind, make_psf
from flipblur.lib.spectral import asymmetry, is_hankel, numerical_rank, schatten_norm, singular_values_dense

logger = get_logger("flipblur.verify")

APPLY_TOLERANCE = 1e-13
SYMMETRY_TOLERANCE = 1e-13


class CheckFailure(AssertionError):
    """
    Raised by a check whose invariant does not hold.
    """


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


Check = Callable[[], str]

_CHECK_MAP: Dict[str, Check] = {}


def _register(name: str) -> Callable[[Check], Check]:
    def decorator(check: Check) -> Check:
        _CHECK_MAP[name] = check
        return check

    return decorator


def check_names() -> List[str]:
    return list(_CHECK_MAP)


def _expect(condition: bool, message: str):
    if not condition:
        raise CheckFailure(message)


def _random_psf(rng: np.random.Generator, m: int, dims: int) -> Psf:
    shape = (1, 2 * m + 1) if dims == 1 else (2 * m + 1, 2 * m + 1)
    return Psf.from_array(rng.random(shape) + 0.05, dims=dims)


def _shapes(dims: int, sizes: Iterable[int]):
    return [(n,) if dims == 1 else (n, n) for n in sizes]


###############################################################################


@_register("dense_apply_equivalence")
def _dense_apply_equivalence() -> str:
    rng = np.random.default_rng(1)
    worst = 0.0
    for bc in BcKind:
        for dims in (1, 2):
            for m in (1, 2):
                for shape in _shapes(dims, range(2 * m + 1, 9)):
                    op = BlurOperator(_random_psf(rng, m, dims), bc, shape)
                    img = rng.standard_normal(shape)
                    dense = op.assemble_dense()
                    worst = max(worst, float(np.abs(dense @ img.ravel() - op.apply(img).ravel()).max()))
    _expect(worst < APPLY_TOLERANCE, f"max deviation {worst:.3e}")
    return f"max deviation {worst:.3e}"


@_register("constant_preservation")
def _constant_preservation() -> str:
    rng = np.random.default_rng(2)
    worst = 0.0
    for bc in (BcKind.PERIODIC, BcKind.REFLECTIVE, BcKind.ANTIREFLECTIVE):
        for dims, shape in ((1, (9,)), (2, (7, 9))):
            op = BlurOperator(_random_psf(rng, 2, dims), bc, shape)
            img = np.full(shape, 0.37)
            worst = max(worst, float(np.abs(op.apply(img) - img).max()))
    _expect(worst < APPLY_TOLERANCE, f"max deviation {worst:.3e}")
    return f"max deviation {worst:.3e}"


@_register("antireflective_ramp_preservation")
def _antireflective_ramp_preservation() -> str:
    rng = np.random.default_rng(3)
    worst = 0.0
    for m in (1, 2, 3):
        op = BlurOperator(_random_psf(rng, m, 1), BcKind.ANTIREFLECTIVE, (16,))
        out = op.apply(0.3 + 0.05 * np.arange(16))
        worst = max(worst, float(np.abs(np.diff(out, 2)).max()), abs(float(out[1] - out[0]) - 0.05))
    _expect(worst < 1e-12, f"max second difference {worst:.3e}")
    return f"max second difference {worst:.3e}"


def _corner_deviation(img: np.ndarray, padded: np.ndarray, m: int) -> float:
    """
    Deviation of the top-left pad cells from the anti-reflection rules, 0-based:
    corners 4 f[0,0] - 2 f[0,j] - 2 f[i,0] + f[i,j], edges 2 f[0,c] - f[i,c] and 2 f[r,0] - f[r,j].
    """
    worst = 0.0
    rows, cols = img.shape
    for i in range(1, m + 1):
        for j in range(1, m + 1):
            expected = 4 * img[0, 0] - 2 * img[0, j] - 2 * img[i, 0] + img[i, j]
            worst = max(worst, abs(padded[m - i, m - j] - expected))
        worst = max(worst, float(np.abs(padded[m - i, m : m + cols] - (2 * img[0] - img[i])).max()))
        worst = max(worst, float(np.abs(padded[m : m + rows, m - i] - (2 * img[:, 0] - img[:, i])).max()))
    return worst


@_register("antireflective_corner_formula")
def _antireflective_corner_formula() -> str:
    rng = np.random.default_rng(4)
    worst = 0.0
    for m, shape in ((1, (2, 2)), (1, (5, 6)), (2, (5, 5)), (3, (7, 8))):
        img = rng.standard_normal(shape)
        padded = extend(img, m, BcKind.ANTIREFLECTIVE)
        # every corner becomes the top-left one after flipping both image and padding
        for axes in ((), (0,), (1,), (0, 1)):
            worst = max(worst, _corner_deviation(np.flip(img, axes), np.flip(padded, axes), m))
    corner = extend(np.array([[1.0, 2.0], [3.0, 4.0]]), 1, BcKind.ANTIREFLECTIVE)[0, 0]
    _expect(worst < 1e-12 and corner == -2.0, f"max deviation {worst:.3e}, corner of [[1,2],[3,4]] is {corner}")
    return f"max deviation {worst:.3e}"


@_register("flipped_zero_periodic_symmetric")
def _flipped_zero_periodic_symmetric() -> str:
    rng = np.random.default_rng(5)
    worst = 0.0
    for bc in (BcKind.ZERO, BcKind.PERIODIC):
        for dims, shape in ((1, (11,)), (2, (6, 7))):
            dense = flip_dense(BlurOperator(_random_psf(rng, 2, dims), bc, shape).assemble_dense())
            worst = max(worst, float(np.abs(dense - dense.T).max()))
    _expect(worst < SYMMETRY_TOLERANCE, f"max asymmetry {worst:.3e}")
    return f"max asymmetry {worst:.3e}"


@_register("reflective_symmetric_iff_centrosymmetric")
def _reflective_symmetric_iff_centrosymmetric() -> str:
    symmetric = make_psf(PsfKind.GAUSSIAN, 2, dims=2)
    nonsymmetric = make_psf(PsfKind.MOTION, 2, dims=2)
    gap_symmetric = asymmetry(BlurOperator(symmetric, BcKind.REFLECTIVE, (8, 8)).assemble_dense())
    gap_nonsymmetric = asymmetry(BlurOperator(nonsymmetric, BcKind.REFLECTIVE, (8, 8)).assemble_dense())
    _expect(
        gap_symmetric < SYMMETRY_TOLERANCE and gap_nonsymmetric > 1e-3,
        f"asymmetry {gap_symmetric:.3e} (centrosymmetric), {gap_nonsymmetric:.3e} (motion)",
    )
    return f"asymmetry {gap_symmetric:.1e} vs {gap_nonsymmetric:.3f}"


@_register("correction_norm_bound")
def _correction_norm_bound() -> str:
    worst = 0.0
    for kind in (PsfKind.GAUSSIAN, PsfKind.MOTION):
        psf = make_psf(kind, 3, dims=1)
        for bc in (BcKind.PERIODIC, BcKind.REFLECTIVE):
            for n in (16, 32, 64):
                norm = schatten_norm(BlurOperator(psf, bc, (n,)).correction_part(), np.inf)
                worst = max(worst, norm / psf.abs_sum)
    _expect(worst <= 1 + 1e-12, f"spectral norm reaches {worst:.6f} sum|h|")
    return f"spectral norm <= {worst:.6f} sum|h|"


@_register("reflective_correction_rank")
def _reflective_correction_rank() -> str:
    rng = np.random.default_rng(6)
    for m in (1, 2, 3):
        for n in (2 * m + 1, 16, 33):
            correction = BlurOperator(_random_psf(rng, m, 1), BcKind.REFLECTIVE, (n,)).correction_part()
            rank = numerical_rank(singular_values_dense(correction))
            _expect(rank <= 2 * m, f"rank {rank} > {2 * m} at n={n}, m={m}")
    return "rank <= 2m"


@_register("correction_zero_pattern")
def _correction_zero_pattern() -> str:
    rng = np.random.default_rng(7)
    for m in (1, 2):
        n = 12
        psf = _random_psf(rng, m, 1)
        # anti-reflection adds the first and last columns next to its Hankel corners
        for bc, shift in ((BcKind.REFLECTIVE, 0), (BcKind.ANTIREFLECTIVE, 1)):
            correction = BlurOperator(psf, bc, (n,)).correction_part()
            mask = np.zeros((n, n), dtype=bool)
            mask[:m, : m + shift] = True
            mask[n - m :, n - m - shift :] = True
            _expect(not np.any(correction[~mask]), f"{bc.value} correction leaks outside its corner blocks, m={m}")
            head = correction[:m, shift : m + shift]
            tail = correction[n - m :, n - m - shift : n - shift]
            _expect(is_hankel(head) and is_hankel(tail), f"{bc.value} corner blocks are not Hankel, m={m}")
    return "Hankel corner blocks only"


@_register("smallest_legal_size")
def _smallest_legal_size() -> str:
    rng = np.random.default_rng(8)
    for bc in BcKind:
        for dims in (1, 2):
            shape = (5,) * dims
            op = BlurOperator(_random_psf(rng, 2, dims), bc, shape)
            img = rng.standard_normal(shape)
            deviation = float(np.abs(op.assemble_dense() @ img.ravel() - op.apply(img).ravel()).max())
            _expect(deviation < APPLY_TOLERANCE, f"{bc.value} {dims}D n=5, m=2: deviation {deviation:.3e}")
            try:
                BlurOperator(op.psf, bc, (4,) * dims)
            except OperatorSizeError:
                pass
            else:
                raise CheckFailure(f"{bc.value} {dims}D accepted n=4 with m=2")
    return "n=5, m=2 legal, n=4 rejected"


@_register("flip_preserves_singular_values")
def _flip_preserves_singular_values() -> str:
    psf = make_psf(PsfKind.SPECKLE, 2, dims=2, seed=3)
    worst = 0.0
    for bc in BcKind:
        dense = BlurOperator(psf, bc, (8, 8)).assemble_dense()
        deviation = np.abs(singular_values_dense(flip_dense(dense)) - singular_values_dense(dense)).max()
        worst = max(worst, float(deviation))
    _expect(worst < 1e-12, f"max deviation {worst:.3e}")
    return f"max deviation {worst:.3e}"


###############################################################################


def run_check(name: str) -> CheckResult:
    """
    Run one registered check. Unexpected exceptions count as failures.
    """
    try:
        detail = _CHECK_MAP[name]()
    except CheckFailure as e:
        return CheckResult(name, False, str(e))
    except Exception as e:
        logger.exception(f"Check {name} raised")
        return CheckResult(name, False, f"{type(e).__name__}: {e}")
    return CheckResult(name, True, detail)


def run_checks(names: Optional[Iterable[str]] = None) -> List[CheckResult]:
    """
    Run the named checks (default: all) in registration order.

    Raises:
        KeyError: For an unknown check name.
    """
    selected = list(_CHECK_MAP) if names is None else list(names)
    for name in selected:
        if name not in _CHECK_MAP:
            raise KeyError(name)
    results = []
    for name in selected:
        result = run_check(name)
        logger.info(f"{name}: {'pass' if result.passed else 'FAIL'} ({result.detail})")
        results.append(result)
    return results
