"""
Minimum-residual Krylov solvers used as iterative regularization methods.

Both solvers start from the zero vector, record the residual norm of every iterate,
optionally its relative restoration error against a known truth, and stop when the
residual norm falls below tau * delta (discrepancy principle) or the iteration budget
is spent. Operators are passed as callables acting on arrays shaped like `b`.
"""

import csv
import io
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional

import numpy as np
from scipy.linalg import solve_triangular

from flipblur.lib.errors import NumericalFailureError, UsageError
from flipblur.lib.log import get_logger

logger = get_logger("flipblur.krylov")

LinearOperator = Callable[[np.ndarray], np.ndarray]

BREAKDOWN_TOLERANCE = 1e-14
LUCKY_RESIDUAL = 1e-12


class NotSymmetricError(NumericalFailureError):
    """
    Raised when the optional symmetry check finds <Ax, y> != <x, Ay>.
    """


class StopReason(Enum):
    """
    Why an iteration ended.
    """

    DISCREPANCY = "discrepancy"
    MAX_ITER = "max_iter"
    BREAKDOWN = "breakdown"


@dataclass(frozen=True)
class StoppingRule:
    """
    Attributes:
        max_iter: Iteration budget, >= 1.
        delta: Noise 2-norm; None disables the discrepancy principle.
        tau: Safety factor >= 1; the principle holds once ||r_k|| <= tau * delta.
        halt: Stop at the discrepancy iteration. When False the iteration is recorded and the run continues.
    """

    max_iter: int = 100
    delta: Optional[float] = None
    tau: float = 1.0
    halt: bool = True

    def __post_init__(self):
        if self.max_iter < 1:
            raise UsageError(f"must be >= 1, got {self.max_iter}", field="max_iter")
        if self.tau < 1:
            raise UsageError(f"must be >= 1, got {self.tau}", field="tau")
        if self.delta is not None and self.delta < 0:
            raise UsageError(f"must be >= 0, got {self.delta}", field="delta")

    def satisfied(self, residual_norm: float) -> bool:
        return self.delta is not None and residual_norm <= self.tau * self.delta


@dataclass
class IterationHistory:
    """
    Per-iteration diagnostics. Index k refers to the k-th iterate; k = 0 is the zero initial guess.
    """

    residual_norms: List[float] = field(default_factory=list)
    rre_per_iter: Optional[List[float]] = None
    stopped_by: StopReason = StopReason.MAX_ITER
    discrepancy_iter: Optional[int] = None
    best_iter: Optional[int] = None
    breakdown: Optional[str] = None

    @property
    def iterations(self) -> int:
        return len(self.residual_norms) - 1

    def to_csv(self) -> str:
        """
        CSV with columns iter, residual_norm, rre (blank without a truth).
        """
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["iter", "residual_norm", "rre"])
        for k, residual in enumerate(self.residual_norms):
            rre = "" if self.rre_per_iter is None else repr(float(self.rre_per_iter[k]))
            writer.writerow([k, repr(float(residual)), rre])
        return buffer.getvalue()


@dataclass
class SolveReport:
    """
    Attributes:
        solution: Last iterate, shaped like the right-hand side.
        history: Iteration diagnostics.
        solution_at_discrepancy: Iterate at which the discrepancy principle first held.
        solution_at_best: Iterate of minimum restoration error (needs a truth).
        snapshots: Every iterate, when requested.
    """

    solution: np.ndarray
    history: IterationHistory
    solution_at_discrepancy: Optional[np.ndarray] = None
    solution_at_best: Optional[np.ndarray] = None
    snapshots: Optional[List[np.ndarray]] = None


def discrepancy_delta(noise_level: float, blurred_exact_norm: float) -> float:
    """
    Noise norm delta = gamma * ||A f||, which is exactly the norm of the noise injected by
    `flipblur.lib.metrics.add_noise`.
    """
    if noise_level < 0 or blurred_exact_norm < 0:
        raise UsageError("noise level and norm must be >= 0", field="gamma")
    return noise_level * blurred_exact_norm


class _Recorder:
    """
    Collects residuals, errors and snapshots as a solver produces iterates.
    """

    def __init__(self, b: np.ndarray, rule: StoppingRule, truth: Optional[np.ndarray], keep_all: bool):
        self.shape = b.shape
        self.rule = rule
        self.truth = None if truth is None else np.asarray(truth, dtype=np.float64).ravel()
        if self.truth is not None:
            if self.truth.size != b.size:
                raise UsageError(f"truth has {self.truth.size} entries, right-hand side {b.size}", field="truth")
            self.truth_norm = np.linalg.norm(self.truth)
            if self.truth_norm == 0:
                raise UsageError("truth must be nonzero", field="truth")
        self.history = IterationHistory(rre_per_iter=None if truth is None else [])
        self.snapshots = [] if keep_all else None
        self.at_discrepancy = None
        self.at_best = None
        self.best_rre = np.inf
        self.last = None

    def record(self, x: np.ndarray, residual_norm: float) -> bool:
        """
        Record iterate x_k. Returns True if the run should halt at the discrepancy principle.
        """
        if not np.isfinite(residual_norm) or not np.all(np.isfinite(x)):
            raise NumericalFailureError(f"non-finite values at iteration {self.history.iterations + 1}")
        k = len(self.history.residual_norms)
        self.history.residual_norms.append(float(residual_norm))
        self.last = x
        if self.snapshots is not None:
            self.snapshots.append(x.reshape(self.shape).copy())
        if self.truth is not None:
            rre = float(np.linalg.norm(x - self.truth) / self.truth_norm)
            self.history.rre_per_iter.append(rre)
            if rre < self.best_rre:
                self.best_rre = rre
                self.history.best_iter = k
                self.at_best = x.copy()
        if self.history.discrepancy_iter is None and self.rule.satisfied(residual_norm):
            self.history.discrepancy_iter = k
            self.at_discrepancy = x.copy()
            logger.debug(f"Discrepancy principle met at iteration {k}: {residual_norm:.6e} <= {self.rule.tau} * {self.rule.delta:.6e}")
            if self.rule.halt:
                self.history.stopped_by = StopReason.DISCREPANCY
                return True
        return False

    def breakdown(self, residual_norm: float, reference: float):
        self.history.stopped_by = StopReason.BREAKDOWN
        self.history.breakdown = "lucky" if residual_norm <= LUCKY_RESIDUAL * reference else "unlucky"
        logger.debug(f"{self.history.breakdown.capitalize()} breakdown at iteration {self.history.iterations}")

    def report(self) -> SolveReport:
        def shaped(x):
            return None if x is None else x.reshape(self.shape)

        return SolveReport(
            solution=shaped(self.last),
            history=self.history,
            solution_at_discrepancy=shaped(self.at_discrepancy),
            solution_at_best=shaped(self.at_best),
            snapshots=self.snapshots,
        )


def _flat_operator(apply_fn: LinearOperator, shape) -> Callable[[np.ndarray], np.ndarray]:
    def matvec(v: np.ndarray) -> np.ndarray:
        # own copy, updated in place by the solvers
        out = np.array(apply_fn(v.reshape(shape)), dtype=np.float64).ravel()
        if not np.all(np.isfinite(out)):
            raise NumericalFailureError("operator returned non-finite values")
        return out

    return matvec


def gmres(
    apply_fn: LinearOperator,
    b: np.ndarray,
    rule: StoppingRule,
    truth: Optional[np.ndarray] = None,
    keep_all: bool = False,
) -> SolveReport:
    """
    Full (unrestarted) GMRES from the zero initial guess.

    Arnoldi with modified Gram-Schmidt builds the Krylov basis; plane rotations keep the
    Hessenberg least-squares problem triangular, so |g_{k+1}| is the residual norm of x_k.

    Args:
        apply_fn: The operator, acting on arrays shaped like `b`.
        b: Right-hand side.
        rule: Stopping rule.
        truth: Exact solution, to record the restoration error of every iterate.
        keep_all: Keep a copy of every iterate.

    Raises:
        NumericalFailureError: On non-finite values.
    """
    b = np.asarray(b, dtype=np.float64)
    matvec = _flat_operator(apply_fn, b.shape)
    rhs = b.ravel()
    size = rhs.size
    recorder = _Recorder(b, rule, truth, keep_all)

    beta = float(np.linalg.norm(rhs))
    if recorder.record(np.zeros(size), beta) or beta == 0.0:
        if beta == 0.0:
            recorder.breakdown(0.0, 1.0)
        return recorder.report()

    kmax = min(rule.max_iter, size)
    basis = np.zeros((kmax + 1, size))
    hessenberg = np.zeros((kmax + 1, kmax))
    cosines = np.zeros(kmax)
    sines = np.zeros(kmax)
    g = np.zeros(kmax + 1)
    g[0] = beta
    basis[0] = rhs / beta

    for k in range(kmax):
        w = matvec(basis[k])
        scale = np.linalg.norm(w)
        for i in range(k + 1):
            hessenberg[i, k] = basis[i] @ w
            w -= hessenberg[i, k] * basis[i]
        h_next = float(np.linalg.norm(w))
        hessenberg[k + 1, k] = h_next

        for i in range(k):
            upper, lower = hessenberg[i, k], hessenberg[i + 1, k]
            hessenberg[i, k] = cosines[i] * upper + sines[i] * lower
            hessenberg[i + 1, k] = -sines[i] * upper + cosines[i] * lower
        radius = np.hypot(hessenberg[k, k], h_next)
        if radius == 0.0:
            # singular projected system, x_k is undefined
            recorder.breakdown(abs(g[k]), beta)
            break
        cosines[k], sines[k] = hessenberg[k, k] / radius, h_next / radius
        hessenberg[k, k], hessenberg[k + 1, k] = radius, 0.0
        g[k + 1] = -sines[k] * g[k]
        g[k] = cosines[k] * g[k]

        y = solve_triangular(hessenberg[: k + 1, : k + 1], g[: k + 1], check_finite=False)
        x = basis[: k + 1].T @ y
        residual = abs(g[k + 1])
        if recorder.record(x, residual):
            break
        if h_next <= BREAKDOWN_TOLERANCE * max(scale, np.finfo(float).tiny):
            recorder.breakdown(residual, beta)
            break
        basis[k + 1] = w / h_next

    logger.debug(f"GMRES finished after {recorder.history.iterations} iteration(s): {recorder.history.stopped_by.value}")
    return recorder.report()


def sample_asymmetry(apply_fn: LinearOperator, shape, pairs: int = 3, rtol: float = 1e-8, seed: int = 0) -> float:
    """
    Largest relative gap |<Ax, y> - <x, Ay>| / (||Ax|| ||y|| + ||x|| ||Ay||) over random pairs.

    Raises:
        NotSymmetricError: If a gap exceeds `rtol`.
    """
    rng = np.random.default_rng(seed)
    matvec = _flat_operator(apply_fn, shape)
    size = int(np.prod(shape))
    worst = 0.0
    for _ in range(pairs):
        x, y = rng.standard_normal(size), rng.standard_normal(size)
        ax, ay = matvec(x), matvec(y)
        scale = np.linalg.norm(ax) * np.linalg.norm(y) + np.linalg.norm(x) * np.linalg.norm(ay)
        worst = max(worst, abs(ax @ y - x @ ay) / max(scale, np.finfo(float).tiny))
    if worst > rtol:
        raise NotSymmetricError(f"operator is not symmetric: relative gap {worst:.3e} > {rtol:.1e}")
    return worst


def minres(
    apply_fn: LinearOperator,
    b: np.ndarray,
    rule: StoppingRule,
    truth: Optional[np.ndarray] = None,
    keep_all: bool = False,
    check_symmetry: bool = False,
) -> SolveReport:
    """
    MINRES from the zero initial guess.

    The Lanczos three-term recurrence builds the tridiagonal projection; the last two
    plane rotations and the last two search directions are enough to update x_k, and
    |phi_bar_k| is the residual norm. On a nonsymmetric operator the recurrence still
    runs, but x_k is then no longer the true minimum-residual iterate.

    Args:
        apply_fn: The operator, acting on arrays shaped like `b`.
        b: Right-hand side.
        rule: Stopping rule.
        truth: Exact solution, to record the restoration error of every iterate.
        keep_all: Keep a copy of every iterate.
        check_symmetry: Compare <Ax, y> = <x, Ay> on random pairs before iterating.

    Raises:
        NotSymmetricError: If the symmetry check is enabled and fails.
        NumericalFailureError: On non-finite values.
    """
    b = np.asarray(b, dtype=np.float64)
    if check_symmetry:
        sample_asymmetry(apply_fn, b.shape)
    matvec = _flat_operator(apply_fn, b.shape)
    rhs = b.ravel()
    size = rhs.size
    recorder = _Recorder(b, rule, truth, keep_all)

    beta1 = float(np.linalg.norm(rhs))
    if recorder.record(np.zeros(size), beta1) or beta1 == 0.0:
        if beta1 == 0.0:
            recorder.breakdown(0.0, 1.0)
        return recorder.report()

    x = np.zeros(size)
    v_prev, v = np.zeros(size), rhs / beta1
    beta = 0.0
    phi_bar = beta1
    c_prev, s_prev = 1.0, 0.0
    c_old, s_old = 1.0, 0.0
    w_prev, w_old = np.zeros(size), np.zeros(size)

    for _ in range(rule.max_iter):
        z = matvec(v)
        scale = np.linalg.norm(z)
        z -= beta * v_prev
        alpha = v @ z
        z -= alpha * v
        beta_next = float(np.linalg.norm(z))

        # rotations k-2 and k-1 act on the new column (beta, alpha, beta_next) of T_k
        epsilon = s_old * beta
        delta_bar = c_old * beta
        delta = c_prev * delta_bar + s_prev * alpha
        gamma_bar = -s_prev * delta_bar + c_prev * alpha
        gamma = np.hypot(gamma_bar, beta_next)
        if gamma == 0.0:
            recorder.breakdown(abs(phi_bar), beta1)
            break
        c, s = gamma_bar / gamma, beta_next / gamma
        phi = c * phi_bar
        phi_bar = -s * phi_bar

        w = (v - delta * w_prev - epsilon * w_old) / gamma
        x = x + phi * w
        if recorder.record(x, abs(phi_bar)):
            break
        if beta_next <= BREAKDOWN_TOLERANCE * max(scale, np.finfo(float).tiny):
            recorder.breakdown(abs(phi_bar), beta1)
            break

        w_old, w_prev = w_prev, w
        c_old, s_old, c_prev, s_prev = c_prev, s_prev, c, s
        v_prev, v = v, z / beta_next
        beta = beta_next

    logger.debug(f"MINRES finished after {recorder.history.iterations} iteration(s): {recorder.history.stopped_by.value}")
    return recorder.report()


class SolverKind(Enum):
    """
    Available Krylov solvers.
    """

    GMRES = "gmres"
    MINRES = "minres"


Solver = Callable[..., SolveReport]

_SOLVER_MAP = {}


def _register(kind: SolverKind, solver: Solver):
    _SOLVER_MAP[kind] = solver


def get_solver(kind: SolverKind) -> Solver:
    """
    Get the solver function for a solver kind.
    """
    return _SOLVER_MAP[SolverKind(kind)]


_register(SolverKind.GMRES, gmres)
_register(SolverKind.MINRES, minres)
