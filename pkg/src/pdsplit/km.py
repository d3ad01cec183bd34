"""Randomized inertial Krasnosel'skii-Mann iteration.

One step reads

    w      = x_k + a_k (x_k - x_{k-1})
    x_{k+1}[j] = (1 - rho) w[j] + rho T(w)[j]   for active blocks j
    x_{k+1}[j] = w[j]                           otherwise

with ``a_1 = 0`` and ``a_k = alpha`` afterwards. Every solver in the package
is a :class:`BlockOperator` driven by :func:`km_step` / :func:`run`.
"""
import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ScheduleError, ValidationError

__all__ = [
    "InertialSchedule", "validate_schedule", "make_schedule", "rho_upper_bound",
    "optimal_delta_hat", "delta_hat_lower_bound", "CoordinateSampler", "KMState",
    "BlockOperator", "FunctionOperator", "km_step", "run", "RunResult", "Tracer",
    "fixed_point_residual", "CsvSink",
]


def delta_hat_lower_bound(alpha, theta):
    """Right-hand side of the admissibility condition on ``delta_hat``."""
    return (alpha ** 2 * (1 + alpha) + alpha * theta) / (1 - alpha ** 2)


def rho_upper_bound(alpha, theta, delta_hat):
    """Supremum of admissible constant relaxations for an inertial run."""
    inner = alpha * (1 + alpha) + alpha * delta_hat + theta
    return (delta_hat - alpha * inner) / (delta_hat * (1 + inner))


def optimal_delta_hat(alpha, theta):
    """``delta_hat`` maximising :func:`rho_upper_bound` for fixed ``alpha, theta``.

    Setting the derivative to zero gives ``B a d^2 - 2 C a d - C K = 0`` with
    ``B = 1 - a^2``, ``C = a (a (1 + a) + theta)``, ``K = 1 + a (1 + a) + theta``.
    The positive root always exceeds the admissibility bound.
    """
    if alpha == 0:
        return 1.0
    B = 1 - alpha ** 2
    C = alpha * (alpha * (1 + alpha) + theta)
    K = 1 + alpha * (1 + alpha) + theta
    return (C * alpha + math.sqrt((C * alpha) ** 2 + B * alpha * C * K)) / (B * alpha)


@dataclass(frozen=True)
class InertialSchedule:
    """Validated inertia/relaxation parameters.

    ``relax_cap`` is ``1/a`` for an ``a``-averaged operator. It only matters
    when ``alpha == 0``, where relaxations up to the cap are admissible.
    """

    alpha: float
    theta: float
    delta_hat: float
    rho: float
    rho_max: float
    relax_cap: Optional[float] = None

    def alpha_k(self, k):
        return 0.0 if k <= 1 else self.alpha


def validate_schedule(alpha, theta, delta_hat, rho, relax_cap=None):
    """Return an :class:`InertialSchedule` or raise :class:`ScheduleError`.

    The two strict inequalities on ``delta_hat`` and ``rho`` are checked as
    stated. When ``alpha == 0`` and ``relax_cap`` is given the relaxation
    interval is ``(0, relax_cap)`` instead (plain averaged-operator KM).
    """
    if not 0 <= alpha < 1:
        raise ScheduleError(f"alpha must lie in [0, 1), got {alpha}")
    if theta <= 0 or delta_hat <= 0:
        raise ScheduleError("theta and delta_hat must be positive")
    if not rho > 0:
        raise ScheduleError(f"rho must be positive, got {rho}")

    if alpha == 0 and relax_cap is not None:
        if not rho < relax_cap:
            raise ScheduleError(
                f"relaxation rho={rho} outside the admissible interval (0, {relax_cap:.6g})"
            )
        return InertialSchedule(alpha, theta, delta_hat, rho, float(relax_cap), relax_cap)

    lower = delta_hat_lower_bound(alpha, theta)
    if not delta_hat > lower:
        raise ScheduleError(
            f"condition (i) failed: delta_hat={delta_hat} must exceed {lower:.6g}"
        )
    bound = rho_upper_bound(alpha, theta, delta_hat)
    if relax_cap is not None:
        bound = min(bound, relax_cap)
    if not rho < bound:
        raise ScheduleError(
            f"condition (ii) failed: rho={rho} outside the admissible interval (0, {bound:.6g})"
        )
    return InertialSchedule(alpha, theta, delta_hat, rho, bound, relax_cap)


def make_schedule(alpha=0.3, theta=0.01, delta_hat=None, rho=None, rho_frac=0.9,
                  relax_cap=None):
    """Build a schedule, filling ``delta_hat`` and ``rho`` with defaults.

    The default ``rho`` is ``rho_frac`` times the inertial bound, whether or
    not a ``relax_cap`` is supplied.
    """
    if delta_hat is None:
        delta_hat = optimal_delta_hat(alpha, theta)
    if rho is None:
        if not 0 < rho_frac < 1:
            raise ScheduleError(f"rho_frac must lie in (0, 1), got {rho_frac}")
        if not delta_hat > delta_hat_lower_bound(alpha, theta):
            raise ScheduleError(
                f"condition (i) failed: delta_hat={delta_hat} must exceed "
                f"{delta_hat_lower_bound(alpha, theta):.6g}"
            )
        bound = rho_upper_bound(alpha, theta, delta_hat)
        if relax_cap is not None:
            bound = min(bound, relax_cap)
        rho = rho_frac * bound
    return validate_schedule(alpha, theta, delta_hat, rho, relax_cap)


class CoordinateSampler:
    """i.i.d. draws of block subsets.

    Parameters
    ----------
    n_blocks : int
    support : list of iterables of block indices
    probs : probabilities of each support element, summing to one
    seed : seed for ``numpy.random.default_rng``
    """

    def __init__(self, n_blocks, support, probs=None, seed=0):
        self.n_blocks = int(n_blocks)
        self.support = [tuple(sorted(set(int(j) for j in s))) for s in support]
        if probs is None:
            probs = np.full(len(self.support), 1.0 / len(self.support))
        self.probs = np.asarray(probs, dtype=np.float64)
        if self.probs.shape != (len(self.support),):
            raise ValidationError("one probability per support set is required")
        if np.any(self.probs < 0) or abs(self.probs.sum() - 1.0) > 1e-12:
            raise ValidationError("sampler probabilities must be nonnegative and sum to 1")
        covered = set()
        for s, p in zip(self.support, self.probs):
            if not s:
                raise ValidationError("empty activation set in sampler support")
            if s[0] < 0 or s[-1] >= self.n_blocks:
                raise ValidationError("activation set refers to a nonexistent block")
            if p > 0:
                covered.update(s)
        missing = set(range(self.n_blocks)) - covered
        if missing:
            raise ValidationError(
                f"blocks {sorted(missing)} are never activated with positive probability"
            )
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.draws = 0

    @classmethod
    def singletons(cls, n_blocks, seed=0, probs=None):
        return cls(n_blocks, [[j] for j in range(n_blocks)], probs, seed)

    @classmethod
    def full(cls, n_blocks):
        return cls(n_blocks, [list(range(n_blocks))], [1.0])

    def draw(self):
        self.draws += 1
        if len(self.support) == 1:
            return self.support[0]
        return self.support[self.rng.choice(len(self.support), p=self.probs)]


@dataclass(frozen=True)
class KMState:
    """Two consecutive iterates and the index ``k`` of ``curr``."""

    prev: np.ndarray
    curr: np.ndarray
    k: int = 1

    @classmethod
    def start(cls, x0, x1=None):
        x0 = np.asarray(x0, dtype=np.float64).copy()
        x1 = x0.copy() if x1 is None else np.asarray(x1, dtype=np.float64).copy()
        if x0.shape != x1.shape:
            raise ValueError("initial points must have the same shape")
        return cls(x0, x1, 1)


class BlockOperator:
    """Operator on a flat vector split into index blocks.

    Subclasses implement :meth:`apply`; :meth:`apply_block` defaults to
    slicing the full image and may be overridden by a cheaper version that
    must agree with it exactly.
    """

    def __init__(self, dim, blocks=None):
        self.dim = int(dim)
        if blocks is None:
            blocks = [np.arange(self.dim)]
        self.blocks = [np.asarray(b, dtype=np.int64) for b in blocks]

    @property
    def n_blocks(self):
        return len(self.blocks)

    def apply(self, w):
        raise NotImplementedError

    def apply_block(self, j, w):
        return self.apply(w)[self.blocks[j]]


class FunctionOperator(BlockOperator):
    """Wrap a plain callable as a block operator."""

    def __init__(self, fn, dim, blocks=None):
        super().__init__(dim, blocks)
        self.fn = fn

    def apply(self, w):
        return np.asarray(self.fn(w), dtype=np.float64)


def km_step(T, st, sched, active=None):
    """One inertial, relaxed, possibly partial step of ``T``."""
    x = st.curr
    if x.shape != (T.dim,):
        raise ValueError(f"state has shape {x.shape}, operator expects ({T.dim},)")
    a = sched.alpha_k(st.k)
    w = x + a * (x - st.prev) if a else x.copy()
    rho = sched.rho
    if active is None or len(active) == T.n_blocks:
        new = (1.0 - rho) * w + rho * T.apply(w)
    else:
        if len(active) == 0:
            raise ValueError("active set must be nonempty")
        new = w.copy()
        for j in active:
            idx = T.blocks[j]
            new[idx] = (1.0 - rho) * w[idx] + rho * T.apply_block(j, w)
    return KMState(x, new, st.k + 1)


def fixed_point_residual(T, x):
    """``||T(x) - x||``."""
    return float(np.linalg.norm(T.apply(x) - x))


class CsvSink:
    """Append-only CSV trace writer with a fixed header."""

    def __init__(self, path, header):
        self.path = path
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(header)

    def write(self, row):
        self._writer.writerow([_fmt(v) for v in row])

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


@dataclass
class Tracer:
    """How rows are recorded: ``row(k, state, step_residual) -> tuple``."""

    header: tuple = ("k", "residual", "metric")
    row: Optional[object] = None
    every: int = 1
    sink: Optional[CsvSink] = None
    rows: list = field(default_factory=list)

    def record(self, k, st, residual, active):
        if self.row is None:
            row = (k, residual, "")
        else:
            row = tuple(self.row(k, st, residual, active))
        self.rows.append(row)
        if self.sink is not None:
            self.sink.write(row)


@dataclass
class RunResult:
    state: KMState
    status: str
    iterations: int
    residual: float
    fp_residual: float
    trace: list
    header: tuple

    @property
    def converged(self):
        return self.status == "converged"

    @property
    def x(self):
        return self.state.curr


def run(T, x0, sched, sampler=None, max_iters=10000, tol=1e-10, check_every=100,
        tracer=None, x1=None):
    """Iterate :func:`km_step` until ``||T(x) - x|| <= tol`` or ``max_iters``.

    The cheap step residual ``||x_{k+1} - x_k||`` triggers a full fixed-point
    residual check when it drops below ``tol``; the full check also runs every
    ``check_every`` iterations. Returns a :class:`RunResult` whose ``status``
    is ``"converged"`` or ``"max_iters"``.
    """
    st = KMState.start(x0, x1)
    tracer = tracer or Tracer()
    fp = fixed_point_residual(T, st.curr)
    step_res = float("nan")
    if fp <= tol:
        return RunResult(st, "converged", 0, 0.0, fp, tracer.rows, tuple(tracer.header))
    last_check = 0
    for it in range(1, max_iters + 1):
        active = sampler.draw() if sampler is not None else None
        new = km_step(T, st, sched, active)
        step_res = float(np.linalg.norm(new.curr - st.curr))
        st = new
        if it % tracer.every == 0:
            tracer.record(it, st, step_res, active)
        due = it % check_every == 0
        if (step_res <= tol and it - last_check >= T.n_blocks) or due:
            last_check = it
            fp = fixed_point_residual(T, st.curr)
            if fp <= tol:
                if it % tracer.every != 0:
                    tracer.record(it, st, step_res, active)
                return RunResult(st, "converged", it, step_res, fp, tracer.rows,
                                 tuple(tracer.header))
    fp = fixed_point_residual(T, st.curr)
    return RunResult(st, "converged" if fp <= tol else "max_iters", max_iters, step_res, fp,
                     tracer.rows, tuple(tracer.header))
