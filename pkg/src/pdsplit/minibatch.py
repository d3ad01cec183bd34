"""Minibatch splitting of ``sum_n f_n + g_n`` over a consensus constraint.

The product-space state is ``z = [x_1..x_N, y_1..y_N]`` (each block of
length ``q``). Coordinate block ``n`` is the pair ``(x_n, y_n)``. The full
operator (used by the stochastic solver) keeps the dual-mean terms; the
synchronous minibatch solver drops them, which is exact when the dual blocks
start with zero mean.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError
from .km import BlockOperator, CoordinateSampler, Tracer, km_step, make_schedule, run
from .linops import SparseMap, as_diag
from .primal_dual import DiagonalPreconditioner, _step_denominator, admm_certificate
from .prox import L1Norm, LeastSquares, LogisticLoss, ProxFunction

__all__ = [
    "BatchedProblem", "split_problem", "batch_preconditioner", "MinibatchOperator",
    "minibatch_padmm_step", "psmpds_step", "consensus_error", "solve_minibatch",
    "MINIBATCH_HEADER",
]

MINIBATCH_HEADER = ("k", "objective_at_xbar", "consensus_error", "residual")


@dataclass
class BatchedProblem:
    """``N`` pairs ``(f_n, g_n)`` on a common space of dimension ``q``."""

    fs: list
    gs: list

    def __post_init__(self):
        if len(self.fs) == 0 or len(self.fs) != len(self.gs):
            raise ValidationError("need N >= 1 batches with one f_n and g_n each")
        dims = {f.dim for f in self.fs}
        if len(dims) != 1:
            raise ValidationError("all batch oracles must share the same dimension")
        for g in self.gs:
            if not isinstance(g, ProxFunction) and not hasattr(g, "prox"):
                raise ValidationError("every g_n must provide prox")

    @property
    def N(self):
        return len(self.fs)

    @property
    def q(self):
        return self.fs[0].dim

    @property
    def ehat(self):
        """Common cocoercivity diagonal: the largest batch bound."""
        return np.full(self.q, max(f.lipschitz for f in self.fs))

    def objective(self, x):
        return sum(f.value(x) + g.value(x) for f, g in zip(self.fs, self.gs))


def _rows(A, idx):
    if isinstance(A, SparseMap):
        A = A.to_scipy()
    if sp.issparse(A):
        return sp.csr_matrix(A)[idx]
    return np.asarray(A)[idx]


def split_problem(A, labels, lam, N, loss="logistic"):
    """Split the rows of ``A`` into ``N`` contiguous batches.

    Each batch keeps the global ``1/m`` normalisation and gets the regulariser
    ``(lam / N) ||.||_1``, so the batch objectives sum to the original one.
    ``loss`` is ``"logistic"`` (``labels`` in {-1, +1}) or ``"lasso"``
    (``labels`` are the targets ``b``).
    """
    m = A.shape[0]
    if m == 0:
        raise ValidationError("dataset has no rows")
    if not 1 <= N <= m:
        raise ValidationError(f"number of batches N={N} must lie in [1, m={m}]")
    labels = np.asarray(labels, dtype=np.float64)
    chunks = np.array_split(np.arange(m), N)
    fs = []
    for idx in chunks:
        An = _rows(A, idx)
        if loss == "logistic":
            fs.append(LogisticLoss(An, labels[idx], scale_rows=m))
        elif loss == "lasso":
            fs.append(LeastSquares(An, labels[idx], scale_rows=m))
        else:
            raise ValueError(f"unknown loss {loss!r}")
    return BatchedProblem(fs, [L1Norm(lam / N) for _ in range(N)])


def batch_preconditioner(ehat, gamma=1.9, r=1.0):
    """Steps for the consensus problem: ``tau = 1/(ehat/gamma + r)``, ``psi = 1/r``.

    Without curvature (``ehat = 0``) the primal step is ``gamma/(2 r)``.
    """
    if not 0 < gamma < 2 or not r > 0:
        raise ValidationError("need gamma in (0, 2) and r > 0")
    ehat = np.asarray(ehat, dtype=np.float64)
    tau = 1.0 / _step_denominator(ehat, gamma, np.full(ehat.shape, float(r)))
    return DiagonalPreconditioner(tau, np.full(ehat.shape, 1.0 / r))


def consensus_error(X):
    """``max_n ||x_n - xbar||`` for an ``(N, q)`` array."""
    X = np.asarray(X, dtype=np.float64)
    return float(np.max(np.linalg.norm(X - X.mean(axis=0), axis=1)))


class MinibatchOperator(BlockOperator):
    """Block operator of the consensus ADMM on ``[x, y]``.

    With ``keep_dual_mean`` the map is the exact operator whose randomized
    version gives the stochastic solver; without it the dual mean is taken
    as zero.
    """

    def __init__(self, bp, tau, psi, keep_dual_mean=True):
        self.bp = bp
        q, N = bp.q, bp.N
        self.tau = as_diag(tau, q)
        self.psi = as_diag(psi, q)
        self.psi_inv = 1.0 / self.psi
        self.keep_dual_mean = keep_dual_mean
        self.cert = admm_certificate(self.tau, self.psi, bp.ehat)
        blocks = [np.concatenate([np.arange(n * q, (n + 1) * q),
                                  N * q + np.arange(n * q, (n + 1) * q)]) for n in range(N)]
        super().__init__(2 * N * q, blocks)

    def split(self, z):
        N, q = self.bp.N, self.bp.q
        return z[: N * q].reshape(N, q), z[N * q:].reshape(N, q)

    def _means(self, X, Y):
        xbar = X.mean(axis=0)
        ybar = Y.mean(axis=0) if self.keep_dual_mean else np.zeros(self.bp.q)
        return xbar, ybar

    def _update(self, n, X, Y, xbar, ybar):
        tau, pinv = self.tau, self.psi_inv
        xi, eta = X[n], Y[n]
        y_new = eta - ybar + pinv * (xi - xbar)
        grad = self.bp.fs[n].grad(xi)
        v = xi - 2.0 * tau * pinv * xi - tau * grad - tau * eta + 2.0 * tau * (pinv * xbar + ybar)
        return self.bp.gs[n].prox(v, tau), y_new

    def apply(self, z):
        X, Y = self.split(z)
        xbar, ybar = self._means(X, Y)
        Xn, Yn = np.empty_like(X), np.empty_like(Y)
        for n in range(self.bp.N):
            Xn[n], Yn[n] = self._update(n, X, Y, xbar, ybar)
        return np.concatenate([Xn.ravel(), Yn.ravel()])

    def apply_block(self, n, z):
        X, Y = self.split(z)
        xbar, ybar = self._means(X, Y)
        x_new, y_new = self._update(n, X, Y, xbar, ybar)
        return np.concatenate([x_new, y_new])


def _check_zero_mean(Y, scale=1.0):
    ybar = np.asarray(Y).reshape(-1, np.shape(Y)[-1]).mean(axis=0)
    if np.max(np.abs(ybar), initial=0.0) > 1e-12 * max(scale, 1.0):
        raise ValidationError("the synchronous minibatch solver needs dual blocks with zero mean")


def minibatch_padmm_step(bp, tau, psi, sched, st):
    """Synchronous step over all batches; ``st`` is a :class:`~pdsplit.km.KMState`."""
    T = MinibatchOperator(bp, tau, psi, keep_dual_mean=False)
    _, Y = T.split(st.curr)
    _check_zero_mean(Y, np.max(np.abs(Y), initial=0.0))
    return km_step(T, st, sched)


def psmpds_step(bp, tau, psi, sched, sampler, st):
    """Stochastic step: one draw of ``sampler`` decides which batches update."""
    T = MinibatchOperator(bp, tau, psi, keep_dual_mean=True)
    if sampler.n_blocks != bp.N:
        raise ValidationError("sampler block count must equal the number of batches")
    return km_step(T, st, sched, sampler.draw())


@dataclass
class MinibatchResult:
    xbar: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    status: str
    iterations: int
    objective: float
    consensus_error: float
    fp_residual: float
    trace: list
    header: tuple


def solve_minibatch(bp, stochastic=False, seed=0, alpha=0.3, theta=0.01, delta_hat=None,
                    rho=None, rho_frac=0.9, gamma=1.9, r=1.0, X0=None, Y0=None,
                    max_iters=200000, tol=1e-9, trace_every=1, sink=None, sampler=None):
    """Run the synchronous (``stochastic=False``) or the stochastic solver."""
    N, q = bp.N, bp.q
    pc = batch_preconditioner(bp.ehat, gamma, r)
    T = MinibatchOperator(bp, pc.tau, pc.psi, keep_dual_mean=stochastic)
    X0 = np.zeros((N, q)) if X0 is None else np.asarray(X0, dtype=np.float64).reshape(N, q)
    Y0 = np.zeros((N, q)) if Y0 is None else np.asarray(Y0, dtype=np.float64).reshape(N, q)
    if not stochastic:
        _check_zero_mean(Y0, np.max(np.abs(Y0), initial=0.0))
    elif sampler is None:
        sampler = CoordinateSampler.singletons(N, seed)
    sched = make_schedule(alpha, theta, delta_hat, rho, rho_frac, relax_cap=T.cert.relax_cap)

    def row(k, st, residual, active):
        X, _ = T.split(st.curr)
        return (k, bp.objective(X.mean(axis=0)), consensus_error(X), residual)

    tracer = Tracer(MINIBATCH_HEADER, row, trace_every, sink)
    res = run(T, np.concatenate([X0.ravel(), Y0.ravel()]), sched,
              sampler=sampler if stochastic else None, max_iters=max_iters, tol=tol,
              tracer=tracer)
    X, Y = T.split(res.x)
    xbar = X.mean(axis=0)
    return MinibatchResult(xbar, X.copy(), Y.copy(), res.status, res.iterations,
                           bp.objective(xbar), consensus_error(X), res.fp_residual,
                           res.trace, res.header)
