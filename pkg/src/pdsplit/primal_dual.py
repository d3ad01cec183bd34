"""Centralized primal-dual solvers for ``min f(x) + g(x) + h(Dx)``.

The inertial primal-dual splitting (``ipds``) operator and the inertial
ADMM+ operator are :class:`~pdsplit.km.BlockOperator` instances acting on
the stacked vector ``z = [x, y]``; inertia and relaxation come from the KM
engine. Scalar steps are the special case of constant diagonals, so the
preconditioned variants share the same code.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, eigsh, LinearOperator

from .errors import PowerIterationError, StepSizeError, ValidationError
from .km import BlockOperator, KMState, Tracer, km_step, make_schedule, run
from .linops import (
    DiagonalMap, IdentityMap, ScaledMap, ZeroMap, as_diag, gram_diagonal,
    operator_norm_sq, power_sums,
)
from .prox import ZeroFunction, prox_conjugate

__all__ = [
    "CompositeProblem", "StepSizes", "Certificate", "PrimalDualState",
    "DiagonalPreconditioner", "build_diag_preconditioner", "build_admm_preconditioner",
    "validate_step_sizes", "validate_admm_steps", "admm_certificate", "relax_cap_from_kappa",
    "PrimalDualOperator", "ADMMOperator", "ipds_step", "condat_step", "iadmm_step",
    "forward_backward_step", "solve_pd", "PDResult", "fb_solve", "scaled_norm_sq",
]


@dataclass
class CompositeProblem:
    """``f + g + h o D`` with ``f`` smooth, ``g`` and ``h`` proximable."""

    f: object
    g: object
    h: object
    D: object

    def __post_init__(self):
        if self.f.dim != self.D.n_in:
            raise ValueError(f"f acts on dimension {self.f.dim}, D expects {self.D.n_in}")
        E = self.E
        if np.any(E < 0) or not np.all(np.isfinite(E)):
            raise ValidationError("cocoercivity bound must be finite and nonnegative")

    @property
    def n(self):
        return self.D.n_in

    @property
    def m(self):
        return self.D.n_out

    @property
    def E(self):
        return np.asarray(self.f.cocoercivity_diag, dtype=np.float64)

    def objective(self, x):
        return self.f.value(x) + self.g.value(x) + self.h.value(self.D.apply(x))


@dataclass(frozen=True)
class StepSizes:
    """Primal steps ``tau`` (length n) and dual steps ``sigma`` (length m)."""

    tau: np.ndarray
    sigma: np.ndarray
    scalar: bool = False

    @classmethod
    def scalars(cls, tau, sigma, n, m):
        if tau <= 0 or sigma <= 0:
            raise StepSizeError("step sizes must be positive")
        return cls(np.full(n, float(tau)), np.full(m, float(sigma)), True)

    @classmethod
    def diagonal(cls, tau, sigma):
        tau = np.asarray(tau, dtype=np.float64).copy()
        sigma = np.asarray(sigma, dtype=np.float64).copy()
        if np.any(tau <= 0) or np.any(sigma <= 0):
            raise StepSizeError("step sizes must be positive")
        return cls(tau, sigma, False)


@dataclass(frozen=True)
class Certificate:
    """Outcome of a step-size check.

    ``margin`` is the slack of the decisive inequality, ``kappa`` the
    cocoercivity constant of the forward step in the metric ``P`` and
    ``relax_cap = 2 - 1/(2 kappa)`` the largest admissible relaxation without
    inertia.
    """

    kind: str
    margin: float
    kappa: float
    relax_cap: float
    coupling: float


def relax_cap_from_kappa(kappa):
    return 2.0 if np.isinf(kappa) else 2.0 - 1.0 / (2.0 * kappa)


def scaled_norm_sq(M):
    """``||M||^2`` by power iteration, falling back to ARPACK on a stall."""
    try:
        return operator_norm_sq(M)
    except PowerIterationError as err:
        op = LinearOperator((M.n_in, M.n_in), matvec=lambda v: M.adjoint(M.apply(v)),
                            dtype=np.float64)
        try:
            vals = eigsh(op, k=1, which="LA", return_eigenvectors=False, tol=1e-12)
            return float(vals[0])
        except ArpackNoConvergence:
            return err.estimate


def _kappa(tau, E, c):
    """Cocoercivity constant of ``P^{-1} [grad f; 0]`` in the ``P`` metric."""
    pos = E > 0
    if not np.any(pos):
        return np.inf
    t = tau[pos]
    e = E[pos]
    return float(np.min(((1.0 - c) / t + c * e / 2.0) / e))


def validate_step_sizes(problem, steps):
    """Check that ``P - C/2`` is positive definite for the given steps.

    Scalar steps use ``1/tau - sigma ||D||^2 > ||E||/2``. Diagonal steps use
    ``T^{-1} - E/2 > 0`` and ``||S^{1/2} D (T^{-1} - E/2)^{-1/2}|| < 1``.
    Raises :class:`StepSizeError` naming the failed condition.
    """
    E = problem.E
    tau, sigma = steps.tau, steps.sigma
    if tau.shape != (problem.n,) or sigma.shape != (problem.m,):
        raise ValueError("step sizes do not match the problem dimensions")
    if steps.scalar:
        t, s = float(tau[0]), float(sigma[0])
        norm_d = 0.0 if isinstance(problem.D, ZeroMap) else scaled_norm_sq(problem.D)
        L = float(E.max(initial=0.0))
        lhs = 1.0 / t - s * norm_d
        margin = lhs - L / 2.0
        if not margin > 0:
            raise StepSizeError(
                f"1/tau - sigma ||D||^2 = {lhs:.6g} must exceed ||L||/2 = {L / 2:.6g} "
                f"(margin {margin:.3g})"
            )
        kappa = np.inf if L == 0 else lhs / L
        c = s * norm_d / (1.0 / t - L / 2.0)
        return Certificate("scalar", margin, kappa, relax_cap_from_kappa(kappa), c)

    gap = 1.0 / tau - E / 2.0
    if not np.all(gap > 0):
        j = int(np.argmin(gap))
        raise StepSizeError(
            f"T^-1 - E/2 is not positive definite: coordinate {j} has {gap[j]:.6g}"
        )
    M = ScaledMap(problem.D, np.sqrt(sigma), 1.0 / np.sqrt(gap))
    c = 0.0 if isinstance(problem.D, ZeroMap) else scaled_norm_sq(M)
    margin = 1.0 - c
    if not margin > 0:
        raise StepSizeError(
            f"||S^1/2 D (T^-1 - E/2)^-1/2||^2 = {c:.6g} must be below 1 (margin {margin:.3g})"
        )
    kappa = _kappa(tau, E, c)
    return Certificate("diagonal", margin, kappa, relax_cap_from_kappa(kappa), c)


@dataclass(frozen=True)
class DiagonalPreconditioner:
    """Pointwise steps: ``tau`` on the primal side, ``psi`` the dual metric weight.

    The dual step of the primal-dual iteration is ``sigma = 1/psi``.
    """

    tau: np.ndarray
    psi: np.ndarray

    @property
    def sigma(self):
        return 1.0 / self.psi

    def steps(self):
        return StepSizes.diagonal(self.tau, self.sigma)


def _step_denominator(e, gamma, coupling):
    """``e/gamma + coupling``, or ``(2/gamma) coupling`` where ``e = 0``.

    Without curvature the ``gamma < 2`` slack would vanish and the strict
    step condition would hold with equality, so the slack moves onto the
    coupling term.
    """
    return np.where(e > 0, e / gamma + coupling, (2.0 / gamma) * coupling)


def build_diag_preconditioner(D, E, gamma=1.9, r=1.0, s=1.0):
    """Diagonal steps ``tau_j = 1/(e_j/gamma + r sum_i |D_ij|^(2-s))``,
    ``psi_i = (1/r) sum_j |D_ij|^s``.

    Coordinates with ``e_j = 0`` use ``tau_j = gamma/(2 r sum_i |D_ij|^(2-s))``.

    A zero column falls back to ``tau_j = gamma/e_j``; that requires
    ``e_j > 0``. A zero row leaves its dual coordinate without a step and is
    rejected.
    """
    if not 0 < gamma < 2:
        raise ValidationError(f"gamma must lie in (0, 2), got {gamma}")
    if not r > 0:
        raise ValidationError(f"r must be positive, got {r}")
    E = as_diag(E, D.n_in)
    if np.any(E < 0):
        raise ValidationError("cocoercivity diagonal must be nonnegative")
    row_sums, col_sums = power_sums(D, s)
    denom = _step_denominator(E, gamma, r * col_sums)
    if np.any(denom <= 0):
        j = int(np.flatnonzero(denom <= 0)[0])
        raise ValidationError(
            f"column {j} of D is zero and e_{j} = 0: primal step would be unbounded"
        )
    if np.any(row_sums <= 0):
        i = int(np.flatnonzero(row_sums <= 0)[0])
        raise ValidationError(f"row {i} of D is zero: dual coordinate is unused")
    return DiagonalPreconditioner(1.0 / denom, row_sums / r)


def _row_owner(D):
    """Column index of the single nonzero in each row of ``D``."""
    if isinstance(D, IdentityMap) or isinstance(D, DiagonalMap):
        return np.arange(D.n_in)
    rows, cols, vals = D.entries()
    nz = vals != 0
    rows, cols = rows[nz], cols[nz]
    counts = np.bincount(rows, minlength=D.n_out)
    if np.any(counts != 1):
        raise ValidationError(
            "the ADMM x-update needs exactly one nonzero per row of D; use ipds for general D"
        )
    owner = np.empty(D.n_out, dtype=np.int64)
    owner[rows] = cols
    return owner


def _admm_ebar(problem):
    """Cocoercivity diagonal of ``grad(f o D^{-1})`` on the range of ``D``."""
    D = problem.D
    owner = _row_owner(D)
    gram = gram_diagonal(D)
    if np.any(gram <= 0):
        raise ValidationError("D is not injective: some column of D is zero")
    return problem.E[owner] / gram[owner]


def build_admm_preconditioner(problem, gamma=1.9, r=1.0):
    """Steps on the dual space for the ADMM operator: ``tau_i = 1/(Ebar_i/gamma + r)``,
    ``psi_i = 1/r``."""
    if not 0 < gamma < 2 or not r > 0:
        raise ValidationError("need gamma in (0, 2) and r > 0")
    ebar = _admm_ebar(problem)
    tau = 1.0 / _step_denominator(ebar, gamma, np.full(problem.m, float(r)))
    return DiagonalPreconditioner(tau, np.full(problem.m, 1.0 / r))


def validate_admm_steps(problem, tau, psi):
    """Check ``T^{-1} - Ebar/2 > 0`` and ``||(T^{-1} - Ebar/2)^{-1/2} Psi^{-1/2}|| < 1``.

    Both maps live on the dual space (length m). Scalars are broadcast.
    """
    m = problem.m
    tau, psi = as_diag(tau, m), as_diag(psi, m)
    if np.any(tau <= 0) or np.any(psi <= 0):
        raise StepSizeError("ADMM step sizes must be positive")
    return admm_certificate(tau, psi, _admm_ebar(problem))


def admm_certificate(tau, psi, ebar):
    """Pointwise ADMM step check ``psi_i (1/tau_i - ebar_i/2) > 1``."""
    gap = 1.0 / tau - ebar / 2.0
    if not np.all(gap > 0):
        i = int(np.argmin(gap))
        raise StepSizeError(f"T^-1 - Ebar/2 is not positive definite at coordinate {i}")
    c = float(np.max((1.0 / psi) / gap))
    margin = 1.0 - c
    if not margin > 0:
        raise StepSizeError(
            f"1/tau - 1/mu must exceed ||Ebar||/2 coordinatewise (worst ratio {c:.6g} >= 1)"
        )
    kappa = _kappa(tau, ebar, c)
    return Certificate("admm", margin, kappa, relax_cap_from_kappa(kappa), c)


@dataclass(frozen=True)
class PrimalDualState:
    x_prev: np.ndarray
    x_curr: np.ndarray
    y_prev: np.ndarray
    y_curr: np.ndarray
    k: int = 1

    @classmethod
    def start(cls, x0, y0):
        x0 = np.asarray(x0, dtype=np.float64).ravel().copy()
        y0 = np.asarray(y0, dtype=np.float64).ravel().copy()
        return cls(x0, x0.copy(), y0, y0.copy(), 1)

    def to_km(self):
        return KMState(np.concatenate([self.x_prev, self.y_prev]),
                       np.concatenate([self.x_curr, self.y_curr]), self.k)

    @classmethod
    def from_km(cls, st, n):
        return cls(st.prev[:n], st.curr[:n], st.prev[n:], st.curr[n:], st.k)


class PrimalDualOperator(BlockOperator):
    """Dual-first primal-dual map on ``z = [x, y]``.

    ``y~ = prox_{S h*}(y + S D x)``,
    ``x~ = prox_{T g}(x - T grad f(x) - T D*(2 y~ - y))``.
    """

    def __init__(self, problem, steps):
        self.problem = problem
        self.tau = steps.tau
        self.sigma = steps.sigma
        super().__init__(problem.n + problem.m)

    def split(self, z):
        return z[: self.problem.n], z[self.problem.n:]

    def apply(self, z):
        p = self.problem
        x, y = self.split(z)
        y_new = prox_conjugate(p.h, self.sigma, y + self.sigma * p.D.apply(x))
        grad = p.f.grad(x)
        x_new = p.g.prox(x - self.tau * grad - self.tau * p.D.adjoint(2.0 * y_new - y), self.tau)
        return np.concatenate([x_new, y_new])


class ADMMOperator(BlockOperator):
    """ADMM+ map on ``z = [x, y]`` with steps ``tau``, ``psi`` on the dual space.

    ``z' = prox^{Psi}_h(D x + Psi y)``, ``y' = y + Psi^{-1}(D x - z')``,
    ``u = D x + T Psi^{-1}(z' - D x)`` and ``x'`` minimises
    ``g(w) + <grad f(x), w> + 1/2 ||D w - u + T y'||^2_{T^{-1}}``.
    """

    def __init__(self, problem, tau, psi):
        self.problem = problem
        m = problem.m
        self.tau = as_diag(tau, m)
        self.psi = as_diag(psi, m)
        _row_owner(problem.D)
        D = problem.D
        if isinstance(D, IdentityMap):
            self.minv = self.tau.copy()
        else:
            gram = gram_diagonal(D, 1.0 / self.tau)
            if np.any(gram <= 0):
                raise ValidationError("D is not injective: some column of D is zero")
            self.minv = 1.0 / gram
        super().__init__(problem.n + m)

    def split(self, z):
        return z[: self.problem.n], z[self.problem.n:]

    def apply(self, z):
        p = self.problem
        D = p.D
        x, y = self.split(z)
        Dx = D.apply(x)
        zz = p.h.prox(Dx + self.psi * y, self.psi)
        y_new = y + (Dx - zz) / self.psi
        u = Dx + (self.tau / self.psi) * (zz - Dx)
        c = u - self.tau * y_new
        grad = p.f.grad(x)
        if isinstance(D, IdentityMap):
            v = c - self.minv * grad
        else:
            v = self.minv * (D.adjoint(c / self.tau) - grad)
        x_new = p.g.prox(v, self.minv)
        return np.concatenate([x_new, y_new])


def ipds_step(problem, steps, sched, st):
    """One inertial primal-dual step; ``st`` is a :class:`PrimalDualState`."""
    T = PrimalDualOperator(problem, steps)
    return PrimalDualState.from_km(km_step(T, st.to_km(), sched), problem.n)


def iadmm_step(problem, tau, psi, sched, st):
    """One inertial ADMM+ step; ``tau`` and ``psi`` are scalars or dual-space arrays."""
    T = ADMMOperator(problem, tau, psi)
    return PrimalDualState.from_km(km_step(T, st.to_km(), sched), problem.n)


def condat_step(problem, tau, sigma, rho, st, cert=None):
    """Relaxed primal-dual step without inertia.

    ``rho`` must lie in ``(0, 2 - 1/(2 kappa))``.
    """
    if cert is None:
        cert = validate_step_sizes(problem, StepSizes.scalars(tau, sigma, problem.n, problem.m))
    if not 0 < rho < cert.relax_cap:
        raise ValidationError(f"rho={rho} outside (0, {cert.relax_cap:.6g})")
    p = problem
    tau = np.full(p.n, float(tau)) if np.ndim(tau) == 0 else tau
    sigma = np.full(p.m, float(sigma)) if np.ndim(sigma) == 0 else sigma
    x, y = st.x_curr, st.y_curr
    y_t = prox_conjugate(p.h, sigma, y + sigma * p.D.apply(x))
    grad = p.f.grad(x)
    x_t = p.g.prox(x - tau * grad - tau * p.D.adjoint(2.0 * y_t - y), tau)
    x_new = rho * x_t + (1.0 - rho) * x
    y_new = rho * y_t + (1.0 - rho) * y
    return PrimalDualState(x, x_new, y, y_new, st.k + 1)


def forward_backward_step(problem, tau, x):
    """``prox_{tau g}(x - tau grad f(x))``; requires ``h o D`` to vanish and ``tau < 2/L``."""
    if not (isinstance(problem.h, ZeroFunction) or isinstance(problem.D, ZeroMap)):
        raise ValidationError("forward-backward needs h = 0 (or D = 0)")
    L = float(problem.E.max(initial=0.0))
    if not tau > 0 or (L > 0 and not tau < 2.0 / L):
        raise StepSizeError(f"forward-backward step {tau} outside (0, 2/L) with L={L:.6g}")
    return problem.g.prox(x - tau * problem.f.grad(x), tau)


@dataclass
class PDResult:
    x: np.ndarray
    y: np.ndarray
    status: str
    iterations: int
    objective: float
    fp_residual: float
    trace: list
    header: tuple
    certificate: Optional[Certificate] = None

    @property
    def converged(self):
        return self.status == "converged"


PD_HEADER = ("k", "objective", "primal_residual", "dual_residual")


def _pd_tracer(problem, every, sink):
    n = problem.n

    def row(k, st, residual, active):
        x = st.curr[:n]
        return (k, problem.objective(x),
                float(np.linalg.norm(x - st.prev[:n])),
                float(np.linalg.norm(st.curr[n:] - st.prev[n:])))

    return Tracer(PD_HEADER, row, every, sink)


def solve_pd(problem, method="ipds", steps=None, alpha=0.3, theta=0.01, delta_hat=None,
             rho=None, rho_frac=0.9, x0=None, y0=None, max_iters=20000, tol=1e-9,
             trace_every=1, sink=None, gamma=1.9, r=1.0):
    """Run one of ``ipds``, ``condat``, ``iadmm`` to a fixed point.

    ``steps`` is a :class:`StepSizes` for ``ipds``/``condat`` and a
    ``(tau, psi)`` pair for ``iadmm``; when omitted the diagonal
    preconditioner is used.
    """
    if method == "condat":
        alpha = 0.0
        rho = 1.0 if rho is None else rho
    if method in ("ipds", "condat"):
        if steps is None:
            steps = build_diag_preconditioner(problem.D, problem.E, gamma, r).steps()
        cert = validate_step_sizes(problem, steps)
        T = PrimalDualOperator(problem, steps)
    elif method == "iadmm":
        if steps is None:
            pc = build_admm_preconditioner(problem, gamma, r)
            steps = (pc.tau, pc.psi)
        cert = validate_admm_steps(problem, *steps)
        T = ADMMOperator(problem, *steps)
    else:
        raise ValueError(f"unknown method {method!r}")
    sched = make_schedule(alpha, theta, delta_hat, rho, rho_frac, relax_cap=cert.relax_cap)
    x0 = np.zeros(problem.n) if x0 is None else np.asarray(x0, dtype=np.float64)
    y0 = np.zeros(problem.m) if y0 is None else np.asarray(y0, dtype=np.float64)
    res = run(T, np.concatenate([x0, y0]), sched, max_iters=max_iters, tol=tol,
              tracer=_pd_tracer(problem, trace_every, sink))
    x, y = res.x[: problem.n], res.x[problem.n:]
    return PDResult(x, y, res.status, res.iterations, problem.objective(x), res.fp_residual,
                    res.trace, res.header, cert)


def fb_solve(problem, tau=None, x0=None, max_iters=100000, tol=1e-12):
    """Forward-backward iteration to a step residual below ``tol``."""
    L = float(problem.E.max(initial=0.0))
    tau = (1.0 / L if L > 0 else 1.0) if tau is None else tau
    x = np.zeros(problem.n) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    for k in range(1, max_iters + 1):
        x_new = forward_backward_step(problem, tau, x)
        step = float(np.linalg.norm(x_new - x))
        x = x_new
        if step <= tol:
            return x, "converged", k
    return x, "max_iters", max_iters
