"""Proximity operators, projections and smooth-loss oracles.

Every nonsmooth term exposes ``prox(v, step)`` returning

    argmin_w  g(w) + 1/2 ||w - v||^2_{W^{-1}},    W = diag(step)

where ``step`` is a positive scalar or a per-coordinate array. Smooth terms
expose ``value``, ``grad`` and a scalar cocoercivity bound ``lipschitz``
(``E = lipschitz * I``).
"""
import numpy as np

from . import kernels
from .errors import ValidationError
from .linops import DenseMap, DiagonalMap, LinearMap, SparseMap, operator_norm_sq

__all__ = [
    "prox_l1", "L1Norm", "ZeroFunction", "PointIndicator", "ConsensusIndicator",
    "PairConsensusIndicator", "project_consensus", "project_pair_anticonsensus",
    "prox_conjugate", "SmoothFunction", "ZeroSmooth", "Quadratic", "LeastSquares",
    "LogisticLoss", "logistic_oracle", "cocoercivity_diag_logistic", "as_linear_map",
]


def _vec(v):
    return np.asarray(v, dtype=np.float64).ravel()


def _steps(step, n):
    w = np.broadcast_to(np.asarray(step, dtype=np.float64), (n,))
    if np.any(w <= 0):
        raise ValidationError("prox step sizes must be strictly positive")
    return w


def prox_l1(W, v, lam):
    """Soft threshold ``sign(v) max(|v| - lam W, 0)``; ``W`` is a diagonal or step array."""
    if lam < 0:
        raise ValidationError(f"l1 weight must be nonnegative, got {lam}")
    v = _vec(v)
    w = W.diag if isinstance(W, DiagonalMap) else _steps(W, v.size)
    return kernels.soft_threshold(v, np.ascontiguousarray(lam * w))


class ProxFunction:
    """Base for proximable terms."""

    def prox(self, v, step):
        raise NotImplementedError

    def value(self, v):
        raise NotImplementedError


class L1Norm(ProxFunction):
    def __init__(self, lam):
        if lam < 0:
            raise ValidationError(f"l1 weight must be nonnegative, got {lam}")
        self.lam = float(lam)

    def prox(self, v, step):
        return prox_l1(step, v, self.lam)

    def value(self, v):
        return self.lam * float(np.abs(v).sum())

    def __repr__(self):
        return f"L1Norm({self.lam})"


class ZeroFunction(ProxFunction):
    def prox(self, v, step):
        return _vec(v).copy()

    def value(self, v):
        return 0.0


class PointIndicator(ProxFunction):
    """Indicator of the single point ``c`` (zero by default)."""

    def __init__(self, point=0.0):
        self.point = point

    def prox(self, v, step):
        v = _vec(v)
        return np.broadcast_to(np.asarray(self.point, dtype=np.float64), v.shape).copy()

    def value(self, v):
        c = np.broadcast_to(np.asarray(self.point, dtype=np.float64), np.shape(v))
        return 0.0 if np.array_equal(v, c) else np.inf


class ConsensusIndicator(ProxFunction):
    """Indicator of ``{(z, ..., z)}`` for ``n_blocks`` blocks of size ``q``.

    In a weighted metric the projection is the ``1/step``-weighted average.
    """

    def __init__(self, n_blocks, q):
        self.n_blocks, self.q = int(n_blocks), int(q)

    def prox(self, v, step):
        v = _vec(v).reshape(self.n_blocks, self.q)
        w = 1.0 / _steps(step, v.size).reshape(self.n_blocks, self.q)
        avg = (w * v).sum(axis=0) / w.sum(axis=0)
        return np.tile(avg, self.n_blocks)

    def value(self, v):
        v = _vec(v).reshape(self.n_blocks, self.q)
        return 0.0 if np.all(v == v[0]) else np.inf


class PairConsensusIndicator(ProxFunction):
    """Edgewise consensus: slots ``(2e, 2e+1)`` of a ``(2E, q)`` array must agree."""

    def __init__(self, n_pairs, q):
        self.n_pairs, self.q = int(n_pairs), int(q)

    def prox(self, v, step):
        v = _vec(v).reshape(self.n_pairs, 2, self.q)
        w = 1.0 / _steps(step, v.size).reshape(self.n_pairs, 2, self.q)
        avg = (w * v).sum(axis=1) / w.sum(axis=1)
        return np.repeat(avg[:, None, :], 2, axis=1).ravel()

    def value(self, v):
        v = _vec(v).reshape(self.n_pairs, 2, self.q)
        return 0.0 if np.array_equal(v[:, 0], v[:, 1]) else np.inf


def project_consensus(x):
    """Replace every row of the ``(N, q)`` block array by the row average."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    return np.broadcast_to(x.mean(axis=0), x.shape).copy()


def project_pair_anticonsensus(a, b):
    """Project ``(a, b)`` onto ``{(z, -z)}``."""
    a, b = _vec(a), _vec(b)
    if a.shape != b.shape:
        raise ValueError("pair components must have the same dimension")
    return (a - b) / 2.0, (b - a) / 2.0


def prox_conjugate(h, sigma, y):
    """``prox`` of ``h*`` with step ``sigma`` via the Moreau identity.

    ``prox_{S h*}(y) = y - S prox_{S^{-1} h}(S^{-1} y)`` for diagonal ``S``.
    """
    y = _vec(y)
    s = sigma.diag if isinstance(sigma, DiagonalMap) else _steps(sigma, y.size)
    return y - s * h.prox(y / s, 1.0 / s)


def as_linear_map(A):
    if isinstance(A, LinearMap):
        return A
    if hasattr(A, "tocoo"):
        return SparseMap.from_scipy(A)
    return DenseMap(A)


class SmoothFunction:
    """Base for differentiable terms with a scalar cocoercivity bound."""

    lipschitz = 0.0
    dim = 0

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def value_and_grad(self, x):
        return self.value(x), self.grad(x)

    @property
    def cocoercivity_diag(self):
        return np.full(self.dim, self.lipschitz)


class ZeroSmooth(SmoothFunction):
    def __init__(self, dim):
        self.dim = int(dim)
        self.lipschitz = 0.0

    def value(self, x):
        return 0.0

    def grad(self, x):
        return np.zeros(self.dim)


class Quadratic(SmoothFunction):
    """``weight/2 ||x - center||^2``."""

    def __init__(self, center, weight=1.0):
        self.center = _vec(center)
        self.weight = float(weight)
        self.dim = self.center.size
        self.lipschitz = self.weight

    def value(self, x):
        d = _vec(x) - self.center
        return 0.5 * self.weight * float(d @ d)

    def grad(self, x):
        return self.weight * (_vec(x) - self.center)


class LeastSquares(SmoothFunction):
    """``1/(2 m) ||A x - b||^2`` with ``m`` defaulting to the number of rows."""

    def __init__(self, A, b, scale_rows=None, lipschitz=None):
        self.A = as_linear_map(A)
        self.b = _vec(b)
        self.m = int(scale_rows or self.A.n_out)
        self.dim = self.A.n_in
        self.lipschitz = (
            float(lipschitz) if lipschitz is not None else operator_norm_sq(self.A) / self.m
        )

    def value(self, x):
        r = self.A.apply(x) - self.b
        return 0.5 * float(r @ r) / self.m

    def grad(self, x):
        return self.A.adjoint(self.A.apply(x) - self.b) / self.m

    def value_and_grad(self, x):
        r = self.A.apply(x) - self.b
        return 0.5 * float(r @ r) / self.m, self.A.adjoint(r) / self.m


def _check_labels(labels):
    labels = _vec(labels)
    if not np.all((labels == 1.0) | (labels == -1.0)):
        raise ValidationError("labels must be -1 or +1")
    return labels


def logistic_oracle(A, labels, x, scale_rows=None):
    """Value and gradient of ``1/m sum_i log(1 + exp(-y_i a_i^T x))``.

    ``scale_rows`` overrides ``m`` so that a batch of rows can carry the
    global normalisation.
    """
    A = as_linear_map(A)
    labels = _check_labels(labels)
    m = scale_rows or A.n_out
    t = labels * A.apply(x)
    total, deriv = kernels.logistic_terms(t)
    return total / m, A.adjoint(labels * deriv) / m


def cocoercivity_diag_logistic(A, m=None):
    """``E = ||A||^2 / (4 m) I``."""
    A = as_linear_map(A)
    m = m or A.n_out
    return DiagonalMap.scalar(operator_norm_sq(A) / (4.0 * m), A.n_in)


class LogisticLoss(SmoothFunction):
    def __init__(self, A, labels, scale_rows=None, lipschitz=None):
        self.A = as_linear_map(A)
        self.labels = _check_labels(labels)
        if self.labels.size != self.A.n_out:
            raise ValueError("one label per row of A is required")
        self.m = int(scale_rows or self.A.n_out)
        self.dim = self.A.n_in
        self.lipschitz = (
            float(lipschitz) if lipschitz is not None
            else operator_norm_sq(self.A) / (4.0 * self.m)
        )

    def value_and_grad(self, x):
        return logistic_oracle(self.A, self.labels, x, self.m)

    def value(self, x):
        total, _ = kernels.logistic_terms(self.labels * self.A.apply(x))
        return total / self.m

    def grad(self, x):
        return self.value_and_grad(x)[1]
