"""Linear maps, the edge-replication operator and metric utilities.

Vectors are flat float64 arrays. Block vectors (one block per batch or
agent) are ``(N, q)`` arrays and are flattened row-major before being fed
to a map. Every map exposes ``apply``, ``adjoint`` and ``entries``; the
latter gives the nonzero triplets used for ``|D_ij|`` power sums.
"""
import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import PowerIterationError, ValidationError

__all__ = [
    "LinearMap", "DenseMap", "SparseMap", "DiagonalMap", "IdentityMap",
    "ZeroMap", "EdgeOperator", "ScaledMap",
    "apply_adjoint", "power_sums", "operator_norm_sq", "p_inner", "gram_diagonal",
    "as_diag",
]


def as_diag(d, n):
    """Broadcast a scalar or length-``n`` array to a float array of length ``n``."""
    arr = np.broadcast_to(np.asarray(d, dtype=np.float64), (n,))
    return np.array(arr)


class LinearMap:
    """Base class. Subclasses set ``shape = (m, n)`` and implement the three hooks."""

    shape = (0, 0)

    @property
    def n_in(self):
        return self.shape[1]

    @property
    def n_out(self):
        return self.shape[0]

    def apply(self, x):
        x = self._check(x, self.n_in, "input")
        return self._apply(x)

    def adjoint(self, y):
        y = self._check(y, self.n_out, "output")
        return self._adjoint(y)

    def entries(self):
        """Return ``(rows, cols, vals)`` for the stored nonzeros."""
        raise NotImplementedError

    def to_dense(self):
        rows, cols, vals = self.entries()
        out = np.zeros(self.shape)
        np.add.at(out, (rows, cols), vals)
        return out

    def _check(self, v, n, what):
        v = np.asarray(v, dtype=np.float64).ravel()
        if v.shape[0] != n:
            raise ValueError(
                f"dimension mismatch: {type(self).__name__} of shape {self.shape} "
                f"got {what} of length {v.shape[0]}"
            )
        return v

    def _apply(self, x):
        raise NotImplementedError

    def _adjoint(self, y):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(shape={self.shape})"


class DenseMap(LinearMap):
    def __init__(self, matrix):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        self.shape = self.matrix.shape

    def _apply(self, x):
        return self.matrix @ x

    def _adjoint(self, y):
        return self.matrix.T @ y

    def entries(self):
        rows, cols = np.nonzero(self.matrix)
        return rows.astype(np.int64), cols.astype(np.int64), self.matrix[rows, cols]

    def to_dense(self):
        return self.matrix.copy()


class SparseMap(LinearMap):
    """Row-sorted triplet storage; the column index array makes column sums cheap."""

    def __init__(self, rows, cols, vals, shape):
        mat = sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
        mat.sum_duplicates()
        mat.eliminate_zeros()
        coo = mat.tocoo()
        self.rows = coo.row.astype(np.int64)
        self.cols = coo.col.astype(np.int64)
        self.vals = coo.data.astype(np.float64)
        self.shape = tuple(int(s) for s in shape)

    @classmethod
    def from_dense(cls, matrix):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        rows, cols = np.nonzero(matrix)
        return cls(rows, cols, matrix[rows, cols], matrix.shape)

    @classmethod
    def from_scipy(cls, mat):
        coo = sp.coo_matrix(mat)
        return cls(coo.row, coo.col, coo.data, coo.shape)

    @classmethod
    def random(cls, m, n, density, rng, nonempty_rows=False):
        """Gaussian sparse matrix; ``nonempty_rows`` plants one entry in each empty row."""
        mat = sp.random(m, n, density=density, random_state=rng,
                        data_rvs=rng.standard_normal, format="coo")
        rows, cols, vals = list(mat.row), list(mat.col), list(mat.data)
        if nonempty_rows:
            empty = np.setdiff1d(np.arange(m), mat.row)
            rows += list(empty)
            cols += list(rng.integers(0, n, size=len(empty)))
            vals += list(rng.standard_normal(len(empty)))
        return cls(np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64),
                   np.array(vals, dtype=np.float64), (m, n))

    def to_scipy(self):
        return sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=self.shape)

    def _apply(self, x):
        return kernels.coo_matvec(self.rows, self.cols, self.vals, x, self.shape[0])

    def _adjoint(self, y):
        return kernels.coo_rmatvec(self.rows, self.cols, self.vals, y, self.shape[1])

    def entries(self):
        return self.rows, self.cols, self.vals


class DiagonalMap(LinearMap):
    """Positive diagonal map, used for step sizes and cocoercivity bounds."""

    def __init__(self, diag):
        d = np.atleast_1d(np.asarray(diag, dtype=np.float64)).copy()
        if d.ndim != 1:
            raise ValueError("diagonal must be one-dimensional")
        if not np.all(np.isfinite(d)) or np.any(d <= 0):
            raise ValidationError("diagonal map entries must be finite and strictly positive")
        d.setflags(write=False)
        self.diag = d
        self.shape = (d.size, d.size)

    @classmethod
    def scalar(cls, value, n):
        return cls(np.full(n, float(value)))

    def _apply(self, x):
        return self.diag * x

    def _adjoint(self, y):
        return self.diag * y

    def entries(self):
        idx = np.arange(self.diag.size, dtype=np.int64)
        return idx, idx, self.diag.copy()

    def inv(self):
        return DiagonalMap(1.0 / self.diag)

    def norm(self):
        return float(self.diag.max())


class IdentityMap(LinearMap):
    def __init__(self, n):
        self.shape = (int(n), int(n))

    def _apply(self, x):
        return x.copy()

    def _adjoint(self, y):
        return y.copy()

    def entries(self):
        idx = np.arange(self.shape[0], dtype=np.int64)
        return idx, idx, np.ones(self.shape[0])


class ZeroMap(LinearMap):
    def __init__(self, m, n):
        self.shape = (int(m), int(n))

    def _apply(self, x):
        return np.zeros(self.shape[0])

    def _adjoint(self, y):
        return np.zeros(self.shape[1])

    def entries(self):
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0)


class EdgeOperator(LinearMap):
    """Edge replication ``x -> (x_n, x_m)`` for every edge ``{n, m}``, ``n < m``.

    Input is the flattened ``(N, q)`` node array, output the flattened
    ``(2|E|, q)`` slot array. ``D*D`` is block diagonal with node degrees.
    """

    def __init__(self, graph, q):
        self.graph = graph
        self.q = int(q)
        self.shape = (2 * graph.n_edges * self.q, graph.n_nodes * self.q)

    def _apply(self, x):
        x = x.reshape(self.graph.n_nodes, self.q)
        return kernels.edge_gather(x, self.graph.edges).ravel()

    def _adjoint(self, y):
        y = y.reshape(2 * self.graph.n_edges, self.q)
        return kernels.edge_scatter(y, self.graph.edges, self.graph.n_nodes).ravel()

    def entries(self):
        q = self.q
        slot_nodes = self.graph.edges.ravel()
        j = np.arange(q)
        rows = (np.arange(slot_nodes.size)[:, None] * q + j).ravel()
        cols = (slot_nodes[:, None] * q + j).ravel()
        return rows.astype(np.int64), cols.astype(np.int64), np.ones(rows.size)


class ScaledMap(LinearMap):
    """``x -> left * D(right * x)`` for diagonal scalings ``left`` and ``right``."""

    def __init__(self, D, left, right):
        self.D = D
        self.left = as_diag(left, D.n_out)
        self.right = as_diag(right, D.n_in)
        self.shape = D.shape

    def _apply(self, x):
        return self.left * self.D.apply(self.right * x)

    def _adjoint(self, y):
        return self.right * self.D.adjoint(self.left * y)

    def entries(self):
        rows, cols, vals = self.D.entries()
        return rows, cols, self.left[rows] * vals * self.right[cols]


def apply_adjoint(D, y):
    """``D* y``."""
    return D.adjoint(y)


def power_sums(D, s):
    """Row sums of ``|D_ij|**s`` and column sums of ``|D_ij|**(2 - s)``.

    Zero entries contribute nothing, including when the exponent is zero.
    """
    if not 0.0 <= s <= 2.0:
        raise ValidationError(f"exponent s must lie in [0, 2], got {s}")
    rows, cols, vals = D.entries()
    m, n = D.shape
    return kernels.abs_power_sums(
        np.ascontiguousarray(rows, dtype=np.int64),
        np.ascontiguousarray(cols, dtype=np.int64),
        np.ascontiguousarray(vals, dtype=np.float64),
        float(s), m, n,
    )


def operator_norm_sq(M, tol=1e-9, max_iter=1000):
    """Estimate ``||M||^2`` by power iteration on ``M* M``.

    Starts from the normalized all-ones vector, so the result is
    deterministic. If that start lies in the kernel of ``M`` a fixed-seed
    Gaussian start is used instead. Raises :class:`PowerIterationError` when
    the relative change of the estimate is still above ``tol`` after
    ``max_iter`` iterations.
    """
    n = M.n_in
    if n == 0 or M.n_out == 0:
        return 0.0
    starts = [np.ones(n), np.random.default_rng(0).standard_normal(n)]
    for v in starts:
        v = v / np.linalg.norm(v)
        u = M.adjoint(M.apply(v))
        if np.linalg.norm(u) > 0:
            break
    else:
        return 0.0

    est = float(v @ u)
    for _ in range(max_iter):
        nrm = np.linalg.norm(u)
        if nrm == 0.0:
            return 0.0
        v = u / nrm
        u = M.adjoint(M.apply(v))
        new = float(v @ u)
        if abs(new - est) <= tol * abs(new):
            return new
        est = new
    raise PowerIterationError(
        f"power iteration did not reach relative tol {tol} in {max_iter} iterations", est
    )


def p_inner(z1, z2, tau, sigma, D):
    """``<z1, P z2>`` with ``P = [[1/tau, D*], [D, 1/sigma]]``.

    ``z1`` and ``z2`` are ``(x, y)`` pairs; ``tau`` and ``sigma`` may be
    scalars or per-coordinate arrays.
    """
    x1, y1 = (np.asarray(v, dtype=np.float64).ravel() for v in z1)
    x2, y2 = (np.asarray(v, dtype=np.float64).ravel() for v in z2)
    for x in (x1, x2):
        if x.size != D.n_in:
            raise ValueError("primal component has wrong dimension")
    for y in (y1, y2):
        if y.size != D.n_out:
            raise ValueError("dual component has wrong dimension")
    px = x2 / np.asarray(tau) + D.adjoint(y2)
    py = D.apply(x2) + y2 / np.asarray(sigma)
    return float(x1 @ px + y1 @ py)


def gram_diagonal(D, weights=None):
    """Diagonal of ``D* W D`` for ``W = diag(weights)``; raises if it is not diagonal."""
    w = np.ones(D.n_out) if weights is None else as_diag(weights, D.n_out)
    if isinstance(D, IdentityMap):
        return w.copy()
    if isinstance(D, DiagonalMap):
        return D.diag * w * D.diag
    if isinstance(D, EdgeOperator):
        slots = w.reshape(-1, D.q)
        return kernels.edge_scatter(slots, D.graph.edges, D.graph.n_nodes).ravel()
    rows, cols, vals = D.entries()
    Dm = sp.csr_matrix((vals, (rows, cols)), shape=D.shape)
    G = (Dm.T @ sp.diags(w) @ Dm).tocoo()
    diag = np.zeros(D.n_in)
    off = G.row != G.col
    scale = max(np.abs(G.data).max(initial=0.0), 1.0)
    if np.any(np.abs(G.data[off]) > 1e-14 * scale):
        raise ValidationError("D* W D is not diagonal for this D")
    np.add.at(diag, G.row[~off], G.data[~off])
    return diag
