"""numba kernels. Same signatures and summation order as ``_kernels_numpy``."""
import numpy as np
from numba import njit


@njit(cache=True)
def coo_matvec(rows, cols, vals, x, m):
    out = np.zeros(m)
    for k in range(vals.shape[0]):
        out[rows[k]] += vals[k] * x[cols[k]]
    return out


@njit(cache=True)
def coo_rmatvec(rows, cols, vals, y, n):
    out = np.zeros(n)
    for k in range(vals.shape[0]):
        out[cols[k]] += vals[k] * y[rows[k]]
    return out


@njit(cache=True)
def abs_power_sums(rows, cols, vals, s, m, n):
    row_sums = np.zeros(m)
    col_sums = np.zeros(n)
    for k in range(vals.shape[0]):
        a = abs(vals[k])
        if a == 0.0:
            continue
        row_sums[rows[k]] += a ** s
        col_sums[cols[k]] += a ** (2.0 - s)
    return row_sums, col_sums


@njit(cache=True)
def soft_threshold(v, thr):
    out = np.empty_like(v)
    for i in range(v.shape[0]):
        a = abs(v[i]) - thr[i]
        if a <= 0.0:
            out[i] = 0.0
        elif v[i] > 0.0:
            out[i] = a
        else:
            out[i] = -a
    return out


@njit(cache=True)
def logistic_terms(t):
    total = 0.0
    deriv = np.empty_like(t)
    for i in range(t.shape[0]):
        e = np.exp(-abs(t[i]))
        if t[i] > 0.0:
            total += np.log1p(e)
            deriv[i] = -e / (1.0 + e)
        else:
            total += -t[i] + np.log1p(e)
            deriv[i] = -1.0 / (1.0 + e)
    return total, deriv


@njit(cache=True)
def edge_gather(x, edges):
    n_edges = edges.shape[0]
    q = x.shape[1]
    out = np.empty((2 * n_edges, q))
    for e in range(n_edges):
        for j in range(q):
            out[2 * e, j] = x[edges[e, 0], j]
            out[2 * e + 1, j] = x[edges[e, 1], j]
    return out


@njit(cache=True)
def edge_scatter(slots, edges, n_nodes):
    q = slots.shape[1]
    out = np.zeros((n_nodes, q))
    for e in range(edges.shape[0]):
        for j in range(q):
            out[edges[e, 0], j] += slots[2 * e, j]
    for e in range(edges.shape[0]):
        for j in range(q):
            out[edges[e, 1], j] += slots[2 * e + 1, j]
    return out


@njit(cache=True)
def edge_dual_update(eta, xi, edges, psi_inv, antisymmetric):
    q = xi.shape[1]
    out = np.empty_like(eta)
    for e in range(edges.shape[0]):
        n = edges[e, 0]
        m = edges[e, 1]
        for j in range(q):
            half_gap = psi_inv[j] * (xi[n, j] - xi[m, j]) / 2.0
            if antisymmetric:
                out[2 * e, j] = eta[2 * e, j] + half_gap
                out[2 * e + 1, j] = eta[2 * e + 1, j] - half_gap
            else:
                out[2 * e, j] = (eta[2 * e, j] - eta[2 * e + 1, j]) / 2.0 + half_gap
                out[2 * e + 1, j] = (eta[2 * e + 1, j] - eta[2 * e, j]) / 2.0 - half_gap
    return out


@njit(cache=True)
def neighbor_aggregate(eta, xi, edges, psi_inv, n_nodes, antisymmetric):
    q = xi.shape[1]
    out = np.zeros((n_nodes, q))
    for e in range(edges.shape[0]):
        n = edges[e, 0]
        m = edges[e, 1]
        for j in range(q):
            if antisymmetric:
                out[n, j] += psi_inv[j] * xi[m, j] - eta[2 * e, j]
            else:
                out[n, j] += psi_inv[j] * xi[m, j] + eta[2 * e + 1, j]
    for e in range(edges.shape[0]):
        n = edges[e, 0]
        m = edges[e, 1]
        for j in range(q):
            if antisymmetric:
                out[m, j] += psi_inv[j] * xi[n, j] - eta[2 * e + 1, j]
            else:
                out[m, j] += psi_inv[j] * xi[n, j] + eta[2 * e, j]
    return out
