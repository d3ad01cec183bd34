"""Pure-numpy kernels. Same signatures as ``_kernels_numba``."""
import numpy as np


def coo_matvec(rows, cols, vals, x, m):
    return np.bincount(rows, weights=vals * x[cols], minlength=m).astype(np.float64)


def coo_rmatvec(rows, cols, vals, y, n):
    return np.bincount(cols, weights=vals * y[rows], minlength=n).astype(np.float64)


def abs_power_sums(rows, cols, vals, s, m, n):
    a = np.abs(vals)
    nz = a != 0.0
    # 0**0 counts as 0, so zero entries never contribute
    row_terms = np.where(nz, a ** s, 0.0)
    col_terms = np.where(nz, a ** (2.0 - s), 0.0)
    row_sums = np.bincount(rows, weights=row_terms, minlength=m).astype(np.float64)
    col_sums = np.bincount(cols, weights=col_terms, minlength=n).astype(np.float64)
    return row_sums, col_sums


def soft_threshold(v, thr):
    return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)


def logistic_terms(t):
    """Return ``sum(log(1 + exp(-t)))`` and ``d/dt log(1 + exp(-t))``."""
    pos = t > 0
    e = np.exp(-np.abs(t))
    loss = np.where(pos, np.log1p(e), -t + np.log1p(e))
    deriv = np.where(pos, -e / (1.0 + e), -1.0 / (1.0 + e))
    return float(loss.sum()), deriv


def edge_gather(x, edges):
    out = np.empty((2 * edges.shape[0], x.shape[1]))
    out[0::2] = x[edges[:, 0]]
    out[1::2] = x[edges[:, 1]]
    return out


def edge_scatter(slots, edges, n_nodes):
    out = np.zeros((n_nodes, slots.shape[1]))
    np.add.at(out, edges[:, 0], slots[0::2])
    np.add.at(out, edges[:, 1], slots[1::2])
    return out


def edge_dual_update(eta, xi, edges, psi_inv, antisymmetric):
    en, em = edges[:, 0], edges[:, 1]
    half_gap = psi_inv * (xi[en] - xi[em]) / 2.0
    out = np.empty_like(eta)
    if antisymmetric:
        out[0::2] = eta[0::2] + half_gap
        out[1::2] = eta[1::2] - half_gap
    else:
        out[0::2] = (eta[0::2] - eta[1::2]) / 2.0 + half_gap
        out[1::2] = (eta[1::2] - eta[0::2]) / 2.0 - half_gap
    return out


def neighbor_aggregate(eta, xi, edges, psi_inv, n_nodes, antisymmetric):
    """Per-node sum of ``psi_inv*xi_m + eta_(n,m)(m)`` over neighbours m.

    With ``antisymmetric`` the dual term is ``-eta_(n,m)(n)`` instead.
    """
    en, em = edges[:, 0], edges[:, 1]
    if antisymmetric:
        to_n = psi_inv * xi[em] - eta[0::2]
        to_m = psi_inv * xi[en] - eta[1::2]
    else:
        to_n = psi_inv * xi[em] + eta[1::2]
        to_m = psi_inv * xi[en] + eta[0::2]
    out = np.zeros((n_nodes, xi.shape[1]))
    np.add.at(out, en, to_n)
    np.add.at(out, em, to_m)
    return out
