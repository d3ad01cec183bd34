"""Consensus over a graph: synchronous edge ADMM and its asynchronous variant.

State layout is ``z = [x (N*q), y (2|E|*q)]``; edge ``e = {n, m}`` with
``n < m`` owns the dual slots ``2e`` (seen by ``n``) and ``2e + 1`` (seen by
``m``). Coordinate block ``n`` is ``x_n`` plus every slot agent ``n`` owns.

Two dual rules are available. The general rule

    y_e(n) = (eta_e(n) - eta_e(m))/2 + Psi^{-1} (xi_n - xi_m)/2

is what the edge-consensus ADMM produces for any state. The antisymmetric
rule ``y_e(n) = eta_e(n) + Psi^{-1} (xi_n - xi_m)/2`` assumes
``eta_e(n) = -eta_e(m)``, which the synchronous solver preserves.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ValidationError
from .graph import AgentGraph, build_graph, read_edge_list, write_edge_list
from .km import BlockOperator, CoordinateSampler, Tracer, km_step, make_schedule, run
from .linops import as_diag
from .minibatch import batch_preconditioner, consensus_error
from .primal_dual import admm_certificate

__all__ = [
    "AgentGraph", "build_graph", "read_edge_list", "write_edge_list", "DistOperator",
    "dist_padmm_step", "pdapds_step", "consensus_error", "solve_distributed",
    "activation_sampler", "DIST_HEADER",
]

DIST_HEADER = ("k", "active_set", "objective", "consensus_error", "residual")


class DistOperator(BlockOperator):
    """Edge-consensus ADMM operator for agents on ``graph``.

    Parameters
    ----------
    bp : BatchedProblem
        One ``(f_n, g_n)`` pair per agent.
    graph : AgentGraph
    tau, psi : scalar or length-q arrays
        Primal step and dual metric weight, shared by all agents.
    antisymmetric : bool
        Use the dual rule that assumes antisymmetric edge duals.
    printed_dual_scaling : bool
        Drop ``Psi^{-1}`` from the dual update (only equivalent when ``psi = 1``).
    """

    def __init__(self, bp, graph, tau, psi, antisymmetric=False, printed_dual_scaling=False):
        if bp.N != graph.n_nodes:
            raise ValidationError("one batch per agent is required")
        self.bp, self.graph = bp, graph
        q, N = bp.q, bp.N
        self.tau = as_diag(tau, q)
        self.psi = as_diag(psi, q)
        self.psi_inv = 1.0 / self.psi
        self.dual_scale = np.ones(q) if printed_dual_scaling else self.psi_inv
        self.antisymmetric = antisymmetric
        self.cert = admm_certificate(self.tau, self.psi, bp.ehat)
        self.deg = graph.degrees.astype(np.float64)
        self.n_x = N * q
        blocks = []
        for n in range(N):
            slots = graph.owned_slots(n)
            y_idx = (slots[:, None] * q + np.arange(q)).ravel()
            blocks.append(np.concatenate([np.arange(n * q, (n + 1) * q), self.n_x + y_idx]))
        super().__init__(N * q + 2 * graph.n_edges * q, blocks)

    def split(self, z):
        q = self.bp.q
        return z[: self.n_x].reshape(-1, q), z[self.n_x:].reshape(-1, q)

    def _primal(self, n, X, agg_n):
        t = self.tau / self.deg[n]
        grad = self.bp.fs[n].grad(X[n])
        v = X[n] - self.tau * self.psi_inv * X[n] - t * grad + t * agg_n
        return self.bp.gs[n].prox(v, t)

    def apply(self, z):
        X, Y = self.split(z)
        edges = self.graph.edges
        Y_new = kernels.edge_dual_update(Y, X, edges, self.dual_scale, self.antisymmetric)
        agg = kernels.neighbor_aggregate(Y, X, edges, self.psi_inv, self.bp.N,
                                         self.antisymmetric)
        X_new = np.empty_like(X)
        for n in range(self.bp.N):
            X_new[n] = self._primal(n, X, agg[n])
        return np.concatenate([X_new.ravel(), Y_new.ravel()])

    def apply_block(self, n, z):
        X, Y = self.split(z)
        g = self.graph
        edges = g.edges
        pinv, dscale = self.psi_inv, self.dual_scale
        agg = np.zeros(self.bp.q)
        duals = []
        # same operation order as the full kernels: lower-role edges, then upper-role
        for e in g.lower_edges[n]:
            m = edges[e, 1]
            half_gap = dscale * (X[n] - X[m]) / 2.0
            if self.antisymmetric:
                duals.append(Y[2 * e] + half_gap)
                agg += pinv * X[m] - Y[2 * e]
            else:
                duals.append((Y[2 * e] - Y[2 * e + 1]) / 2.0 + half_gap)
                agg += pinv * X[m] + Y[2 * e + 1]
        for e in g.upper_edges[n]:
            lo = edges[e, 0]
            half_gap = dscale * (X[lo] - X[n]) / 2.0
            if self.antisymmetric:
                duals.append(Y[2 * e + 1] - half_gap)
                agg += pinv * X[lo] - Y[2 * e + 1]
            else:
                duals.append((Y[2 * e + 1] - Y[2 * e]) / 2.0 - half_gap)
                agg += pinv * X[lo] + Y[2 * e]
        x_new = self._primal(n, X, agg)
        return np.concatenate([x_new] + duals)


def _check_antisymmetric(Y):
    Y = np.asarray(Y).reshape(-1, 2, np.shape(Y)[-1])
    scale = max(np.max(np.abs(Y), initial=0.0), 1.0)
    if np.max(np.abs(Y[:, 0] + Y[:, 1]), initial=0.0) > 1e-12 * scale:
        raise ValidationError(
            "the synchronous solver needs antisymmetric edge duals y_e(n) = -y_e(m)"
        )


def dist_padmm_step(bp, graph, tau, psi, sched, st, printed_dual_scaling=False):
    """Synchronous step of all agents; ``st`` is a :class:`~pdsplit.km.KMState`."""
    T = DistOperator(bp, graph, tau, psi, antisymmetric=True,
                     printed_dual_scaling=printed_dual_scaling)
    _check_antisymmetric(T.split(st.curr)[1])
    return km_step(T, st, sched)


def pdapds_step(bp, graph, tau, psi, sched, activation, st, printed_dual_scaling=False):
    """Asynchronous step: agents drawn by ``activation`` update, the rest carry over."""
    if activation.n_blocks != graph.n_nodes:
        raise ValidationError("activation schedule must cover the graph's agents")
    T = DistOperator(bp, graph, tau, psi, antisymmetric=False,
                     printed_dual_scaling=printed_dual_scaling)
    return km_step(T, st, sched, activation.draw())


def activation_sampler(n_agents, kind="singletons", seed=0, p=0.5):
    """``singletons`` (one uniform agent per tick) or ``bernoulli`` (each agent w.p. ``p``).

    The Bernoulli variant enumerates nonempty subsets, so keep ``n_agents`` small.
    """
    if kind == "singletons":
        return CoordinateSampler.singletons(n_agents, seed)
    if kind == "full":
        return CoordinateSampler.full(n_agents)
    if kind == "bernoulli":
        if n_agents > 16:
            raise ValidationError("bernoulli activation is limited to 16 agents")
        subsets, probs = [], []
        for mask in range(1, 2 ** n_agents):
            s = [j for j in range(n_agents) if mask >> j & 1]
            subsets.append(s)
            probs.append(p ** len(s) * (1 - p) ** (n_agents - len(s)))
        probs = np.asarray(probs) / np.sum(probs)
        return CoordinateSampler(n_agents, subsets, probs, seed)
    raise ValueError(f"unknown activation kind {kind!r}")


@dataclass
class DistResult:
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


def solve_distributed(bp, graph, asynchronous=False, seed=0, alpha=0.3, theta=0.01,
                      delta_hat=None, rho=None, rho_frac=0.9, gamma=1.9, r=1.0, X0=None,
                      Y0=None, max_iters=200000, tol=1e-9, trace_every=1, sink=None,
                      activation=None, printed_dual_scaling=False):
    """Run the synchronous solver or its asynchronous randomized version."""
    N, q = bp.N, bp.q
    pc = batch_preconditioner(bp.ehat, gamma, r)
    T = DistOperator(bp, graph, pc.tau, pc.psi, antisymmetric=not asynchronous,
                     printed_dual_scaling=printed_dual_scaling)
    X0 = np.zeros((N, q)) if X0 is None else np.asarray(X0, dtype=np.float64).reshape(N, q)
    n_slots = 2 * graph.n_edges
    Y0 = np.zeros((n_slots, q)) if Y0 is None else np.asarray(Y0, dtype=np.float64).reshape(
        n_slots, q)
    if not asynchronous:
        _check_antisymmetric(Y0)
        activation = None
    elif activation is None:
        activation = activation_sampler(N, "singletons", seed)
    sched = make_schedule(alpha, theta, delta_hat, rho, rho_frac, relax_cap=T.cert.relax_cap)

    def row(k, st, residual, active):
        X, _ = T.split(st.curr)
        act = " ".join(str(j + 1) for j in (active if active is not None else range(N)))
        return (k, act, bp.objective(X.mean(axis=0)), consensus_error(X), residual)

    tracer = Tracer(DIST_HEADER, row, trace_every, sink)
    res = run(T, np.concatenate([X0.ravel(), Y0.ravel()]), sched, sampler=activation,
              max_iters=max_iters, tol=tol, tracer=tracer)
    X, Y = T.split(res.x)
    xbar = X.mean(axis=0)
    return DistResult(xbar, X.copy(), Y.copy(), res.status, res.iterations, bp.objective(xbar),
                      consensus_error(X), res.fp_residual, res.trace, res.header)
