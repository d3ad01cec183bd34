"""Undirected agent graphs with a canonical edge ordering."""
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ValidationError

__all__ = ["AgentGraph", "build_graph", "read_edge_list", "write_edge_list"]


@dataclass(frozen=True)
class AgentGraph:
    """Connected simple graph on nodes ``0..n_nodes-1``.

    ``edges`` is an ``(E, 2)`` int array with ``edges[e, 0] < edges[e, 1]``,
    sorted lexicographically. Edge ``e`` owns the dual slots ``2e`` (lower
    endpoint) and ``2e + 1`` (upper endpoint).
    """

    n_nodes: int
    edges: np.ndarray
    degrees: np.ndarray = field(init=False)
    neighbors: tuple = field(init=False)
    lower_edges: tuple = field(init=False)
    upper_edges: tuple = field(init=False)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if self.n_nodes < 2:
            raise ValidationError("a graph needs at least two agents")
        if edges.size and (edges.min() < 0 or edges.max() >= self.n_nodes):
            raise ValidationError("edge endpoint out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValidationError("self-loops are not allowed (graph must have no self loop)")
        edges = np.sort(edges, axis=1)
        edges = np.unique(edges, axis=0)
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)

        adj = coo_matrix(
            (np.ones(len(edges)), (edges[:, 0], edges[:, 1])),
            shape=(self.n_nodes, self.n_nodes),
        )
        n_comp, _ = connected_components(adj, directed=False)
        if n_comp != 1:
            raise ValidationError(
                f"graph is disconnected ({n_comp} components); agents must form a connected graph"
            )

        deg = np.bincount(edges.ravel(), minlength=self.n_nodes)
        deg.setflags(write=False)
        object.__setattr__(self, "degrees", deg)
        lower = tuple(np.flatnonzero(edges[:, 0] == n) for n in range(self.n_nodes))
        upper = tuple(np.flatnonzero(edges[:, 1] == n) for n in range(self.n_nodes))
        nbrs = tuple(
            np.concatenate([edges[lower[n], 1], edges[upper[n], 0]]) for n in range(self.n_nodes)
        )
        object.__setattr__(self, "lower_edges", lower)
        object.__setattr__(self, "upper_edges", upper)
        object.__setattr__(self, "neighbors", nbrs)

    @property
    def n_edges(self):
        return len(self.edges)

    def owned_slots(self, n):
        """Dual slot indices owned by node ``n`` (lower-role edges first)."""
        return np.concatenate([2 * self.lower_edges[n], 2 * self.upper_edges[n] + 1])


def build_graph(spec, n_nodes=None):
    """Build a graph from ``ring``, ``path``, ``complete`` or an edge-list file."""
    if spec in ("ring", "path", "complete"):
        if n_nodes is None or n_nodes < 2:
            raise ValidationError(f"{spec} graph needs n_nodes >= 2")
        if spec == "complete":
            edges = [(i, j) for i in range(n_nodes) for j in range(i + 1, n_nodes)]
        else:
            edges = [(i, i + 1) for i in range(n_nodes - 1)]
            if spec == "ring" and n_nodes > 2:
                edges.append((0, n_nodes - 1))
        return AgentGraph(n_nodes, np.array(edges))
    return read_edge_list(spec, n_nodes)


def read_edge_list(path, n_nodes=None):
    """Read whitespace-separated 1-indexed ``n m`` pairs, one per line."""
    pairs = []
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValidationError(f"{path}:{lineno}: expected 'n m', got {raw!r}")
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: non-integer node id in {raw!r}") from None
        if a < 1 or b < 1:
            raise ValidationError(f"{path}:{lineno}: node ids are 1-indexed")
        pairs.append((a - 1, b - 1))
    if not pairs:
        raise ValidationError(f"{path}: no edges")
    edges = np.array(pairs, dtype=np.int64)
    inferred = int(edges.max()) + 1
    if n_nodes is None:
        n_nodes = inferred
    elif n_nodes < inferred:
        raise ValidationError(f"{path}: node id {inferred} exceeds n_nodes={n_nodes}")
    return AgentGraph(n_nodes, edges)


def write_edge_list(graph, path):
    lines = [f"{a + 1} {b + 1}" for a, b in graph.edges]
    Path(path).write_text("\n".join(lines) + "\n")
