import numpy as np
import pytest

from pdsplit.errors import ValidationError
from pdsplit.graph import AgentGraph, build_graph, read_edge_list, write_edge_list


def test_ring_three_is_triangle():
    g = build_graph("ring", 3)
    assert g.edges.tolist() == [[0, 1], [0, 2], [1, 2]]
    assert g.degrees.tolist() == [2, 2, 2]


def test_path_two():
    g = build_graph("path", 2)
    assert g.n_edges == 1 and g.degrees.tolist() == [1, 1]


def test_complete_and_ring_sizes():
    assert build_graph("complete", 5).n_edges == 10
    assert build_graph("ring", 5).n_edges == 5
    assert build_graph("ring", 2).n_edges == 1


def test_isolated_node_rejected(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("1 2\n2 3\n")
    with pytest.raises(ValidationError, match="disconnected"):
        read_edge_list(p, n_nodes=4)


def test_self_loop_rejected():
    with pytest.raises(ValidationError, match="self"):
        AgentGraph(2, np.array([[0, 1], [1, 1]]))


def test_duplicate_edges_merged():
    g = AgentGraph(3, np.array([[1, 0], [0, 1], [2, 1]]))
    assert g.edges.tolist() == [[0, 1], [1, 2]]


def test_edge_list_roundtrip(tmp_path):
    g = build_graph("ring", 6)
    p = tmp_path / "ring.txt"
    write_edge_list(g, p)
    assert p.read_text().splitlines()[0] == "1 2"
    h = read_edge_list(p)
    assert np.array_equal(g.edges, h.edges)


def test_edge_list_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("1 2\n2 x\n")
    with pytest.raises(ValidationError, match=":2:"):
        read_edge_list(p)
    p.write_text("0 1\n")
    with pytest.raises(ValidationError, match="1-indexed"):
        read_edge_list(p)
    p.write_text("# only a comment\n")
    with pytest.raises(ValidationError, match="no edges"):
        read_edge_list(p)


def test_owned_slots_lower_first():
    g = build_graph("ring", 4)
    # edges (0,1) (0,3) (1,2) (2,3); node 1 is upper on (0,1), lower on (1,2)
    assert g.owned_slots(1).tolist() == [4, 1]
    assert sorted(np.concatenate([g.owned_slots(n) for n in range(4)]).tolist()) == list(
        range(8))


def test_unknown_spec(tmp_path):
    with pytest.raises(FileNotFoundError):
        build_graph(str(tmp_path / "missing.txt"), 3)
