import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pdsplit.errors import ValidationError
from pdsplit.linops import DenseMap, DiagonalMap, IdentityMap
from pdsplit.prox import (
    ConsensusIndicator, L1Norm, LeastSquares, LogisticLoss, PairConsensusIndicator,
    PointIndicator, Quadratic, ZeroFunction, cocoercivity_diag_logistic, logistic_oracle,
    project_consensus, project_pair_anticonsensus, prox_conjugate, prox_l1,
)


def test_prox_l1_examples():
    assert prox_l1(1.0, [3.0, -0.5, 0.0], 1.0).tolist() == [2.0, 0.0, 0.0]
    v = np.array([1.5, -2.0, 0.25])
    assert np.array_equal(prox_l1(1.0, v, 0.0), v)
    assert prox_l1(DiagonalMap([2.0, 1.0]), [3.0, 3.0], 1.0).tolist() == [1.0, 2.0]


def test_prox_l1_negative_lambda():
    with pytest.raises(ValidationError):
        prox_l1(1.0, [1.0], -1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(-10, 10), st.floats(0.01, 5), st.floats(0, 5))
def test_prox_l1_optimality(v, tau, lam):
    w = prox_l1(tau, [v], lam)[0]
    # 0 in lam * d|w| + (w - v)/tau
    g = (v - w) / tau
    if w != 0:
        assert abs(g - lam * np.sign(w)) <= 1e-9 * (1 + abs(v) / tau)
    else:
        assert abs(g) <= lam + 1e-12


def _firm_probe(prox, dim, rng, step, pairs=100):
    W = np.broadcast_to(step, (dim,))
    for _ in range(pairs):
        u, v = 3 * rng.standard_normal(dim), 3 * rng.standard_normal(dim)
        pu, pv = prox(u), prox(v)
        d = pu - pv
        lhs = (d / W) @ d
        rhs = (d / W) @ (u - v)
        assert lhs <= rhs + 1e-10


@pytest.mark.parametrize("func", [
    L1Norm(0.7), ZeroFunction(), PointIndicator(0.0), ConsensusIndicator(3, 2),
    PairConsensusIndicator(3, 1),
])
def test_firm_nonexpansive(func, rng):
    step = rng.random(6) + 0.2
    _firm_probe(lambda v: func.prox(v, step), 6, rng, step)


def test_project_consensus():
    assert project_consensus(np.array([[1.0], [3.0]])).tolist() == [[2.0], [2.0]]
    X = np.tile([1.0, -2.0], (4, 1))
    assert np.array_equal(project_consensus(X), X)


def test_project_consensus_idempotent_and_optimal(rng):
    X = rng.standard_normal((3, 1))
    P = project_consensus(X)
    assert np.array_equal(project_consensus(P), P)
    grid = np.linspace(-5, 5, 200001)
    z = grid[np.argmin(((X[:, 0][:, None] - grid) ** 2).sum(axis=0))]
    assert abs(P[0, 0] - z) <= 1e-4


def test_pair_anticonsensus():
    assert [v.tolist() for v in project_pair_anticonsensus([1.0], [-1.0])] == [[1.0], [-1.0]]
    assert [v.tolist() for v in project_pair_anticonsensus([1.0], [1.0])] == [[0.0], [0.0]]
    assert [v.tolist() for v in project_pair_anticonsensus([3.0], [1.0])] == [[1.0], [-1.0]]
    with pytest.raises(ValueError):
        project_pair_anticonsensus([1.0, 2.0], [1.0])


def test_prox_conjugate_examples():
    out = prox_conjugate(PairConsensusIndicator(1, 1), 1.0, [3.0, 1.0])
    assert out.tolist() == [1.0, -1.0]
    a, b = project_pair_anticonsensus([3.0], [1.0])
    assert out.tolist() == [a[0], b[0]]
    assert prox_conjugate(ZeroFunction(), 2.0, [5.0, -1.0]).tolist() == [0.0, 0.0]
    assert prox_conjugate(L1Norm(1.0), DiagonalMap([1.0]), [2.0]).tolist() == [1.0]


def test_moreau_reconstruction(rng):
    h = L1Norm(0.4)
    for _ in range(50):
        s = rng.random(5) + 0.1
        y = 4 * rng.standard_normal(5)
        conj = prox_conjugate(h, s, y)
        primal = h.prox(y / s, 1.0 / s)
        np.testing.assert_allclose(s * primal + conj, y, atol=1e-12)


def test_logistic_at_zero(small_logistic):
    A, y = small_logistic.A, small_logistic.labels
    val, grad = logistic_oracle(A, y, np.zeros(A.shape[1]))
    assert val == pytest.approx(np.log(2), rel=1e-15)
    np.testing.assert_allclose(grad, -(A.T @ y) / (2 * len(y)), atol=1e-15)


def test_logistic_monotone_limit():
    vals = [logistic_oracle([[1.0]], [1.0], [t])[0] for t in (0, 1, 10, 100, 700, 1e4)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] == 0.0


def test_logistic_extreme_margins_finite():
    val, grad = logistic_oracle([[1.0], [1.0]], [1.0, -1.0], [700.0])
    assert np.isfinite(val) and np.all(np.isfinite(grad))
    assert val == pytest.approx(700.0 / 2, rel=1e-12)


def test_logistic_bad_labels():
    with pytest.raises(ValidationError):
        logistic_oracle([[1.0]], [0.5], [0.0])


def _fd_check(f, x, h=1e-5):
    g = f.grad(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        fd = (f.value(x + e) - f.value(x - e)) / (2 * h)
        assert abs(fd - g[j]) <= 1e-5


def test_gradients_finite_difference(rng):
    A = rng.standard_normal((3, 4))
    labels = np.array([1.0, -1.0, 1.0])
    for f in (LogisticLoss(A, labels), LeastSquares(A, rng.standard_normal(3)),
              Quadratic(rng.standard_normal(4), 2.0)):
        for _ in range(5):
            _fd_check(f, rng.standard_normal(4))


def test_logistic_gradient_1e6(rng):
    A = rng.standard_normal((3, 5))
    f = LogisticLoss(A, [1.0, -1.0, -1.0])
    x = rng.standard_normal(5)
    h = 1e-6
    fd = np.array([(f.value(x + h * e) - f.value(x - h * e)) / (2 * h) for e in np.eye(5)])
    np.testing.assert_allclose(fd, f.grad(x), atol=1e-6)


def test_cocoercivity_constants():
    assert cocoercivity_diag_logistic(DenseMap([[2.0]]), 1).diag.tolist() == [1.0]
    q = 5
    E = cocoercivity_diag_logistic(IdentityMap(q), q)
    np.testing.assert_allclose(E.diag, 1.0 / (4 * q))


@pytest.mark.parametrize("kind", ["logistic", "lasso"])
def test_cocoercivity_probe(kind, rng):
    A = rng.standard_normal((20, 5))
    if kind == "logistic":
        f = LogisticLoss(A, np.where(rng.random(20) < 0.5, -1.0, 1.0))
        np.testing.assert_allclose(cocoercivity_diag_logistic(A, 20).diag, f.lipschitz)
    else:
        f = LeastSquares(A, rng.standard_normal(20))
    E = f.cocoercivity_diag
    for _ in range(1000):
        x, y = 3 * rng.standard_normal(5), 3 * rng.standard_normal(5)
        d = f.grad(x) - f.grad(y)
        assert d @ (x - y) >= (d / E) @ d - 1e-12
