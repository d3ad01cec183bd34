import numpy as np
import pytest

from pdsplit.errors import StepSizeError, ValidationError
from pdsplit.linops import DenseMap, DiagonalMap, IdentityMap, SparseMap, ZeroMap
from pdsplit.km import make_schedule, validate_schedule
from pdsplit.primal_dual import (
    ADMMOperator, CompositeProblem, PrimalDualOperator, PrimalDualState, StepSizes,
    build_admm_preconditioner, build_diag_preconditioner, condat_step,
    forward_backward_step, iadmm_step, ipds_step, solve_pd, validate_admm_steps,
    validate_step_sizes,
)
from pdsplit.prox import (
    L1Norm, LeastSquares, PointIndicator, Quadratic, ZeroFunction, ZeroSmooth, prox_conjugate,
)

PICARD = validate_schedule(0.0, 0.01, 1.0, 1.0, relax_cap=2.0)


def lasso_1d(h=None, D=None):
    return CompositeProblem(Quadratic([1.0]), L1Norm(0.1), h or ZeroFunction(),
                            D or ZeroMap(1, 1))


def test_validate_scalar_examples():
    p = CompositeProblem(Quadratic(np.zeros(1)), ZeroFunction(), ZeroFunction(), ZeroMap(1, 1))
    cert = validate_step_sizes(p, StepSizes.scalars(1.0, 1.0, 1, 1))
    assert cert.margin == pytest.approx(0.5)
    assert cert.kappa == 1.0 and cert.relax_cap == 1.5
    p = CompositeProblem(Quadratic(np.zeros(1)), ZeroFunction(), ZeroFunction(), IdentityMap(1))
    with pytest.raises(StepSizeError, match="must exceed"):
        validate_step_sizes(p, StepSizes.scalars(1.0, 1.0, 1, 1))


def test_validate_diagonal_rejects_gap():
    p = CompositeProblem(Quadratic(np.zeros(2), 4.0), ZeroFunction(), ZeroFunction(),
                         IdentityMap(2))
    with pytest.raises(StepSizeError, match="positive definite"):
        validate_step_sizes(p, StepSizes.diagonal([0.5, 0.1], [0.1, 0.1]))
    with pytest.raises(StepSizeError, match="below 1"):
        validate_step_sizes(p, StepSizes.diagonal([0.1, 0.1], [10.0, 10.0]))


def test_step_sizes_positive():
    with pytest.raises(StepSizeError):
        StepSizes.scalars(0.0, 1.0, 1, 1)
    with pytest.raises(StepSizeError):
        StepSizes.diagonal([1.0, -1.0], [1.0])


def test_preconditioner_identity():
    pc = build_diag_preconditioner(IdentityMap(2), [1.0, 1.0], gamma=1.0, r=1.0, s=1.0)
    assert pc.tau.tolist() == [0.5, 0.5] and pc.psi.tolist() == [1.0, 1.0]


def test_preconditioner_zero_row_rejected():
    with pytest.raises(ValidationError, match="row 0"):
        build_diag_preconditioner(DenseMap([[0.0]]), [2.0], gamma=1.0)


def test_preconditioner_zero_column_needs_curvature():
    D = DenseMap([[1.0, 0.0]])
    pc = build_diag_preconditioner(D, [1.0, 2.0], gamma=1.0)
    assert pc.tau[1] == 0.5
    with pytest.raises(ValidationError, match="unbounded"):
        build_diag_preconditioner(D, [1.0, 0.0], gamma=1.0)


def test_preconditioner_hand_example():
    D = DenseMap([[1.0, -2.0], [0.0, 3.0]])
    pc = build_diag_preconditioner(D, [1.0, 1.0], gamma=1.0, r=1.0, s=0.0)
    np.testing.assert_allclose(pc.tau, [1 / 2, 1 / 14], rtol=1e-15)
    np.testing.assert_allclose(pc.psi, [2.0, 1.0], rtol=1e-15)


def test_preconditioner_parameter_ranges():
    for kw in ({"gamma": 2.0}, {"gamma": 0.0}, {"r": 0.0}, {"s": 3.0}):
        with pytest.raises(ValidationError):
            build_diag_preconditioner(IdentityMap(2), [1.0, 1.0], **kw)


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("r,s", [(1.0, 1.0), (0.3, 0.0), (4.0, 2.0)])
def test_preconditioner_passes_validator(seed, r, s):
    rng = np.random.default_rng(seed)
    D = SparseMap.random(int(rng.integers(1, 30)), int(rng.integers(1, 30)),
                         rng.uniform(0.1, 0.9), rng, nonempty_rows=True)
    E = rng.uniform(0.1, 5.0, D.n_in)
    pc = build_diag_preconditioner(D, E, 1.9, r, s)
    p = CompositeProblem(_DiagQuadratic(E), ZeroFunction(), ZeroFunction(), D)
    assert validate_step_sizes(p, pc.steps()).margin > 0


class _DiagQuadratic(ZeroSmooth):
    def __init__(self, e):
        super().__init__(len(e))
        self.e = np.asarray(e)
        self.lipschitz = float(self.e.max())

    @property
    def cocoercivity_diag(self):
        return self.e

    def value(self, x):
        return 0.5 * float(self.e @ (x * x))

    def grad(self, x):
        return self.e * x


def test_ipds_all_zero_problem_fixed():
    p = CompositeProblem(ZeroSmooth(2), ZeroFunction(), ZeroFunction(), ZeroMap(2, 2))
    st = PrimalDualState.start([1.0, -2.0], np.zeros(2))
    out = ipds_step(p, StepSizes.scalars(1.0, 1.0, 2, 2), PICARD, st)
    assert out.x_curr.tolist() == [1.0, -2.0] and out.y_curr.tolist() == [0.0, 0.0]


def test_ipds_unit_gradient_step():
    p = CompositeProblem(Quadratic(np.zeros(3)), ZeroFunction(), ZeroFunction(), ZeroMap(1, 3))
    steps = StepSizes.scalars(1.0, 1.0, 3, 1)
    out = ipds_step(p, steps, PICARD, PrimalDualState.start([1.0, 2.0, 3.0], [0.0]))
    assert out.x_curr.tolist() == [0.0, 0.0, 0.0]


def test_ipds_matches_gradient_step_bitwise(rng):
    A = rng.standard_normal((8, 4))
    f = LeastSquares(A, rng.standard_normal(8))
    p = CompositeProblem(f, L1Norm(0.05), ZeroFunction(), ZeroMap(1, 4))
    tau = 1.0 / f.lipschitz
    st = PrimalDualState.start(rng.standard_normal(4), [0.0])
    x = st.x_curr
    for _ in range(30):
        st = ipds_step(p, StepSizes.scalars(tau, 1.0, 4, 1), PICARD, st)
        x = forward_backward_step(p, tau, x)
        assert np.array_equal(st.x_curr, x)


@pytest.mark.parametrize("method", ["ipds", "condat"])
def test_lasso_1d_limit(method):
    p = lasso_1d()
    res = solve_pd(p, method, StepSizes.scalars(1.0, 1.0, 1, 1), tol=1e-12)
    assert res.converged
    assert res.x[0] == pytest.approx(0.9, abs=1e-10)
    assert res.fp_residual <= 1e-10


def test_condat_equals_ipds_without_inertia(rng):
    A = rng.standard_normal((10, 5))
    f = LeastSquares(A, rng.standard_normal(10))
    D = SparseMap.random(4, 5, 0.6, rng, nonempty_rows=True)
    p = CompositeProblem(f, L1Norm(0.02), L1Norm(0.1), D)
    sigma = 1.0
    tau = 1.0 / (f.lipschitz + sigma * np.linalg.norm(D.to_dense(), 2) ** 2)
    steps = StepSizes.scalars(tau, sigma, 5, 4)
    cert = validate_step_sizes(p, steps)
    rho = 0.8
    sched = validate_schedule(0.0, 0.01, 1.0, rho, relax_cap=cert.relax_cap)
    a = b = PrimalDualState.start(rng.standard_normal(5), rng.standard_normal(4))
    for _ in range(40):
        a = ipds_step(p, steps, sched, a)
        b = condat_step(p, tau, sigma, rho, b, cert)
        assert np.array_equal(a.x_curr, b.x_curr) and np.array_equal(a.y_curr, b.y_curr)


def test_condat_rejects_relaxation():
    with pytest.raises(ValidationError):
        condat_step(lasso_1d(), 1.0, 1.0, 1.6, PrimalDualState.start([0.0], [0.0]))


def test_condat_point_indicator():
    p = CompositeProblem(ZeroSmooth(2), PointIndicator(0.0), ZeroFunction(), ZeroMap(2, 2))
    st = PrimalDualState.start([3.0, -1.0], np.zeros(2))
    for _ in range(3):
        st = condat_step(p, 1.0, 1.0, 1.0, st)
        assert st.x_curr.tolist() == [0.0, 0.0]


def test_iadmm_reduces_to_forward_backward(rng):
    A = rng.standard_normal((12, 6))
    f = LeastSquares(A, rng.standard_normal(12))
    p = CompositeProblem(f, L1Norm(0.05), ZeroFunction(), IdentityMap(6))
    tau, psi = 1.0 / f.lipschitz, 5.0
    cert = validate_admm_steps(p, tau, psi)
    sched = validate_schedule(0.0, 0.01, 1.0, 1.0, relax_cap=cert.relax_cap)
    st = PrimalDualState.start(rng.standard_normal(6), np.zeros(6))
    x = st.x_curr
    for _ in range(30):
        st = iadmm_step(p, tau, psi, sched, st)
        x = forward_backward_step(p, tau, x)
        assert np.array_equal(st.x_curr, x)
        assert np.array_equal(st.y_curr, np.zeros(6))


def test_iadmm_origin_limit():
    p = CompositeProblem(Quadratic([0.0]), ZeroFunction(), PointIndicator(0.0), IdentityMap(1))
    res = solve_pd(p, "iadmm", (1.0, 4.0), x0=[2.0], y0=[1.0], tol=1e-12)
    assert res.converged and abs(res.x[0]) <= 1e-10
    T = ADMMOperator(p, 1.0, 4.0)
    z = np.concatenate([res.x, res.y])
    zz = p.h.prox(p.D.apply(res.x) + 4.0 * res.y, 4.0)
    assert abs(zz[0]) <= 1e-10
    assert np.linalg.norm(T.apply(z) - z) <= 1e-11


def test_iadmm_rejects_non_injective():
    f = Quadratic(np.zeros(2))
    p = CompositeProblem(f, ZeroFunction(), ZeroFunction(), DenseMap([[1.0, 0.0]]))
    with pytest.raises(ValidationError, match="injective"):
        ADMMOperator(p, 1.0, 1.0)
    p = CompositeProblem(f, ZeroFunction(), ZeroFunction(), DenseMap([[1.0, 1.0], [0, 1.0]]))
    with pytest.raises(ValidationError, match="one nonzero per row"):
        ADMMOperator(p, 1.0, 1.0)


def test_admm_identity_matches_primal_dual(rng):
    A = rng.standard_normal((10, 4))
    f = LeastSquares(A, rng.standard_normal(10))
    p = CompositeProblem(f, L1Norm(0.03), L1Norm(0.2), IdentityMap(4))
    tau, psi = 0.5 / f.lipschitz, 3.0
    T1 = ADMMOperator(p, tau, psi)
    T2 = PrimalDualOperator(p, StepSizes.scalars(tau, 1.0 / psi, 4, 4))
    for _ in range(20):
        z = rng.standard_normal(8)
        np.testing.assert_allclose(T1.apply(z), T2.apply(z), rtol=1e-12, atol=1e-12)


def test_admm_scaled_identity_matches_primal_dual(rng):
    A = rng.standard_normal((10, 3))
    f = LeastSquares(A, rng.standard_normal(10))
    d = np.array([2.0, 0.5, 1.5])
    p = CompositeProblem(f, ZeroFunction(), L1Norm(0.2), DiagonalMap(d))
    pc = build_admm_preconditioner(p)
    validate_admm_steps(p, pc.tau, pc.psi)
    T = ADMMOperator(p, pc.tau, pc.psi)
    res = solve_pd(p, "iadmm", (pc.tau, pc.psi), tol=1e-11, max_iters=100000)
    assert res.converged
    # the limit solves min f(x) + 0.2 ||d x||_1
    x = res.x
    grad = f.grad(x)
    sub = -grad / (0.2 * d)
    assert np.all(np.abs(sub) <= 1 + 1e-7)
    nz = np.abs(x) > 1e-9
    np.testing.assert_allclose(sub[nz], np.sign(x[nz]), atol=1e-7)
    assert np.linalg.norm(T.apply(np.concatenate([res.x, res.y])) - np.concatenate(
        [res.x, res.y])) <= 1e-10


def test_forward_backward_examples():
    p = CompositeProblem(Quadratic(np.zeros(2)), ZeroFunction(), ZeroFunction(), ZeroMap(1, 2))
    assert forward_backward_step(p, 1.0, np.array([3.0, 4.0])).tolist() == [0.0, 0.0]
    with pytest.raises(StepSizeError):
        forward_backward_step(p, 2.0, np.zeros(2))
    q = CompositeProblem(Quadratic(np.zeros(2)), ZeroFunction(), L1Norm(1.0), IdentityMap(2))
    with pytest.raises(ValidationError):
        forward_backward_step(q, 1.0, np.zeros(2))


def test_forward_backward_is_ista(rng):
    A = rng.standard_normal((15, 6))
    b = rng.standard_normal(15)
    f = LeastSquares(A, b)
    lam, t = 0.1, 1.0 / f.lipschitz
    p = CompositeProblem(f, L1Norm(lam), ZeroFunction(), ZeroMap(1, 6))
    x = y = rng.standard_normal(6)
    for _ in range(20):
        x = forward_backward_step(p, t, x)
        v = y - t * (A.T @ (A @ y - b)) / 15
        y = np.sign(v) * np.maximum(np.abs(v) - t * lam, 0.0)
        np.testing.assert_allclose(x, y, rtol=1e-13, atol=1e-15)


@pytest.mark.parametrize("method", ["ipds", "iadmm"])
def test_primal_dual_optimality_at_convergence(method, small_lasso):
    f = LeastSquares(small_lasso.A, small_lasso.labels)
    p = CompositeProblem(f, ZeroFunction(), L1Norm(0.05), IdentityMap(f.dim))
    tol = 1e-10
    res = solve_pd(p, method, tol=tol, max_iters=100000)
    assert res.converged
    x, y = res.x, res.y
    if method == "ipds":
        steps = build_diag_preconditioner(p.D, p.E).steps()
        tau, sigma = steps.tau, steps.sigma
        assert np.linalg.norm(x - p.g.prox(x - tau * f.grad(x) - tau * p.D.adjoint(y), tau)) \
            <= 10 * tol
        assert np.linalg.norm(y - prox_conjugate(p.h, sigma, y + sigma * p.D.apply(x))) \
            <= 10 * tol
    # either way x minimises f + 0.05 ||.||_1
    g = f.grad(x)
    assert np.all(np.abs(g) <= 0.05 + 1e-8)


def test_solvers_agree_with_reference(small_lasso):
    from pdsplit.experiment import reference_solve
    f = LeastSquares(small_lasso.A, small_lasso.labels)
    lam = 0.05
    _, ref = reference_solve(f, lam)
    p = CompositeProblem(f, ZeroFunction(), L1Norm(lam), IdentityMap(f.dim))
    L = f.lipschitz
    runs = {
        "condat": solve_pd(p, "condat", StepSizes.scalars(1 / (L / 1.9 + 1), 1.0, f.dim, f.dim)),
        "ipds": solve_pd(p, "ipds"),
        "iadmm": solve_pd(p, "iadmm", (1 / (L / 1.9 + 1), 1.0)),
        "padmm": solve_pd(p, "iadmm"),
    }
    for name, res in runs.items():
        assert res.converged, name
        assert abs(res.objective - ref) <= 1e-6, name


def test_residual_tail_stabilises(small_lasso):
    f = LeastSquares(small_lasso.A, small_lasso.labels)
    p = CompositeProblem(f, ZeroFunction(), L1Norm(0.05), IdentityMap(f.dim))
    res = solve_pd(p, "ipds", tol=1e-300, max_iters=4000)
    steps = np.array([r[2] ** 2 + r[3] ** 2 for r in res.trace])
    total = np.cumsum(steps)
    tail = total[int(0.9 * len(total))]
    assert (total[-1] - tail) <= 1e-9 * total[-1]


def test_unknown_method():
    with pytest.raises(ValueError):
        solve_pd(lasso_1d(), "nope")
