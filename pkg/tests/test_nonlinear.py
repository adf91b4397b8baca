import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lagrangebc.boundary import BOUNDARY_FORM, BCVerdict, TestFunction, classify_bc
from lagrangebc.errors import InvalidArgument, NoConvergenceError, NotLocallySelfAdjointError
from lagrangebc.nonlinear import (
    GraphPoint,
    ModelOperator,
    NonlinearBC,
    ambient_pairing,
    antiderivative_consistency,
    antiderivative_value,
    check_lsa_conditions,
    contour_integrability_check,
    contour_sides,
    discrete_graphs,
    flow_symplectomorphism_check,
    gateaux_symmetry_check,
    group_action,
    lift_bc,
    same_leaf,
    solve_bvp_lsa,
)
from lagrangebc.symplin import classify_subspace, graph_defect, null_basis

seeds = st.integers(0, 2**32 - 1)
BUMP = TestFunction.poly_bump()
BUMP2 = TestFunction.poly_bump(0.1, 0.6, tilt=2.0)
SEPARATED_STAR = NonlinearBC.separated(-np.sin(1.0), -np.sin(1.0) - np.cos(1.0) ** 3)


def cubic(n=64):
    return ModelOperator.named(n, "cubic")


def test_grid_validation():
    with pytest.raises(InvalidArgument):
        ModelOperator(4)
    with pytest.raises(InvalidArgument):
        cubic().grid(np.zeros(10))
    with pytest.raises(InvalidArgument):
        ModelOperator.named(16, "quartic")


def test_trace_exact_on_quadratics():
    op = cubic()
    assert np.allclose(op.trace(lambda t: t * (1 - t)).as_array(), [0, 1, 0, -1], atol=1e-12)
    assert np.allclose(op.trace(lambda t: t**2).as_array(), [0, 0, 1, 2], atol=1e-12)


def test_projection_gives_zero_trace():
    op = cubic()
    v = op.project_zero_trace(np.cos(3 * op.t))
    assert op.zero_trace_defect(v) <= 1e-13


def test_require_zero_trace():
    with pytest.raises(InvalidArgument):
        group_action(cubic(), cubic().graph_point(np.zeros(64)), np.sin(np.pi * cubic().t))


def test_gateaux_symmetry_linear_and_cubic():
    lin = ModelOperator.named(64, "linear")
    r = gateaux_symmetry_check(lin, np.zeros(64), [(BUMP, BUMP2)])
    assert r.value <= 1e-10 * r.scale
    op = cubic()
    x = np.sin(3 * op.t) + op.t**2
    r = gateaux_symmetry_check(op, x, [(BUMP, BUMP2), (op.project_zero_trace(op.t**3), op.project_zero_trace(np.cos(op.t)))])
    assert r.value <= 1e-10 * r.scale


def test_gateaux_symmetry_diagonal_exact():
    op = cubic()
    assert gateaux_symmetry_check(op, op.t, [(BUMP2, BUMP2)]).value == 0.0


def test_group_action_identity_and_law():
    op = cubic(65)
    x = np.round(np.sin(op.t) * 1024) / 1024
    zeta = op.graph_point(x)
    same = group_action(op, zeta, np.zeros(65))
    assert np.array_equal(same.x, zeta.x) and np.array_equal(same.y, zeta.y)
    # dyadic values keep grid addition exact
    v1 = np.round(op.grid(BUMP) * 2**20) / 2**20
    v2 = np.round(op.grid(BUMP2) * 2**20) / 2**20
    a = group_action(op, group_action(op, zeta, v1), v2)
    b = group_action(op, zeta, v1 + v2)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
    assert np.array_equal(a.y, op.F(a.x))


def test_same_leaf():
    op = cubic()
    z1 = op.graph_point(np.cos(op.t))
    assert same_leaf(op, z1, z1)
    assert same_leaf(op, z1, group_action(op, z1, BUMP))
    assert not same_leaf(op, z1, op.graph_point(np.cos(op.t) + op.t**2))
    assert op.leaf(z1) == op.leaf(group_action(op, z1, BUMP))


def random_triangle(op, rng):
    verts = []
    for _ in range(3):
        a, b, c = rng.uniform(-1, 1, 3)
        verts.append(op.graph_point(a * np.sin(2 * op.t + b) + c * op.t**2))
    return verts


def test_contour_degenerate_triangle():
    op = cubic()
    z = op.graph_point(np.cos(op.t))
    w = op.graph_point(op.t**2)
    assert contour_integrability_check(op, BUMP, [z, z, w]).value <= 1e-15


def test_contour_linear():
    op = ModelOperator.named(64, "linear")
    r = contour_integrability_check(op, BUMP, random_triangle(op, np.random.default_rng(0)))
    assert r.value <= 1e-12 * r.scale


@given(seeds)
@settings(max_examples=20)
def test_contour_cubic(seed):
    op = cubic()
    r = contour_integrability_check(op, BUMP2, random_triangle(op, np.random.default_rng(seed)))
    assert r.value <= 1e-8 * r.scale


def test_contour_sides_match_potential():
    """Off the graph each side equals the drop of ``Psi(zeta) = (v, F(x) - y)``."""
    op = cubic()
    rng = np.random.default_rng(4)
    verts = []
    for z in random_triangle(op, rng):
        verts.append(GraphPoint(z.x, z.y + rng.standard_normal(op.n)))
    v = op.grid(BUMP)
    sides, mags = contour_sides(op, v, verts)
    psi = [op.inner(v, op.F(z.x) - z.y) for z in verts]
    expected = [psi[0] - psi[1], psi[1] - psi[2], psi[2] - psi[0]]
    assert np.allclose(sides, expected, rtol=0, atol=1e-10 * sum(mags))


def test_flow_linear_exact():
    op = ModelOperator.named(64, "linear")
    zeta = op.graph_point(np.sin(op.t))
    for eps in (1e-1, 1e-3):
        r = flow_symplectomorphism_check(op, zeta, BUMP, np.cos(op.t), op.t**2 + 1, eps)
        assert r.value <= 1e-10 * r.scale


def test_flow_zero_translation_linear():
    op = ModelOperator.named(64, "linear")
    r = flow_symplectomorphism_check(op, op.graph_point(op.t), np.zeros(64), np.cos(op.t), op.t, 1e-2)
    assert r.value <= 1e-10 * r.scale


def test_flow_cubic_second_order_in_eps():
    op = cubic()
    zeta = op.graph_point(np.sin(3 * op.t) + op.t**2)
    res = [
        flow_symplectomorphism_check(op, zeta, BUMP, np.cos(op.t), op.t**2 + 1, eps).value
        for eps in (1e-2, 5e-3, 2.5e-3)
    ]
    assert res[0] > res[1] > res[2]
    assert all(3.9 <= a / b <= 4.1 for a, b in zip(res, res[1:]))


def test_flow_zero_translation_cubic_is_pure_difference_bias():
    # G(., 0) is the identity; the measured value is the O(eps^2) bias of the
    # difference quotient and tends to the exact value 0
    op = cubic()
    zeta = op.graph_point(op.t)
    res = [
        flow_symplectomorphism_check(op, zeta, np.zeros(64), np.cos(op.t), op.t + 1, eps)
        for eps in (1e-2, 5e-3, 2.5e-3)
    ]
    assert all(3.9 <= a.value / b.value <= 4.1 for a, b in zip(res, res[1:]))
    assert res[-1].value <= 1e-8 * res[-1].scale


def test_leaf_tangents_are_isotropic():
    op = cubic()
    x = np.sin(op.t)
    h1 = op.tangent(x, BUMP)
    h2 = op.tangent(x, op.project_zero_trace(np.cos(2 * op.t)))
    scale = op.inner(np.abs(h1.x), np.abs(h2.y)) + op.inner(np.abs(h1.y), np.abs(h2.x))
    assert abs(ambient_pairing(op, h1, h2)) <= 1e-10 * scale


def test_discrete_green_identity_second_order():
    """For analytic tangents the ambient pairing tends to ``-j_hat`` of the traces at rate h^2."""
    errs = []
    for n in (65, 129, 257):
        op = cubic(n)
        x = np.sin(op.t)
        u, w = np.exp(op.t), np.cos(2 * op.t) + op.t**3
        exact = BOUNDARY_FORM(
            [1.0, 1.0, np.e, np.e], [1.0, 0.0, np.cos(2.0) + 1, -2 * np.sin(2.0) + 3]
        )
        errs.append(abs(ambient_pairing(op, op.tangent(x, u), op.tangent(x, w)) + exact))
    assert 3.5 <= errs[0] / errs[1] <= 4.5 and 3.5 <= errs[1] / errs[2] <= 4.5


def test_lift_bc_examples():
    op = cubic()
    bc = NonlinearBC.separated()
    zeta = op.graph_point(lambda t: t * (1 - t))
    assert np.allclose(lift_bc(op, bc)(zeta), [1.0, -1.0], atol=1e-12)
    dirichlet = NonlinearBC.linear([[1, 0, 0, 0], [0, 0, 1, 0]])
    lifted = lift_bc(op, dirichlet)
    z = op.graph_point(np.cos(op.t))
    assert np.array_equal(lifted(group_action(op, z, BUMP)), lifted(z))


@given(seeds)
@settings(max_examples=50)
def test_lift_constant_on_leaves(seed):
    rng = np.random.default_rng(seed)
    op = cubic()
    a, b, c = rng.uniform(-1, 1, 3)
    z = op.graph_point(a * np.cos(2 * op.t) + b * op.t + c)
    lo, hi = sorted(rng.uniform(0.1, 0.9, 2))
    if hi - lo < 0.1:
        hi = lo + 0.1
    v = rng.uniform(-2, 2) * op.grid(TestFunction.poly_bump(lo, min(hi, 0.95)))
    lifted = lift_bc(op, SEPARATED_STAR)
    assert np.array_equal(lifted(group_action(op, z, v)), lifted(z))


def test_nonlinear_bc_jacobian_checked():
    with pytest.raises(InvalidArgument):
        NonlinearBC(lambda e: np.array([e[0] ** 2, e[1]]), lambda e: np.array([[1, 0, 0, 0], [0, 1, 0, 0.0]]))


def test_lsa_examples():
    rng = np.random.default_rng(0)
    traces = rng.uniform(-2, 2, (10, 4))
    good = check_lsa_conditions(NonlinearBC.separated(), traces)
    assert good.passed and good.min_rank == 2 and good.max_pairing_residual == 0.0
    bad = check_lsa_conditions(NonlinearBC.coupled(), traces)
    assert not bad.passed
    assert bad.points[0].pairing_residual == pytest.approx(1.0)
    assert check_lsa_conditions(NonlinearBC.linear([[1, 0, 0, 0], [0, 0, 1, 0]]), traces).passed


def test_lsa_kernel_is_lagrangian():
    eta = np.array([0.3, -0.1, 0.8, 0.2])
    k = null_basis(NonlinearBC.separated().jacobian(eta))
    assert classify_subspace(BOUNDARY_FORM.symplectic_form(), k).lagrangian


@given(seeds)
@settings(max_examples=30)
def test_lsa_invariant_under_reparametrization(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((2, 2)) + 2 * np.eye(2)
    traces = rng.uniform(-1, 1, (5, 4))
    for bc in (NonlinearBC.separated(), NonlinearBC.coupled()):
        composed = NonlinearBC(lambda e, bc=bc: a @ bc(e), lambda e, bc=bc: a @ bc.jacobian(e))
        assert check_lsa_conditions(composed, traces).passed == check_lsa_conditions(bc, traces).passed


@given(seeds)
@settings(max_examples=20)
def test_linear_lsa_agrees_with_classify_bc(seed):
    rng = np.random.default_rng(seed)
    if rng.random() < 0.5:
        theta = rng.standard_normal((2, 4))
    else:
        alpha, beta = rng.standard_normal(2)
        theta = (rng.standard_normal((2, 2)) + 2 * np.eye(2)) @ np.array([[alpha, -1, 0, 0], [0, 0, beta, -1]])
    verdict = check_lsa_conditions(NonlinearBC.linear(theta), [np.zeros(4)]).passed
    assert verdict == (classify_bc(theta).verdict is BCVerdict.SELF_ADJOINT)


def test_bvp_linear_dirichlet():
    errs = []
    for n in (33, 65, 129):
        op = ModelOperator.named(n, "linear")
        sol = solve_bvp_lsa(op, NonlinearBC.linear([[1, 0, 0, 0], [0, 0, 1, 0]]), np.pi**2 * np.sin(np.pi * op.t))
        errs.append(np.abs(sol.u - np.sin(np.pi * op.t)).max() / op.h**2)
        assert sol.certificate.passed
    assert max(errs) / min(errs) < 1.2


def test_bvp_manufactured_cubic():
    errs = []
    for n in (64, 128, 256):
        op = cubic(n)
        sol = solve_bvp_lsa(op, SEPARATED_STAR, np.cos(op.t) + np.cos(op.t) ** 3)
        c = sol.certificate
        assert c.iterations <= 10 and c.passed
        assert c.green_residual <= 1e-6 and c.lsa_pairing_residual <= 1e-6
        errs.append(np.abs(sol.u - np.cos(op.t)).max())
    assert 3.5 <= errs[0] / errs[1] <= 4.5 and 3.5 <= errs[1] / errs[2] <= 4.5


def test_bvp_coupled_rejected():
    op = cubic()
    u = np.cos(2 * np.pi * op.t)
    with pytest.raises(NotLocallySelfAdjointError) as info:
        solve_bvp_lsa(op, NonlinearBC.coupled(), 4 * np.pi**2 * u + u**3)
    assert not info.value.verdict.passed


def test_bvp_no_convergence_keeps_history():
    op = cubic()
    with pytest.raises(NoConvergenceError) as info:
        solve_bvp_lsa(op, SEPARATED_STAR, np.cos(op.t) + np.cos(op.t) ** 3, max_iter=1)
    assert len(info.value.history) == 2


def test_antiderivative_linear():
    op = ModelOperator.named(64, "linear")
    x = op.grid(lambda t: t * (1 - t))
    paths = [[np.zeros(64), x], [np.zeros(64), np.sin(np.pi * op.t), x]]
    diff, graph = antiderivative_consistency(op, x, BUMP, paths)
    assert diff.value <= 1e-12 * diff.scale and graph.value <= 1e-12 * graph.scale


def test_antiderivative_cubic():
    op = cubic()
    x = op.grid(lambda t: t * (1 - t))
    paths = [[np.zeros(64), x], [np.zeros(64), 0.7 * np.sin(np.pi * op.t) + 0.2 * op.t, x]]
    diff, graph = antiderivative_consistency(op, x, BUMP2, paths)
    assert diff.value <= 1e-9 * diff.scale and graph.value <= 1e-9 * graph.scale


def test_antiderivative_base_point():
    op = cubic()
    val, _ = antiderivative_value(op, [op.x0, op.x0], op.grid(BUMP))
    assert val == op.inner(op.grid(BUMP), op.F(op.x0))


def test_antiderivative_path_endpoints_checked():
    op = cubic()
    x = op.t.copy()
    with pytest.raises(InvalidArgument):
        antiderivative_consistency(op, x, BUMP, [[np.ones(64), x], [np.zeros(64), x]])


@pytest.mark.parametrize("n", [32, 64, 128])
def test_discrete_defect_is_two(n):
    lo, hi = discrete_graphs(n)
    assert (lo.dim, hi.dim) == (n - 4, n)
    assert graph_defect(lo, hi) == 2
