import numpy as np
import pytest

from parareg.convex_subproblems import (
    LinearProgram,
    batch_feasible,
    dist,
    enumerate_vertices,
    member,
    project,
    solve_lp,
    support_function,
)
from parareg.errors import EmptySet
from parareg.numeric_core import NEG_INF, POS_INF, ExtReal
from parareg.set_catalog import (
    Empty,
    FullSpace,
    Polyhedron,
    Product,
    SecondOrderCone,
)

ORTH2 = Polyhedron.orthant_nonpos(2)
Q3 = SecondOrderCone(3)


# ---------------------------------------------------------------------------
# LP
# ---------------------------------------------------------------------------


def test_lp_max_over_simplex():
    res = solve_lp(LinearProgram(np.array([1.0, 0.0]),
                                 A_eq=np.array([[1.0, 1.0]]), b_eq=np.array([1.0]),
                                 maximize=True, nonneg=True))
    assert res.optimal
    assert res.value == ExtReal.finite(1.0)
    np.testing.assert_allclose(res.x, [1.0, 0.0], atol=1e-9)


def test_lp_unbounded_max():
    res = solve_lp(LinearProgram(np.array([1.0]), maximize=True))
    assert res.status == "unbounded" and res.value == POS_INF


def test_lp_one_constraint_by_hand():
    # min -u1 s.t. u1 <= -1 has value 1 at u1 = -1
    res = solve_lp(LinearProgram(np.array([-1.0]), A_ub=np.array([[1.0]]),
                                 b_ub=np.array([-1.0])))
    assert res.optimal and res.value == ExtReal.finite(1.0)
    np.testing.assert_allclose(res.x, [-1.0], atol=1e-9)


def test_lp_infeasible():
    res = solve_lp(LinearProgram(np.array([1.0]), A_ub=np.array([[1.0], [-1.0]]),
                                 b_ub=np.array([-1.0, -1.0])))
    assert res.status == "infeasible"


def test_lp_weak_and_strong_duality_random():
    rng = np.random.default_rng(7)
    for _ in range(30):
        n, mu, me = 3, 4, 1
        A = rng.standard_normal((mu, n))
        x0 = rng.standard_normal(n)
        b = A @ x0 + rng.random(mu)  # feasible by construction
        E = rng.standard_normal((me, n))
        e = E @ x0
        c = rng.standard_normal(n)
        res = solve_lp(LinearProgram(c, A_ub=A, b_ub=b, A_eq=E, b_eq=e))
        if res.status != "optimal":
            continue
        # duals satisfy stationarity and complementary slackness; the dual
        # bound never exceeds the primal value
        slack = b - A @ res.x
        assert np.all(slack >= -1e-8)
        assert np.all(res.dual_ub <= 1e-9)
        np.testing.assert_allclose(c, A.T @ res.dual_ub + E.T @ res.dual_eq,
                                   atol=1e-7)
        assert abs(res.dual_ub @ slack) <= 1e-7
        dual_val = b @ res.dual_ub + e @ res.dual_eq
        assert res.value.value >= dual_val - 1e-9
        assert abs(res.value.value - dual_val) <= 1e-7


# ---------------------------------------------------------------------------
# Projection
# ---------------------------------------------------------------------------


def test_project_orthant_componentwise_clamp():
    np.testing.assert_allclose(project(ORTH2, [1, -1]), [0, -1], atol=1e-12)


def test_project_soc_polar_point_to_vertex():
    np.testing.assert_allclose(project(Q3, [0, 0, -1]), [0, 0, 0], atol=1e-12)


def test_project_halfspace_formula():
    # projection onto {y1 + y2 <= 0} from (1,1): y - max(0, <a,y>-b) a/|a|^2
    hs = Polyhedron.from_inequalities(np.array([[1.0, 1.0]]), np.zeros(1))
    np.testing.assert_allclose(project(hs, [1, 1]), [0, 0], atol=1e-12)


def test_project_empty_raises():
    empty = Polyhedron(np.array([[1.0], [-1.0]]), np.array([-1.0, -1.0]),
                       np.zeros((0, 1)), np.zeros(0))
    with pytest.raises(EmptySet):
        project(empty, [0.0])
    with pytest.raises(EmptySet):
        project(Empty(2), [0.0, 0.0])


def test_projection_idempotent_and_obtuse():
    rng = np.random.default_rng(3)
    poly = Polyhedron.from_inequalities(rng.standard_normal((5, 3)), rng.random(5))
    for _ in range(20):
        y = 3 * rng.standard_normal(3)
        p = project(poly, y)
        p2 = project(poly, p)
        assert np.linalg.norm(p2 - p) <= 1e-8 * (1 + np.linalg.norm(p))
        # obtuse-angle property against sampled feasible points
        for _ in range(10):
            z = project(poly, rng.standard_normal(3))
            assert (y - p) @ (z - p) <= 1e-8 * (1 + np.linalg.norm(y))


def test_projection_products_componentwise():
    prod = Product((ORTH2, Q3))
    y = np.array([1.0, -1.0, 0.0, 0.0, -1.0])
    np.testing.assert_allclose(project(prod, y),
                               np.concatenate([project(ORTH2, y[:2]),
                                               project(Q3, y[2:])]))


def test_soc_projection_closed_form_cases():
    # inside, polar, and the strict in-between case
    np.testing.assert_allclose(project(Q3, [0.3, 0.0, 1.0]), [0.3, 0.0, 1.0])
    np.testing.assert_allclose(project(Q3, [1.0, 0.0, -2.0]), [0, 0, 0])
    p = project(Q3, [2.0, 0.0, 0.0])
    np.testing.assert_allclose(p, [1.0, 0.0, 1.0])


# ---------------------------------------------------------------------------
# Support functions and membership
# ---------------------------------------------------------------------------


def test_support_orthant():
    assert support_function(ORTH2, [1, 0]) == ExtReal.finite(0.0)
    assert support_function(ORTH2, [-1, 1]) == POS_INF


def test_support_shifted_halfspace_by_lp():
    hs = Polyhedron.from_inequalities(np.array([[1.0, 0.0, -1.0]]), np.array([-1.0]))
    val = support_function(hs, [1, 0, -1])
    assert val.is_finite and abs(val.value - (-1.0)) <= 1e-9


def test_support_empty_is_neg_inf():
    assert support_function(Empty(2), [1.0, 0.0]) == NEG_INF


def test_support_soc_self_dual():
    assert support_function(Q3, [1, 0, -1.0001]) == ExtReal.finite(0.0)
    assert support_function(Q3, [1, 0, 1]) == POS_INF


def test_member_examples():
    assert member(Q3, [1, 0, 1])  # boundary point
    assert not member(ORTH2, [0.1, 0.0], 1e-8)
    assert member(Polyhedron.zero(1), [1e-10], 1e-8)


def test_batch_feasible_matches_scalar():
    rng = np.random.default_rng(11)
    poly = Polyhedron.from_inequalities(rng.standard_normal((4, 2)), rng.random(4))
    Y = rng.standard_normal((60, 2))
    thresh = 0.2
    mask = batch_feasible(poly, Y, thresh)
    for y, m in zip(Y, mask):
        assert m == (dist(poly, y) <= thresh)


def test_enumerate_vertices_triangle():
    # triangle x >= 0, y >= 0, x + y <= 1
    A = np.array([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]])
    b = np.array([0.0, 0.0, 1.0])
    verts = enumerate_vertices(A, b, np.zeros((0, 2)), np.zeros(0))
    got = sorted(tuple(np.round(v, 9)) for v in verts)
    assert got == [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0)]
