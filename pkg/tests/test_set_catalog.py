import numpy as np
import pytest

from parareg.convex_subproblems import member, project, support_function
from parareg.errors import NotANormal, NotTangent, PointNotInSet
from parareg.numeric_core import POS_INF, ExtReal
from parareg.oracles import QuotientGrid, d2_quotient_estimate, t2_membership
from parareg.set_catalog import (
    ConeRep,
    FullSpace,
    Polyhedron,
    Product,
    ReductionData,
    SecondOrderCone,
    SocCone,
    cone_contains,
    cone_support,
    cone_to_set,
    critical_cone,
    d2_indicator,
    normal_cone,
    reduction_second_subderivative,
    second_tangent,
    soc_boundary_d2_closed_form,
    soc_reduction,
    tangent_cone,
)

ORTH2 = Polyhedron.orthant_nonpos(2)
Q3 = SecondOrderCone(3)
SOC_Y = np.array([1.0, 0.0, 1.0])
SOC_LAM = np.array([1.0, 0.0, -1.0])


def _same_cone(cone, points_in, points_out):
    for p in points_in:
        assert cone_contains(cone, np.asarray(p, float)), p
    for p in points_out:
        assert not cone_contains(cone, np.asarray(p, float)), p


# ---------------------------------------------------------------------------
# tangent / normal / critical cones
# ---------------------------------------------------------------------------


def test_tangent_orthant_at_vertex_is_itself():
    t = tangent_cone(ORTH2, [0, 0])
    _same_cone(t, [[-1, -2], [0, 0], [0, -1]], [[1, 0], [0, 1], [0.5, -1]])


def test_tangent_soc_boundary_halfspace():
    t = tangent_cone(Q3, SOC_Y)
    # {w : w1 <= w3}
    _same_cone(t, [[0, 5, 0], [1, 0, 1], [-2, 3, 0]], [[1, 0, 0], [2, 0, 1]])


def test_tangent_soc_vertex_is_the_cone():
    t = tangent_cone(Q3, [0, 0, 0])
    assert isinstance(t, SocCone) and t.sign == 1
    _same_cone(t, [[1, 0, 1], [0, 0, 2]], [[1, 0, 0.5]])


def test_tangent_requires_membership():
    with pytest.raises(PointNotInSet):
        tangent_cone(ORTH2, [1.0, 0.0])


def test_normal_orthant_generators():
    n = normal_cone(ORTH2, [0, 0])
    np.testing.assert_allclose(n.rays, np.eye(2))
    _same_cone(n, [[1, 0], [2, 3]], [[-1, 0], [1, -0.5]])


def test_normal_soc_boundary_ray():
    n = normal_cone(Q3, SOC_Y)
    # ray through (1, 0, -1)
    assert cone_contains(n, [2.0, 0.0, -2.0])
    assert not cone_contains(n, [-1.0, 0.0, 1.0])
    assert not cone_contains(n, [1.0, 0.0, 1.0])


def test_normal_soc_vertex_is_polar_cone():
    n = normal_cone(Q3, [0, 0, 0])
    assert isinstance(n, SocCone) and n.sign == -1
    _same_cone(n, [[1, 0, -1], [0, 0, -3]], [[0, 0, 1], [3, 0, -1]])


def test_critical_orthant():
    k = critical_cone(ORTH2, [0, 0], [1, 0])
    # {0} x R_-
    _same_cone(k, [[0, -1], [0, 0]], [[0.5, -1], [-0.5, -1], [0, 1]])


def test_critical_soc_boundary_hyperplane():
    k = critical_cone(Q3, SOC_Y, SOC_LAM)
    # {w : w1 = w3}
    _same_cone(k, [[1, 5, 1], [0, 0, 0], [-2, 0.3, -2]], [[1, 0, 0], [0, 0, 1]])


def test_critical_zero_normal_gives_tangent():
    k = critical_cone(ORTH2, [0, 0], [0, 0])
    _same_cone(k, [[-1, -1]], [[1, 0]])


def test_critical_requires_normal():
    with pytest.raises(NotANormal):
        critical_cone(ORTH2, [0, 0], [-1.0, 0.0])


def test_polarity_between_tangent_and_normal():
    # sigma_T(lam) = 0 for normals, +inf for sampled non-normals
    rng = np.random.default_rng(5)
    cases = [(ORTH2, np.zeros(2)), (Q3, SOC_Y),
             (Polyhedron.from_inequalities(rng.standard_normal((3, 3)), np.zeros(3)),
              np.zeros(3))]
    for theta, y in cases:
        tc = tangent_cone(theta, y)
        nc = normal_cone(theta, y)
        for _ in range(20):
            lam = rng.standard_normal(theta.dim)
            in_normal = cone_contains(nc, lam)
            sigma = cone_support(tc, lam)
            if in_normal:
                assert sigma == ExtReal.finite(0.0)
            else:
                assert sigma == POS_INF


# ---------------------------------------------------------------------------
# second-order tangent sets
# ---------------------------------------------------------------------------


def test_second_tangent_orthant_example():
    rep = second_tangent(ORTH2, [0, 0], [0, -1])
    # R_- x R: rows active at 0 with a.u = 0 is just the first coordinate
    assert member(rep.region, [-1.0, 5.0])
    assert member(rep.region, [-3.0, -7.0])
    assert not member(rep.region, [1.0, 0.0])
    # brute-force membership sampler confirms
    est = t2_membership(ORTH2, [0, 0], [0, -1], [-1, 5], QuotientGrid(seed=1))
    assert est.converged
    est_out = t2_membership(ORTH2, [0, 0], [0, -1], [1, 5], QuotientGrid(seed=1))
    assert est_out.diverging


def test_second_tangent_soc_boundary_shifted_halfspace():
    rep = second_tangent(Q3, SOC_Y, [1, 1, 1])
    # {z : z1 - z3 <= -1}; support value -1 at (1, 0, -1)
    assert member(rep.region, [-1.0, 0.0, 0.0])
    assert member(rep.region, [0.0, 9.0, 1.0])
    assert not member(rep.region, [0.0, 0.0, 0.0])
    val = support_function(rep.region, [1.0, 0.0, -1.0])
    assert val.is_finite and abs(val.value - (-1.0)) <= 1e-9
    inside = t2_membership(Q3, SOC_Y, [1, 1, 1], [-1, 0, 0], QuotientGrid(seed=2))
    assert inside.converged


def test_second_tangent_soc_vertex_is_tangent_of_direction():
    rep = second_tangent(Q3, [0, 0, 0], [1, 0, 1])
    # T_Q((1,0,1)) = {z : z1 <= z3}
    assert member(rep.region, [0.0, 4.0, 0.0])
    assert not member(rep.region, [1.0, 0.0, 0.0])
    rep0 = second_tangent(Q3, [0, 0, 0], [0, 0, 0])
    assert isinstance(rep0.region, SecondOrderCone)


def test_second_tangent_at_zero_direction_is_tangent_cone():
    for theta, y in ((ORTH2, np.zeros(2)), (Q3, SOC_Y)):
        rep = second_tangent(theta, y, np.zeros(theta.dim))
        tc = tangent_cone(theta, y)
        rng = np.random.default_rng(0)
        for _ in range(30):
            w = rng.standard_normal(theta.dim)
            assert member(rep.region, w, 1e-8) == cone_contains(tc, w)


def test_second_tangent_translation_property():
    # T2(y, u) + T(y) stays inside T2(y, u) on sampled points
    rng = np.random.default_rng(4)
    rep = second_tangent(Q3, SOC_Y, [1, 1, 1])
    tc = tangent_cone(Q3, SOC_Y)
    for _ in range(40):
        z = np.asarray([-1.0, 0.0, 0.0]) + rng.standard_normal(3) * 0.1
        if not member(rep.region, z):
            continue
        t = rng.standard_normal(3)
        t = t if cone_contains(tc, t) else np.array([0.0, 0.0, 1.0])
        assert member(rep.region, z + t, 1e-7)


def test_second_tangent_requires_tangent_direction():
    with pytest.raises(NotTangent):
        second_tangent(ORTH2, [0, 0], [1.0, 0.0])


# ---------------------------------------------------------------------------
# second subderivative of the indicator
# ---------------------------------------------------------------------------


def test_d2_polyhedral_zero_on_critical_cone():
    assert d2_indicator(ORTH2, [0, 0], [1, 0], [0, -1]) == ExtReal.finite(0.0)
    assert d2_indicator(ORTH2, [0, 0], [1, 0], [0.5, -1]) == POS_INF


def test_d2_soc_boundary_value_one():
    val = d2_indicator(Q3, SOC_Y, SOC_LAM, [1, 1, 1])
    assert val.is_finite and abs(val.value - 1.0) <= 1e-9
    # difference-quotient oracle confirms
    est = d2_quotient_estimate(Q3, SOC_Y, SOC_LAM, [1, 1, 1], QuotientGrid(seed=3))
    assert est.value.is_finite and abs(est.value.value - 1.0) <= 1e-3


def test_d2_soc_off_critical_cone_infinite():
    assert d2_indicator(Q3, SOC_Y, SOC_LAM, [1, 0, 0]) == POS_INF


def test_d2_closed_form_matches_reduction_path():
    closed = soc_boundary_d2_closed_form(SOC_Y, SOC_LAM, [1, 1, 1])
    routed = d2_indicator(Q3, SOC_Y, SOC_LAM, [1, 1, 1])
    assert abs(closed.value - routed.value) <= 1e-12


def test_d2_degree_two_homogeneity_and_nonnegativity():
    rng = np.random.default_rng(6)
    for _ in range(30):
        a, b = rng.standard_normal(2)
        u = np.array([a, b, a])  # critical hyperplane
        v1 = d2_indicator(Q3, SOC_Y, SOC_LAM, u)
        v2 = d2_indicator(Q3, SOC_Y, SOC_LAM, 2.0 * u)
        assert v1.is_finite and v2.is_finite
        assert abs(v2.value - 4.0 * v1.value) <= 1e-9 * (1 + abs(v1.value))
        assert v1.value >= -1e-12


def test_parabolic_regularity_identity_on_fixtures():
    # d2 = -sigma_{T2(y,u)}(lam) for u in the critical cone
    cases = [
        (ORTH2, np.zeros(2), np.array([1.0, 0.0]), np.array([0.0, -1.0])),
        (Q3, SOC_Y, SOC_LAM, np.array([1.0, 1.0, 1.0])),
        (Q3, SOC_Y, SOC_LAM, np.array([1.0, -0.5, 1.0])),
    ]
    for theta, y, lam, u in cases:
        d2 = d2_indicator(theta, y, lam, u)
        rep = second_tangent(theta, y, u)
        sigma = support_function(rep.region, lam)
        assert d2.is_finite and sigma.is_finite
        assert abs(d2.value - (-sigma.value)) <= 1e-8


def test_d2_product_sums_componentwise():
    prod = Product((ORTH2, Q3))
    y = np.concatenate([np.zeros(2), SOC_Y])
    lam = np.concatenate([[1.0, 0.0], SOC_LAM])
    u = np.concatenate([[0.0, -1.0], [1.0, 1.0, 1.0]])
    val = d2_indicator(prod, y, lam, u)
    assert val.is_finite and abs(val.value - 1.0) <= 1e-9
    u_bad = np.concatenate([[1.0, -1.0], [1.0, 1.0, 1.0]])
    assert d2_indicator(prod, y, lam, u_bad) == POS_INF


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------


def test_reduction_identity_map():
    red = ReductionData(lambda y: np.asarray(y, float), lambda y: np.eye(2),
                        lambda y: np.zeros((2, 2, 2)), ORTH2, base=np.zeros(2))
    assert reduction_second_subderivative(red, [1, 0], [0, -1]) == ExtReal.finite(0.0)
    assert reduction_second_subderivative(red, [1, 0], [1, 0]) == POS_INF


def test_soc_reduction_reproduces_indicator_values():
    base = soc_reduction(3)
    red = ReductionData(base.h_value, base.h_jacobian, base.h_hessian,
                        base.cone, base=SOC_Y)
    rng = np.random.default_rng(9)
    for _ in range(25):
        a, b = rng.standard_normal(2)
        u = np.array([a, b, a])
        via_red = reduction_second_subderivative(red, SOC_LAM, u)
        direct = d2_indicator(Q3, SOC_Y, SOC_LAM, u)
        assert abs(via_red.value - direct.value) <= 1e-10 * (1 + abs(direct.value))


def test_reduction_rank_deficient_detected():
    from parareg.errors import RankDeficient

    red = ReductionData(lambda y: np.zeros(1), lambda y: np.zeros((1, 2)),
                        lambda y: np.zeros((1, 2, 2)),
                        Polyhedron.orthant_nonpos(1), base=np.zeros(2))
    with pytest.raises(RankDeficient):
        reduction_second_subderivative(red, [0.0, 0.0], [1.0, 0.0])


def test_cone_to_set_round_trip_membership():
    k = critical_cone(Q3, SOC_Y, SOC_LAM)
    s = cone_to_set(k)
    rng = np.random.default_rng(10)
    for _ in range(30):
        w = rng.standard_normal(3)
        assert member(s, w, 1e-8) == cone_contains(k, w)
