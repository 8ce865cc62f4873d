import numpy as np
import pytest

from parareg.constraint_system import (
    BasePoint,
    ConstraintSystem,
    SmoothMap,
    cq_diagnostics,
    critical_cone_omega,
    multiplier_set,
    normal_image_distance,
    s_w_map,
    second_tangent_omega,
    tangent_cone_omega,
)
from parareg.convex_subproblems import dist, enumerate_vertices, member, project
from parareg.errors import InfeasiblePoint, NotTangent
from parareg.numeric_core import DEFAULT_TOLS
from parareg.oracles import QuotientGrid, t2_membership
from parareg.set_catalog import (
    FullSpace,
    Polyhedron,
    SecondOrderCone,
    cone_contains,
)


def parabola_cs():
    f = SmoothMap.from_polynomial(2, [[(1.0, (2, 0)), (-1.0, (0, 1))]])
    return ConstraintSystem(f, Polyhedron.orthant_nonpos(1))


def soc_cs():
    return ConstraintSystem(SmoothMap.identity(3), SecondOrderCone(3))


# ---------------------------------------------------------------------------
# smooth maps
# ---------------------------------------------------------------------------


def test_polynomial_derivatives_match_finite_differences():
    rng = np.random.default_rng(0)
    coords = [
        [(1.0, (2, 0, 1)), (-2.0, (0, 1, 0))],
        [(0.5, (1, 1, 1))],
    ]
    f = SmoothMap.from_polynomial(3, coords)
    for _ in range(5):
        x = rng.standard_normal(3)
        h = 1e-6
        jac_fd = np.zeros((2, 3))
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            jac_fd[:, j] = (f.value(x + e) - f.value(x - e)) / (2 * h)
        np.testing.assert_allclose(f.jacobian(x), jac_fd, atol=1e-6)
        hess_fd = np.zeros((2, 3, 3))
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            hess_fd[:, :, j] = (f.jacobian(x + e) - f.jacobian(x - e)) / (2 * h)
        np.testing.assert_allclose(f.hessian(x), hess_fd, atol=1e-5)


def test_fd_hessian_provenance_flag():
    f_cb = SmoothMap(1, 1, lambda x: np.array([float(x[0]) ** 3]),
                     lambda x: np.array([[3.0 * float(x[0]) ** 2]]))
    assert f_cb.fd_hessian
    np.testing.assert_allclose(f_cb.hessian([2.0])[0], [[12.0]], rtol=1e-4)
    assert not parabola_cs().f.fd_hessian


def test_value_batch_polynomial():
    f = parabola_cs().f
    X = np.array([[1.0, 2.0], [0.5, 0.0], [-1.0, 3.0]])
    expect = np.array([[x[0] ** 2 - x[1]] for x in X])
    np.testing.assert_allclose(f.value_batch(X), expect)


# ---------------------------------------------------------------------------
# base points and pullback cones
# ---------------------------------------------------------------------------


def test_base_point_requires_feasibility():
    with pytest.raises(InfeasiblePoint):
        BasePoint(parabola_cs(), [1.0, 0.0], [0.0, -1.0])


def test_tangent_cone_omega_identity():
    cs = ConstraintSystem(SmoothMap.identity(2), Polyhedron.orthant_nonpos(2))
    bp = BasePoint(cs, [0, 0], [1, 0])
    t = tangent_cone_omega(cs, bp)
    assert cone_contains(t, [-1, -1]) and not cone_contains(t, [1, 0])


def test_tangent_cone_omega_parabola():
    cs = parabola_cs()
    bp = BasePoint(cs, [0, 0], [0, -1])
    t = tangent_cone_omega(cs, bp)
    # {w : -w2 <= 0}
    assert cone_contains(t, [5.0, 1.0]) and cone_contains(t, [-3.0, 0.0])
    assert not cone_contains(t, [0.0, -1.0])


def test_tangent_cone_omega_soc_pullback():
    cs = soc_cs()
    bp = BasePoint(cs, [1, 0, 1], [1, 0, -1])
    t = tangent_cone_omega(cs, bp)
    assert cone_contains(t, [0.0, 2.0, 1.0]) and not cone_contains(t, [1.0, 0.0, 0.0])


# ---------------------------------------------------------------------------
# multiplier sets
# ---------------------------------------------------------------------------


def test_multiplier_singleton_parabola():
    cs = parabola_cs()
    bp = BasePoint(cs, [0, 0], [0, -1])
    ms = multiplier_set(cs, bp)
    assert ms.kind == "singleton"
    np.testing.assert_allclose(ms.lam0, [1.0])


def test_multiplier_segment_degenerate():
    f = SmoothMap.from_polynomial(1, [[(1.0, (1,))], [(1.0, (1,))]])
    cs = ConstraintSystem(f, Polyhedron.orthant_nonpos(2))
    bp = BasePoint(cs, [0], [1])
    ms = multiplier_set(cs, bp)
    assert ms.kind == "polyhedral"
    verts = ms.vertices(10.0)
    got = sorted(tuple(np.round(v, 8)) for v in verts)
    assert got == [(0.0, 1.0), (1.0, 0.0)]
    # every extracted element satisfies the defining relations
    lam = ms.an_element()
    assert abs(lam.sum() - 1.0) <= 1e-9 and (lam >= -1e-12).all()


def test_multiplier_empty_when_not_in_image():
    cs = parabola_cs()
    bp = BasePoint(cs, [0, 0], [-1.0, 0.0])
    assert multiplier_set(cs, bp).is_empty


def test_multiplier_soc_vertex_slice():
    # f maps R^2 into R^3 so the vertex multiplier set is a genuine slice
    f = SmoothMap.linear(np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]))
    cs = ConstraintSystem(f, SecondOrderCone(3))
    bp = BasePoint(cs, [0.0, 0.0], [0.0, -1.0])
    ms = multiplier_set(cs, bp)
    assert ms.kind == "conic"
    lam = ms.an_element()
    assert lam is not None
    np.testing.assert_allclose(f.jacobian([0, 0]).T @ lam, [0.0, -1.0], atol=1e-6)
    assert np.linalg.norm(lam[:-1]) <= -lam[-1] + 1e-8


# ---------------------------------------------------------------------------
# second-order tangent chain rule and the perturbed map
# ---------------------------------------------------------------------------


def test_second_tangent_omega_parabola():
    cs = parabola_cs()
    bp = BasePoint(cs, [0, 0], [0, -1])
    rep = second_tangent_omega(cs, bp, [1, 0])
    # {u : 2 - u2 <= 0}
    assert member(rep.region, [0.0, 2.0]) and member(rep.region, [9.0, 5.0])
    assert not member(rep.region, [0.0, 1.0])


def test_second_tangent_omega_identity_is_inner_set():
    cs = soc_cs()
    bp = BasePoint(cs, [1, 0, 1], [1, 0, -1])
    rep = second_tangent_omega(cs, bp, [1, 1, 1])
    assert member(rep.region, [-1.0, 0.0, 0.0])
    assert not member(rep.region, [0.0, 0.0, 0.0])


def test_second_tangent_omega_zero_direction():
    cs = parabola_cs()
    bp = BasePoint(cs, [0, 0], [0, -1])
    rep = second_tangent_omega(cs, bp, [0, 0])
    assert member(rep.region, [0.0, 1.0]) and not member(rep.region, [0.0, -1.0])


def test_s_w_map_shifts():
    cs = parabola_cs()
    bp = BasePoint(cs, [0, 0], [0, -1])
    for p, rhs in ((np.array([1.0]), 3.0), (np.array([-2.0]), 0.0)):
        rep = s_w_map(cs, bp, [1, 0], p)
        assert member(rep.region, [0.0, rhs + 0.001])
        assert not member(rep.region, [0.0, rhs - 0.01])


def test_s_w_requires_tangent():
    cs = parabola_cs()
    bp = BasePoint(cs, [0, 0], [0, -1])
    with pytest.raises(NotTangent):
        s_w_map(cs, bp, [0, -1], np.zeros(1))


def test_chain_rule_consistency_with_membership_oracle():
    cs = parabola_cs()
    bp = BasePoint(cs, [0, 0], [0, -1])
    rep = second_tangent_omega(cs, bp, [1, 0])
    grid = QuotientGrid(seed=2)
    for u in ([0.0, 2.0], [1.0, 3.0]):
        est = t2_membership(cs, bp.x, [1, 0], u, grid)
        assert est.converged
    est_out = t2_membership(cs, bp.x, [1, 0], [0.0, 1.0], grid)
    assert est_out.trend != "converged"


def test_outer_lipschitz_inclusion_sampled():
    # every vertex/boundary point of S_w(p) lies within kappa*|p| of S_w(0)
    rng = np.random.default_rng(12)
    cs = parabola_cs()
    bp = BasePoint(cs, [0, 0], [0, -1])
    kappa = bp.kappa()
    rep0 = second_tangent_omega(cs, bp, [1, 0])
    from parareg.constraint_system import region_as_polyhedron

    base = region_as_polyhedron(rep0.region)
    for _ in range(20):
        p = rng.standard_normal(1)
        rep = s_w_map(cs, bp, [1, 0], p)
        poly = region_as_polyhedron(rep.region)
        # sample boundary points of the halfplane S_w(p)
        for _ in range(5):
            u = rng.standard_normal(2) * 3
            proj = project(poly, u)
            d = dist(base, proj)
            assert d <= kappa * abs(float(p[0])) * (1 + 1e-6) + 1e-8


def test_critical_cone_equivalence():
    # w in K_Omega iff Df(x) w in K_theta(f(x), lam) for extracted lam
    from parareg.set_catalog import critical_cone

    rng = np.random.default_rng(13)
    for cs, x, v in [
        (parabola_cs(), np.zeros(2), np.array([0.0, -1.0])),
        (soc_cs(), np.array([1.0, 0.0, 1.0]), np.array([1.0, 0.0, -1.0])),
    ]:
        bp = BasePoint(cs, x, v)
        ms = multiplier_set(cs, bp)
        lam = ms.an_element()
        komega = critical_cone_omega(cs, bp)
        ktheta = critical_cone(cs.theta, bp.fx, lam)
        for _ in range(40):
            w = rng.standard_normal(cs.n)
            assert cone_contains(komega, w) == cone_contains(ktheta, bp.jac @ w)


# ---------------------------------------------------------------------------
# residuals and CQ diagnostics
# ---------------------------------------------------------------------------


def test_normal_image_distance_examples():
    cs = parabola_cs()
    bp = BasePoint(cs, [0, 0], [0, -1])
    assert normal_image_distance(cs, bp, [0, -1]) <= 1e-10
    assert abs(normal_image_distance(cs, bp, [-1, 0]) - 1.0) <= 1e-9


def test_cq_identity_map():
    cs = ConstraintSystem(SmoothMap.identity(2), Polyhedron.orthant_nonpos(2))
    bp = BasePoint(cs, [0, 0], [1, 0])
    d = cq_diagnostics(cs, bp, radii=(1e-1, 1e-2), samples=20)
    assert d["mrcq"] is True
    assert abs(d["mscq_estimate"] - 1.0) <= 0.2


def test_cq_square_constraint_unbounded():
    f = SmoothMap.from_polynomial(1, [[(1.0, (2,))]])
    cs = ConstraintSystem(f, Polyhedron.zero(1))
    bp = BasePoint(cs, [0], [0])
    d = cq_diagnostics(cs, bp, samples=30)
    assert d["mrcq"] is False and d["mscq_unbounded"] is True


def test_cq_parabola_mrcq_holds():
    cs = parabola_cs()
    bp = BasePoint(cs, [0, 0], [0, -1])
    d = cq_diagnostics(cs, bp, radii=(1e-1, 1e-2, 1e-3), samples=30)
    assert d["mrcq"] is True and not d["mscq_unbounded"]


def test_cq_soc_vertex_mrcq():
    cs = soc_cs()
    bp = BasePoint(cs, [0, 0, 0], [1.0, 0.0, -1.0])
    d = cq_diagnostics(cs, bp, radii=(1e-1, 1e-2), samples=20)
    # identity map: kernel of J^T is trivial, so MRCQ holds even at the vertex
    assert d["mrcq"] is True
