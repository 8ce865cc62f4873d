import numpy as np
import pytest

from parareg.constraint_system import ConstraintSystem, SmoothMap
from parareg.errors import InfeasiblePoint
from parareg.fixtures import make_fixture
from parareg.optimality import (
    OptProblem,
    growth_sample,
    kkt_check,
    second_order_conditions,
    strong_subregularity_check,
    sufficient_without_cq,
)
from parareg.set_catalog import FullSpace, Polyhedron


def parabola_problem(c: float) -> OptProblem:
    fx = make_fixture("parabola", c=c)
    return OptProblem(fx.phi, fx.cs)


def test_kkt_parabola_unit_multiplier():
    p = parabola_problem(0.0)
    r = kkt_check(p, [0, 0])
    assert r["multiplier_set"].kind == "singleton"
    np.testing.assert_allclose(r["multiplier_set"].lam0, [1.0])
    assert r["residual"] <= 1e-10


def test_kkt_empty_multipliers_positive_residual():
    phi = SmoothMap.from_polynomial(2, [[(1.0, (1, 0))]])
    p = OptProblem(phi, make_fixture("parabola").cs)
    r = kkt_check(p, [0, 0])
    assert r["multiplier_set"].is_empty
    assert abs(r["residual"] - 1.0) <= 1e-9


def test_kkt_unconstrained_zero_multiplier():
    phi = SmoothMap.from_polynomial(2, [[(1.0, (2, 0)), (1.0, (0, 2))]])
    p = OptProblem(phi, ConstraintSystem(SmoothMap.identity(2), FullSpace(2)))
    r = kkt_check(p, [0, 0])
    lam = r["multiplier_set"].an_element()
    np.testing.assert_allclose(lam, [0.0, 0.0])
    assert r["residual"] <= 1e-12


def test_kkt_requires_feasibility():
    with pytest.raises(InfeasiblePoint):
        kkt_check(parabola_problem(0.0), [1.0, 0.0])


def test_second_order_family_verdicts():
    cert0 = second_order_conditions(parabola_problem(0.0), [0, 0])
    assert cert0.sufficient_holds and cert0.necessary_holds
    assert abs(cert0.ell_hat - 2.0) <= 1e-6
    assert abs(abs(cert0.worst_direction[0]) - 1.0) <= 1e-9

    cert_neg = second_order_conditions(parabola_problem(-1.0), [0, 0])
    assert cert_neg.necessary_holds and not cert_neg.sufficient_holds
    assert abs(cert_neg.ell_hat) <= 1e-9

    cert_bad = second_order_conditions(parabola_problem(-2.0), [0, 0])
    assert not cert_bad.necessary_holds
    assert cert_bad.ell_hat == float("-inf")


def test_second_order_strongly_convex():
    fx = make_fixture("strongly_convex")
    cert = second_order_conditions(OptProblem(fx.phi, fx.cs), fx.x)
    assert cert.sufficient_holds
    assert abs(cert.ell_hat - 2.0) <= 1e-9


def test_no_gap_structure_sufficient_implies_necessary():
    for c in (-1.0, -0.5, 0.0, 1.0):
        cert = second_order_conditions(parabola_problem(c), [0, 0])
        if cert.sufficient_holds:
            assert cert.necessary_holds


def test_growth_parabola_thresholds():
    p = parabola_problem(0.0)
    ok = growth_sample(p, [0, 0], 1.9, eps=0.1, samples=20000, seed=1)
    assert ok.holds
    bad = growth_sample(p, [0, 0], 2.1, eps=0.1, samples=20000, seed=1)
    assert not bad.holds and bad.violations


def test_growth_never_violated_at_zero_modulus():
    p = parabola_problem(0.0)
    rep = growth_sample(p, [0, 0], 0.0, eps=0.05, samples=5000, seed=2)
    assert rep.holds


def test_growth_degenerate_direction_fails_any_positive_modulus():
    p = parabola_problem(-1.0)
    rep = growth_sample(p, [0, 0], 0.05, eps=0.05, samples=20000, seed=3)
    assert not rep.holds


def test_sufficient_without_cq_family():
    assert sufficient_without_cq(parabola_problem(0.0), [0, 0], [1.0])
    assert not sufficient_without_cq(parabola_problem(-1.0), [0, 0], [1.0])


def test_sufficient_without_cq_strongly_convex_growth():
    fx = make_fixture("strongly_convex")
    p = OptProblem(fx.phi, fx.cs)
    assert sufficient_without_cq(p, fx.x, np.zeros(2))
    rep = growth_sample(p, fx.x, 1.8, eps=0.01, samples=5000, seed=4)
    assert rep.holds


def test_growth_passes_at_090_ell_hat():
    for c in (0.0, 1.0):
        p = parabola_problem(c)
        cert = second_order_conditions(p, [0, 0])
        rep = growth_sample(p, [0, 0], 0.9 * cert.ell_hat, eps=1e-2,
                            samples=20000, seed=5)
        assert rep.holds, c


def test_scaling_covariance_of_ell_hat():
    base = second_order_conditions(parabola_problem(0.0), [0, 0])
    # scale phi by 3: x2 -> 3 x2 with the same constraint system
    phi3 = SmoothMap.from_polynomial(2, [[(3.0, (0, 1))]])
    p3 = OptProblem(phi3, make_fixture("parabola").cs)
    cert3 = second_order_conditions(p3, [0, 0])
    assert abs(cert3.ell_hat - 3.0 * base.ell_hat) <= 1e-6
    assert abs(abs(cert3.worst_direction[0]) - abs(base.worst_direction[0])) <= 1e-9


def test_strong_subregularity_two_routes():
    res_pos = strong_subregularity_check(parabola_problem(0.0), [0, 0])
    assert res_pos["sufficient_route"] and res_pos["injectivity_route"]
    assert res_pos["agree"]

    res_neg = strong_subregularity_check(parabola_problem(-1.0), [0, 0])
    assert not res_neg["sufficient_route"] and not res_neg["injectivity_route"]
    assert res_neg["agree"]
    assert res_neg["witness_direction"] is not None


def test_strong_subregularity_unconstrained():
    fx = make_fixture("strongly_convex")
    res = strong_subregularity_check(OptProblem(fx.phi, fx.cs), fx.x)
    assert res["sufficient_route"] and res["injectivity_route"] and res["agree"]
