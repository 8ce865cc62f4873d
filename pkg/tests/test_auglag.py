import numpy as np
import pytest

from parareg.auglag import (
    auglag_expansion_residuals,
    d2_auglag,
    eval_auglag,
    growth_threshold,
    moreau_envelope_of_d2,
)
from parareg.constraint_system import ConstraintSystem, SmoothMap
from parareg.errors import KktViolated, NonpositiveRho
from parareg.fixtures import make_fixture
from parareg.numeric_core import ExtReal
from parareg.optimality import OptProblem
from parareg.set_catalog import (
    Polyhedron,
    SecondOrderCone,
    d2_indicator,
    normal_cone,
)


def parabola_problem(c: float) -> OptProblem:
    fx = make_fixture("parabola", c=c)
    return OptProblem(fx.phi, fx.cs)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def test_eval_at_kkt_pair_value_and_gradient_vanish():
    p = parabola_problem(0.0)
    for rho in (0.5, 1.0, 7.0):
        ev = eval_auglag(p, [0, 0], [1.0], rho)
        assert abs(ev.value) <= 1e-12
        np.testing.assert_allclose(ev.gradient_x, [0.0, 0.0], atol=1e-12)


def test_eval_zero_multiplier_feasible_point_is_objective():
    p = parabola_problem(0.0)
    x = np.array([0.1, 0.5])  # strictly feasible
    ev = eval_auglag(p, x, [0.0], 3.0)
    assert abs(ev.value - p.phi_value(x)) <= 1e-12


def test_eval_monotone_in_rho():
    p = parabola_problem(0.0)
    x = np.array([0.1, 0.0])
    v1 = eval_auglag(p, x, [1.0], 1.0).value
    v10 = eval_auglag(p, x, [1.0], 10.0).value
    assert v10 >= v1 - 1e-12


def test_eval_rejects_nonpositive_rho():
    with pytest.raises(NonpositiveRho):
        eval_auglag(parabola_problem(0.0), [0, 0], [1.0], 0.0)


# ---------------------------------------------------------------------------
# Moreau envelope of the second subderivative
# ---------------------------------------------------------------------------


def test_envelope_halfline_squared_distance():
    # theta = R_-, critical cone {0}: envelope is rho * u^2
    val = moreau_envelope_of_d2(Polyhedron.orthant_nonpos(1), [0.0], [1.0],
                                4.0, [0.3])
    assert abs(val.value - 4.0 * 0.09) <= 1e-12


def test_envelope_zero_on_the_critical_cone():
    val = moreau_envelope_of_d2(Polyhedron.orthant_nonpos(2), [0.0, 0.0],
                                [1.0, 0.0], 2.0, [0.0, -1.5])
    assert val == ExtReal.finite(0.0)


def test_envelope_soc_one_dimensional_minimization():
    # K = {w1 = w3}, quadratic term w2^2: at u = (0,1,0), rho = 1 the value
    # is min_z2 z2^2 + (z2 - 1)^2 = 1/2
    val = moreau_envelope_of_d2(SecondOrderCone(3), [1, 0, 1], [1, 0, -1],
                                1.0, [0, 1, 0])
    assert abs(val.value - 0.5) <= 1e-12


def test_envelope_monotone_in_rho_and_below_d2():
    rng = np.random.default_rng(0)
    sets = [Polyhedron.orthant_nonpos(2), SecondOrderCone(3)]
    grid = (1.0, 2.0, 5.0, 10.0, 100.0, 1000.0)
    for theta in sets:
        for _ in range(20):
            if isinstance(theta, SecondOrderCone):
                y = np.array([1.0, 0.0, 1.0]) if rng.random() < 0.7 else np.zeros(3)
            else:
                y = np.zeros(2)
            ncone = normal_cone(theta, y)
            lam = _sample_normal(ncone, theta, y, rng)
            u = rng.standard_normal(theta.dim)
            vals = [moreau_envelope_of_d2(theta, y, lam, r, u).value for r in grid]
            for a, b in zip(vals, vals[1:]):
                assert b >= a - 1e-10
            d2 = d2_indicator(theta, y, lam, u)
            if d2.is_finite:
                assert vals[-1] <= d2.value + 1e-8
            # envelope converges upward to the subderivative on the domain
            if d2.is_finite:
                assert abs(vals[-1] - d2.value) <= 1e-2 * (1 + abs(d2.value)) + 1e-6


def _sample_normal(ncone, theta, y, rng):
    from parareg.set_catalog import ConeRep, SocCone

    if isinstance(ncone, ConeRep) and ncone.has_generators:
        rays = ncone.rays if ncone.rays is not None else np.zeros((0, theta.dim))
        if rays.shape[0]:
            coef = rng.random(rays.shape[0])
            return coef @ rays
        return np.zeros(theta.dim)
    if isinstance(ncone, SocCone):
        z = rng.standard_normal(theta.dim - 1)
        z *= rng.random() / max(np.linalg.norm(z), 1e-12)
        t = -np.linalg.norm(z) - rng.random()
        return np.concatenate([z, [t]]) * ncone.sign * -1 if ncone.sign == 1 \
            else np.concatenate([z, [t]])
    return np.zeros(theta.dim)


# ---------------------------------------------------------------------------
# second semiderivative of the augmented Lagrangian
# ---------------------------------------------------------------------------


def test_d2_auglag_closed_form_parabola():
    p = parabola_problem(0.0)
    rng = np.random.default_rng(1)
    for rho in (1.0, 2.0, 10.0):
        for _ in range(10):
            w = rng.standard_normal(2)
            val = d2_auglag(p, [0, 0], [1.0], rho, w)
            assert abs(val - (2 * w[0] ** 2 + rho * w[1] ** 2)) <= 1e-9


def test_d2_auglag_zero_direction():
    assert d2_auglag(parabola_problem(0.0), [0, 0], [1.0], 3.0, [0, 0]) == 0.0


def test_d2_auglag_rho_doubling_on_envelope_direction():
    p = parabola_problem(0.0)
    v1 = d2_auglag(p, [0, 0], [1.0], 1.0, [0, 1])
    v2 = d2_auglag(p, [0, 0], [1.0], 2.0, [0, 1])
    assert abs(v2 - 2.0 * v1) <= 1e-12


def test_d2_auglag_requires_kkt():
    with pytest.raises(KktViolated):
        d2_auglag(parabola_problem(0.0), [0, 0], [2.0], 1.0, [1, 0])


def test_d2_auglag_matches_finite_differences():
    p = parabola_problem(0.0)
    rng = np.random.default_rng(2)
    for _ in range(6):
        w = rng.standard_normal(2)
        res = auglag_expansion_residuals(p, [0, 0], [1.0], 2.0, w,
                                         ts=(1e-2, 1e-3, 1e-4))
        assert res[-1] <= 1e-3 * (1 + np.linalg.norm(w) ** 2)


def test_d2_auglag_lower_bound_polyhedral():
    # d2 >= <Hess_L w, w> + rho dist(Df w; K_theta)^2 for polyhedral targets
    from parareg.convex_subproblems import dist as set_dist
    from parareg.set_catalog import cone_to_set, critical_cone

    p = parabola_problem(0.0)
    from parareg.constraint_system import BasePoint

    bp = BasePoint(p.cs, np.zeros(2), np.array([0.0, -1.0]))
    k = critical_cone(p.cs.theta, bp.fx, np.array([1.0]))
    rng = np.random.default_rng(3)
    for _ in range(20):
        w = rng.standard_normal(2)
        rho = float(rng.random() * 9 + 1)
        val = d2_auglag(p, [0, 0], [1.0], rho, w)
        hl = p.phi_hess(np.zeros(2)) + np.einsum("kij,k->ij", bp.hess, [1.0])
        d = set_dist(cone_to_set(k), bp.jac @ w)
        assert val >= float(w @ (hl @ w)) + rho * d * d - 1e-9


# ---------------------------------------------------------------------------
# growth threshold
# ---------------------------------------------------------------------------


def test_growth_threshold_parabola_every_rho_passes():
    p = parabola_problem(0.0)
    rep = growth_threshold(p, [0, 0], [1.0], rho_grid=(1.0, 2.0, 5.0, 10.0),
                           ell=0.5, eps=1e-2, samples=4000, seed=0)
    assert rep.rho_bar == 1.0
    assert rep.sufficient_without_cq is True
    assert rep.consistent


def test_growth_threshold_degenerate_never_passes():
    p = parabola_problem(-1.0)
    rep = growth_threshold(p, [0, 0], [1.0], rho_grid=(1.0, 10.0, 100.0),
                           ell=0.05, eps=1e-2, samples=4000, seed=0)
    assert rep.rho_bar is None
    assert rep.sufficient_without_cq is False
    assert rep.consistent


def test_equivalence_suite_parabola_family():
    # (i) pointwise sufficiency == (ii) positivity for large rho == (iii) growth
    from parareg.optimality import sufficient_without_cq

    for c in (-1.0, -0.5, 0.0, 1.0):
        p = parabola_problem(c)
        rep = growth_threshold(p, [0, 0], [1.0], rho_grid=(1.0, 10.0, 100.0),
                               ell=None if c > -1 else 0.05, eps=1e-2,
                               samples=4000, seed=1)
        suff = sufficient_without_cq(p, [0, 0], [1.0])
        verdict_ii = any(pos for _, pos, _ in rep.per_rho)
        verdict_iii = rep.rho_bar is not None
        assert suff == verdict_ii == verdict_iii, c
