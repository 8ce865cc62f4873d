import numpy as np
import pytest

from parareg.errors import DimensionMismatch, IndeterminateSum
from parareg.numeric_core import (
    BilinearMap,
    ExtReal,
    NEG_INF,
    POS_INF,
    TolerancePolicy,
    apply_bilinear,
    extreal_add,
)


def test_extreal_add_finite():
    assert extreal_add(ExtReal.finite(1), ExtReal.finite(2)) == ExtReal.finite(3)


def test_extreal_add_infinite_dominates():
    assert extreal_add(ExtReal.finite(5), POS_INF) == POS_INF
    assert extreal_add(NEG_INF, ExtReal.finite(-3)) == NEG_INF


def test_extreal_indeterminate_sum():
    with pytest.raises(IndeterminateSum):
        extreal_add(POS_INF, NEG_INF)
    with pytest.raises(IndeterminateSum):
        extreal_add(NEG_INF, POS_INF)


def test_extreal_total_order():
    vals = [NEG_INF, ExtReal.finite(-10), ExtReal.finite(0), ExtReal.finite(3), POS_INF]
    for a, b in zip(vals, vals[1:]):
        assert a < b and b > a and a <= b and not (b <= a)
    assert ExtReal.finite(1) <= ExtReal.finite(1)


def test_extreal_never_stores_ieee_inf():
    assert POS_INF.value == 0.0 and POS_INF.tag == "pos_inf"
    with pytest.raises(ValueError):
        ExtReal.finite(float("inf"))
    assert ExtReal.from_float(float("inf")) == POS_INF
    assert ExtReal.from_float(float("-inf")) == NEG_INF


def test_apply_bilinear_single_diagonal_form():
    h = BilinearMap(np.array([[[2.0, 0.0], [0.0, 0.0]]]))
    np.testing.assert_allclose(apply_bilinear(h, [1, 0], [1, 0]), [2.0])


def test_apply_bilinear_zero_map():
    h = BilinearMap(np.zeros((2, 3, 3)))
    np.testing.assert_allclose(apply_bilinear(h, [1, 2, 3], [4, 5, 6]), [0.0, 0.0])


def test_apply_bilinear_fixture_polynomial():
    # second derivative of f(x) = x1^2 - x2 evaluated at w = v = (1, 1)
    from parareg.constraint_system import SmoothMap

    f = SmoothMap.from_polynomial(2, [[(1.0, (2, 0)), (-1.0, (0, 1))]])
    h = f.hessian(np.zeros(2))
    np.testing.assert_allclose(apply_bilinear(h, [1, 1], [1, 1]), [2.0])


def test_apply_bilinear_dimension_mismatch():
    h = BilinearMap(np.zeros((1, 2, 2)))
    with pytest.raises(DimensionMismatch):
        apply_bilinear(h, [1, 0, 0], [1, 0, 0])


def test_bilinear_requires_symmetry():
    bad = np.zeros((1, 2, 2))
    bad[0, 0, 1] = 1.0  # asymmetric block
    with pytest.raises(ValueError):
        BilinearMap(bad)


def test_quadratic_part_degree_two_homogeneous():
    rng = np.random.default_rng(0)
    for _ in range(25):
        a = rng.standard_normal((2, 3, 3))
        h = BilinearMap(0.5 * (a + np.transpose(a, (0, 2, 1))))
        w = rng.standard_normal(3)
        t = float(rng.random() * 4 + 0.1)
        np.testing.assert_allclose(
            apply_bilinear(h, t * w, t * w), t * t * apply_bilinear(h, w, w),
            rtol=1e-12, atol=1e-12)


def test_bilinear_symmetric_in_arguments():
    rng = np.random.default_rng(1)
    for _ in range(25):
        a = rng.standard_normal((3, 4, 4))
        h = BilinearMap(0.5 * (a + np.transpose(a, (0, 2, 1))))
        w, v = rng.standard_normal(4), rng.standard_normal(4)
        np.testing.assert_allclose(apply_bilinear(h, w, v), apply_bilinear(h, v, w),
                                   rtol=1e-12, atol=1e-12)


def test_tolerance_policy_positive():
    with pytest.raises(ValueError):
        TolerancePolicy(eq_tol=0.0)
    with pytest.raises(ValueError):
        TolerancePolicy(oracle_tol=-1e-3)
    t = TolerancePolicy()
    assert t.eq_tol == 1e-9 and t.cone_tol == 1e-8
    assert t.oracle_tol == 1e-3 and t.lp_tol == 1e-9
