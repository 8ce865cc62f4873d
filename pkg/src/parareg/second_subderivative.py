"""Primal and dual second-order programs and the second subderivative of the
indicator of a constraint system.

For a feasible pair (x, v) and a critical direction w, the primal program
minimizes -<v, u> over the second-order tangent set of the system, and the
dual maximizes <lam, D^2 f(x)(w,w)> - sigma_{T^2_theta}(lam) over the
multiplier set.  Both are solved exactly as dense LPs whenever the geometry
is polyhedral (including the second-order cone at nonzero boundary points,
through its quadratic reduction); the remaining second-order-cone vertex
case runs a projected supergradient ascent certified against the primal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constraint_system import (
    BasePoint,
    ConstraintSystem,
    MultiplierSet,
    SmoothMap,
    critical_cone_omega,
    multiplier_set,
    region_as_polyhedron,
    s_w_map,
    second_tangent_omega,
)
from .convex_subproblems import LinearProgram, solve_lp, support_function
from .errors import EmptyMultiplierSet, NotCritical, UnsupportedGeometry
from .numeric_core import (
    DEFAULT_TOLS,
    NEG_INF,
    POS_INF,
    ExtReal,
    TolerancePolicy,
    as_vector,
)
from .set_catalog import (
    ConvexSetSpec,
    Empty,
    FullSpace,
    Polyhedron,
    Product,
    SecondOrderCone,
    cone_contains,
    d2_indicator,
    second_tangent,
)

__all__ = [
    "D2Value",
    "PerturbationValue",
    "primal_value",
    "perturbation_value",
    "dual_value",
    "d2_delta_omega",
    "d2_intersection",
    "IntersectionResult",
]


@dataclass
class PerturbationValue:
    """Optimal value of the canonically perturbed primal program."""

    p: np.ndarray
    value: ExtReal
    minimizer: Optional[np.ndarray] = None


@dataclass
class D2Value:
    value: ExtReal
    argmax_multipliers: Optional[MultiplierSet]
    certificate: str  # "exact" | "approximate"
    gap: float = 0.0
    argmax_point: Optional[np.ndarray] = None

    @property
    def exact(self) -> bool:
        return self.certificate == "exact"


def _require_critical(cs: ConstraintSystem, bp: BasePoint, w: np.ndarray,
                      tols: TolerancePolicy) -> None:
    kcone = critical_cone_omega(cs, bp, tols)
    if not cone_contains(kcone, w, tols.cone_tol):
        raise NotCritical("w is not in the critical cone of the system")


def perturbation_value(cs: ConstraintSystem, bp: BasePoint, w, p,
                       tols: TolerancePolicy = DEFAULT_TOLS) -> PerturbationValue:
    """min -<v, u> subject to Df(x)u + D^2f(x)(w,w) + p in T^2_theta."""
    w = as_vector(w, cs.n)
    p = as_vector(p, cs.m)
    rep = s_w_map(cs, bp, w, p, tols)
    poly = region_as_polyhedron(rep.region)
    if poly is None:
        if isinstance(rep.region, Empty):
            return PerturbationValue(p, POS_INF, None)
        raise UnsupportedGeometry("primal program is not an LP for this region")
    res = solve_lp(LinearProgram(-bp.v, A_ub=poly.A, b_ub=poly.b,
                                 A_eq=poly.E, b_eq=poly.e), tols)
    if res.status == "infeasible":
        return PerturbationValue(p, POS_INF, None)
    if res.status == "unbounded":
        return PerturbationValue(p, NEG_INF, None)
    return PerturbationValue(p, res.value, res.x)


def primal_value(cs: ConstraintSystem, bp: BasePoint, w,
                 tols: TolerancePolicy = DEFAULT_TOLS) -> PerturbationValue:
    """Unperturbed primal program; requires a critical direction."""
    w = as_vector(w, cs.n)
    _require_critical(cs, bp, w, tols)
    return perturbation_value(cs, bp, w, np.zeros(cs.m), tols)


def _dual_lp_over_polyhedral(ms: MultiplierSet, hww: np.ndarray,
                             t2: Polyhedron, tols: TolerancePolicy):
    """max <lam, hww> - sigma_{t2}(lam) over a polyhedral multiplier set.

    The support term is absorbed with LP duality: sigma_{t2}(lam) equals
    min {b@mu + e@nu : A^T mu + E^T nu = lam, mu >= 0}, so the dual becomes
    one joint LP in (z, mu, nu).
    """
    m = ms.m
    k = ms.lam_map.shape[1]
    n_mu = t2.A.shape[0]
    n_nu = t2.E.shape[0]
    pure_cone = (not t2.b.size or np.allclose(t2.b, 0.0)) and \
                (not t2.e.size or np.allclose(t2.e, 0.0))
    c = np.concatenate([ms.lam_map.T @ hww, -t2.b, -t2.e])
    rows_link = np.hstack([
        -ms.lam_map,
        t2.A.T if n_mu else np.zeros((m, 0)),
        t2.E.T if n_nu else np.zeros((m, 0)),
    ])
    A_eq = np.vstack([
        np.hstack([ms.A_eq, np.zeros((ms.A_eq.shape[0], n_mu + n_nu))]),
        rows_link,
    ])
    b_eq = np.concatenate([ms.b_eq, np.zeros(m)])
    lower = np.concatenate([
        np.where(ms.nonneg, 0.0, -np.inf),
        np.zeros(n_mu),
        np.full(n_nu, -np.inf),
    ])
    res = solve_lp(LinearProgram(c, A_eq=A_eq, b_eq=b_eq, maximize=True,
                                 lower=lower), tols)
    if res.status == "infeasible":
        return NEG_INF, None, None, pure_cone
    if res.status == "unbounded":
        return POS_INF, None, None, pure_cone
    lam = ms.lam_map @ res.x[:k]
    return res.value, lam, res.x[:k], pure_cone


def _supergradient_ascent(ms: MultiplierSet, hww: np.ndarray, radius: float,
                          steps: int = 200) -> tuple[float, np.ndarray]:
    """Projected supergradient ascent of <lam, hww> over a conic multiplier
    slice, iterates kept inside the given radius ball."""
    from .constraint_system import _conic_slice_element, _project_cone

    lam = ms.lam0.copy()
    nh = np.linalg.norm(hww)
    best_lam = lam.copy()
    best = float(lam @ hww)
    jac, v = ms.jac, ms.v
    for k in range(1, steps + 1):
        step = (1.0 / k) * (1.0 if nh == 0 else 1.0 / nh)
        lam = lam + step * hww
        # alternate back onto the slice {lam in cone, J^T lam = v}
        for _ in range(30):
            lam = _project_cone(ms.cone, lam)
            resid = jac.T @ lam - v
            if np.linalg.norm(resid) <= 1e-12 * (1.0 + np.linalg.norm(v)):
                break
            corr, *_ = np.linalg.lstsq(jac.T, resid, rcond=None)
            lam = lam - corr
        nl = np.linalg.norm(lam)
        if nl > radius:
            lam = lam * (radius / nl)
        val = float(lam @ hww)
        if val > best and np.linalg.norm(jac.T @ lam - v) <= 1e-8 * (1.0 + np.linalg.norm(v)):
            best, best_lam = val, lam.copy()
    return best, best_lam


def dual_value(cs: ConstraintSystem, bp: BasePoint, w,
               radius: Optional[float] = None,
               tols: TolerancePolicy = DEFAULT_TOLS) -> D2Value:
    """Dual second-order program at a critical direction.

    Polyhedral multiplier sets are solved by one joint LP (support term
    absorbed by LP duality) and record the optimal face; singleton and ray
    sets are evaluated in closed form; conic slices (second-order-cone
    vertex) use the projected supergradient ascent with the certificate
    downgraded to "approximate" when the gap against the primal LP exceeds
    lp_tol.
    """
    w = as_vector(w, cs.n)
    _require_critical(cs, bp, w, tols)
    ms = multiplier_set(cs, bp, tols)
    if ms.is_empty:
        raise EmptyMultiplierSet(
            "multiplier set is empty: MSCQ violated or v is not a normal")
    hww = bp.hess_quadratic(w)
    u = bp.jac @ w

    if ms.kind in ("singleton", "ray"):
        lam = ms.lam0 if ms.kind == "singleton" else np.zeros(cs.m)
        if ms.kind == "ray":
            slope = float(ms.direction @ hww)
            soc_term = d2_indicator(cs.theta, bp.fx, ms.direction, u, tols)
            total_slope = slope + (soc_term.value if soc_term.is_finite else 0.0)
            if soc_term.is_finite and total_slope > tols.lp_tol:
                return D2Value(POS_INF, ms, "approximate", gap=float("inf"))
        curv = d2_indicator(cs.theta, bp.fx, lam, u, tols)
        if not curv.is_finite:
            # should not happen for critical w; report honestly
            return D2Value(POS_INF, ms, "approximate", gap=float("inf"))
        val = ExtReal.finite(float(lam @ hww) + curv.value)
        return _certify(cs, bp, w, val, ms, lam, tols)

    if ms.kind == "polyhedral":
        t2 = second_tangent(cs.theta, bp.fx, u, tols)
        poly = region_as_polyhedron(t2.region)
        if poly is None:
            raise UnsupportedGeometry("dual LP needs a polyhedral inner "
                                      "second-order tangent set")
        val, lam, z, pure_cone = _dual_lp_over_polyhedral(ms, hww, poly, tols)
        if not val.is_finite:
            return D2Value(val, ms, "approximate", gap=float("inf"))
        face = ms.with_face(hww, val.value) if pure_cone else ms
        return _certify(cs, bp, w, val, face, lam, tols)

    if ms.kind == "conic":
        r = radius if radius is not None else max(bp.kappa() * np.linalg.norm(bp.v), 1.0)
        best, lam = _supergradient_ascent(ms, hww, r)
        val = ExtReal.finite(best)
        return _certify(cs, bp, w, val, ms, lam, tols)

    raise UnsupportedGeometry(f"dual not implemented for kind {ms.kind!r}")


def _certify(cs, bp, w, val: ExtReal, face, lam, tols) -> D2Value:
    primal = perturbation_value(cs, bp, w, np.zeros(cs.m), tols)
    if primal.value.is_finite and val.is_finite:
        gap = abs(primal.value.value - val.value)
        scale = 1.0 + abs(primal.value.value)
        cert = "exact" if gap <= tols.lp_tol * scale else "approximate"
        return D2Value(val, face, cert, gap=gap, argmax_point=lam)
    gap = float("inf")
    return D2Value(val, face, "approximate", gap=gap, argmax_point=lam)


def d2_delta_omega(cs: ConstraintSystem, bp: BasePoint, w,
                   radius: Optional[float] = None,
                   tols: TolerancePolicy = DEFAULT_TOLS) -> D2Value:
    """Second subderivative of the indicator of {x: f(x) in theta} at
    (x, v), evaluated at w.

    +inf off the critical cone; on it, the dual program value with a no-gap
    certificate against the primal LP.  `radius` bounds the multiplier
    search ball and defaults to kappa * ||v||; the value is independent of
    any radius at least that large.
    """
    w = as_vector(w, cs.n)
    kcone = critical_cone_omega(cs, bp, tols)
    if not cone_contains(kcone, w, tols.cone_tol):
        return D2Value(POS_INF, None, "exact", gap=0.0)
    try:
        return dual_value(cs, bp, w, radius, tols)
    except EmptyMultiplierSet:
        raise EmptyMultiplierSet(
            "multiplier set is empty: MSCQ violated or v is not in N_Omega(x)")


@dataclass
class IntersectionResult:
    d2: D2Value
    t2_first: ConvexSetSpec
    t2_second: ConvexSetSpec
    t2_intersection: Optional[Polyhedron]


def d2_intersection(omega1: ConvexSetSpec, omega2: ConvexSetSpec, x, v, w,
                    tols: TolerancePolicy = DEFAULT_TOLS) -> IntersectionResult:
    """Second subderivative of the indicator of an intersection of two
    catalog sets, through the doubling device f(x) = (x, x) with the
    product target; exposes the second-order tangent intersection."""
    x = as_vector(x)
    n = x.shape[0]
    f = SmoothMap.linear(np.vstack([np.eye(n), np.eye(n)]))
    cs = ConstraintSystem(f, Product((omega1, omega2)))
    bp = BasePoint(cs, x, as_vector(v, n), tols=tols)
    d2 = d2_delta_omega(cs, bp, w, tols=tols)
    w = as_vector(w, n)
    t2a = t2b = t2_int = None
    try:
        t2a = second_tangent(omega1, x, w, tols).region
        t2b = second_tangent(omega2, x, w, tols).region
        pa, pb = region_as_polyhedron(t2a), region_as_polyhedron(t2b)
        if pa is not None and pb is not None:
            t2_int = Polyhedron(np.vstack([pa.A, pb.A]), np.concatenate([pa.b, pb.b]),
                                np.vstack([pa.E, pb.E]), np.concatenate([pa.e, pb.e]))
    except Exception:
        pass  # direction not tangent to a factor: intersection set not exposed
    return IntersectionResult(d2, t2a, t2b, t2_int)
