"""Graphical derivative of the normal-cone map of a constraint system.

Membership in DN(x, v)(w) is decided through the union formula over the
dual-optimal multiplier face: a candidate q must decompose as the
Lagrangian-curvature term plus the adjoint image of the derivative of the
target set's normal-cone map at the pushed-forward direction.  The
polyhedral part of that derivative is the normal cone of the critical
cone, and the second-order cone contributes an extra rotational term on
its boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constraint_system import BasePoint, ConstraintSystem
from .convex_subproblems import project, soc_project
from .errors import NonConvexUnsupported, NotANormal, UnsupportedGeometry
from .numeric_core import DEFAULT_TOLS, TolerancePolicy, as_vector
from .second_subderivative import d2_delta_omega
from .set_catalog import (
    ConeRep,
    ConvexSetSpec,
    FullSpace,
    Polyhedron,
    Product,
    SecondOrderCone,
    SocCone,
    cone_contains,
    cone_to_set,
    critical_cone,
    normal_cone,
    tangent_cone,
    _orthogonal_complement,
)

__all__ = ["GderAnswer", "DnThetaSet", "dn_theta", "dn_omega_membership",
           "projection_derivative"]


@dataclass
class DnThetaSet:
    """DN of the target set at (y, lam) applied to u: shift + cone."""

    empty: bool
    shift: Optional[np.ndarray] = None
    cone: Optional[object] = None  # ConeRep or SocCone or list of blocks

    def contains(self, q: np.ndarray, tol: float) -> bool:
        if self.empty:
            return False
        return cone_contains(self.cone, q - self.shift, tol)


@dataclass
class GderAnswer:
    membership: bool
    witness_multiplier: Optional[np.ndarray] = None
    witness_normal_component: Optional[np.ndarray] = None
    description: Optional[str] = None
    method: str = "unique_multiplier_exact"


def _normal_cone_of_cone_at(kcone, u: np.ndarray, tols: TolerancePolicy):
    """N_K(u) for a critical cone K (ConeRep halfspace form or SOC kinds)."""
    if isinstance(kcone, ConeRep):
        if not kcone.has_halfspace:
            raise UnsupportedGeometry("need halfspace form of the critical cone")
        n = kcone.dim
        g = kcone.ineq if kcone.ineq is not None else np.zeros((0, n))
        h = kcone.eq if kcone.eq is not None else np.zeros((0, n))
        nu = float(np.linalg.norm(u))
        if g.shape[0]:
            rn = np.linalg.norm(g, axis=1)
            act = np.abs(g @ u) <= tols.cone_tol * (1.0 + rn * nu)
            rays = g[act]
        else:
            rays = np.zeros((0, n))
        return ConeRep(n, rays=rays, lineality=h)
    if isinstance(kcone, SocCone) and kcone.sign == 1:
        # K is the cone itself (zero normal at the vertex case)
        m = kcone.dim
        nu = float(np.linalg.norm(u))
        if nu <= tols.cone_tol:
            return SocCone(m, -1)
        head, tail = u[:-1], u[-1]
        if np.linalg.norm(head) < tail - tols.cone_tol * (1.0 + nu):
            return ConeRep.zero(m)
        r = np.concatenate([head / np.linalg.norm(head), [-1.0]])
        return ConeRep.ray(r)
    raise UnsupportedGeometry("unsupported critical cone kind")


def dn_theta(theta: ConvexSetSpec, y, lam, u,
             tols: TolerancePolicy = DEFAULT_TOLS) -> DnThetaSet:
    """Derivative of the normal-cone map of the target set: for u in the
    critical cone, an affinely shifted normal cone of that critical cone
    (the shift is zero except on the second-order-cone boundary)."""
    y = as_vector(y, theta.dim)
    lam = as_vector(lam, theta.dim)
    u = as_vector(u, theta.dim)
    ncone = normal_cone(theta, y, tols)
    if not cone_contains(ncone, lam, tols.cone_tol):
        raise NotANormal("lam is not a normal at y")
    kcone = critical_cone(theta, y, lam, tols)
    if not cone_contains(kcone, u, tols.cone_tol):
        return DnThetaSet(empty=True)
    if isinstance(theta, (Polyhedron, FullSpace)):
        return DnThetaSet(False, np.zeros(theta.dim),
                          _normal_cone_of_cone_at(kcone, u, tols))
    if isinstance(theta, SecondOrderCone):
        m = theta.m
        ny = float(np.linalg.norm(y))
        interior = ny > tols.cone_tol and \
            np.linalg.norm(y[:-1]) < y[-1] - tols.cone_tol * (1.0 + ny)
        if ny <= tols.cone_tol or interior:
            shift = np.zeros(m)
        else:
            c = float(np.linalg.norm(lam) / ny)
            shift = c * np.concatenate([u[:-1], [-u[-1]]])
        return DnThetaSet(False, shift, _normal_cone_of_cone_at(kcone, u, tols))
    if isinstance(theta, Product):
        shifts, cones = [], []
        for f, yi, li, ui in zip(theta.factors, theta.split(y), theta.split(lam),
                                 theta.split(u)):
            sub = dn_theta(f, yi, li, ui, tols)
            if sub.empty:
                return DnThetaSet(empty=True)
            shifts.append(sub.shift)
            cones.append(sub.cone)
        from .set_catalog import ProductCone, _merge_product_cone

        return DnThetaSet(False, np.concatenate(shifts),
                          _merge_product_cone(cones))
    raise UnsupportedGeometry(f"no DN for {type(theta).__name__}")


def _image_membership(jac: np.ndarray, cone, r: np.ndarray, tol: float):
    """Does r belong to jac^T applied to the cone?  Returns (bool, eta)."""
    from scipy.optimize import nnls

    if isinstance(cone, ConeRep) and cone.has_generators:
        rays = cone.rays if cone.rays is not None else np.zeros((0, cone.dim))
        lin = cone.lineality if cone.lineality is not None else np.zeros((0, cone.dim))
        cols, parts = [], []
        if rays.shape[0]:
            cols.append(jac.T @ rays.T)
            parts.append(("rays", rays))
        if lin.shape[0]:
            cols.append(jac.T @ lin.T)
            cols.append(-(jac.T @ lin.T))
            parts.append(("lin", lin))
        if not cols:
            return float(np.linalg.norm(r)) <= tol, np.zeros(cone.dim)
        M = np.hstack(cols)
        coef, res = nnls(M, r)
        if res > tol:
            return False, None
        eta = np.zeros(cone.dim)
        k = 0
        if rays.shape[0]:
            eta += coef[k : k + rays.shape[0]] @ rays
            k += rays.shape[0]
        if lin.shape[0]:
            eta += coef[k : k + lin.shape[0]] @ lin
            k += lin.shape[0]
            eta -= coef[k : k + lin.shape[0]] @ lin
        return True, eta
    if isinstance(cone, SocCone):
        sign = cone.sign
        lam, *_ = np.linalg.lstsq(jac.T, r, rcond=None)
        lam = sign * soc_project(sign * lam)
        best = float(np.linalg.norm(jac.T @ lam - r))
        step = 1.0 / max(np.linalg.norm(jac, 2) ** 2, 1e-12)
        for _ in range(300):
            lam = lam - step * (jac @ (jac.T @ lam - r))
            lam = sign * soc_project(sign * lam)
            cur = float(np.linalg.norm(jac.T @ lam - r))
            best = min(best, cur)
            if best <= 0.1 * tol:
                break
        return best <= tol, lam if best <= tol else None
    raise UnsupportedGeometry("image membership for this cone kind")


def dn_omega_membership(cs: ConstraintSystem, bp: BasePoint, w, q,
                        face_samples: int = 20, seed: int = 0,
                        tols: TolerancePolicy = DEFAULT_TOLS) -> GderAnswer:
    """Membership of q in DN(x, v)(w) via the union over the dual-optimal
    multiplier face.

    Unique multipliers give an exact feasibility test; otherwise the face's
    vertices plus random interior points are tried and the method tag
    records the sampled mode.
    """
    w = as_vector(w, cs.n)
    q = as_vector(q, cs.n)
    d2 = d2_delta_omega(cs, bp, w, tols=tols)
    if not d2.value.is_finite:
        return GderAnswer(False, description="empty: w outside the critical cone",
                          method="unique_multiplier_exact")
    face = d2.argmax_multipliers
    radius = 10.0 * (1.0 + bp.kappa() * float(np.linalg.norm(bp.v)))
    if face is None:
        cands = [d2.argmax_point] if d2.argmax_point is not None else []
        method = "face_sampled"
    elif face.kind in ("singleton",):
        cands = [face.lam0]
        method = "unique_multiplier_exact"
    elif face.kind == "polyhedral":
        rng = np.random.default_rng(seed)
        cands = list(face.sample(face_samples, radius, rng, tols))
        method = "unique_multiplier_exact" if len(cands) == 1 else "face_sampled"
    elif face.kind == "ray":
        nd = float(np.linalg.norm(face.direction, ord=np.inf))
        cands = [np.zeros(cs.m)] + ([radius / nd * face.direction] if nd > 0 else [])
        method = "face_sampled"
    else:  # conic
        cands = [d2.argmax_point if d2.argmax_point is not None else face.lam0]
        method = "face_sampled"
    u = bp.jac @ w
    tol = tols.eq_tol * (1.0 + float(np.linalg.norm(q))) * 10
    for lam in cands:
        if lam is None:
            continue
        try:
            dn = dn_theta(cs.theta, bp.fx, lam, u, tols)
        except NotANormal:
            continue
        if dn.empty:
            continue
        curv = np.einsum("kij,k,j->i", bp.hess, lam, w)
        r = q - curv - bp.jac.T @ dn.shift
        ok, eta = _image_membership(bp.jac, dn.cone, r, tol)
        if ok:
            eta_full = (eta if eta is not None else np.zeros(cs.m)) + dn.shift
            return GderAnswer(True, witness_multiplier=lam,
                              witness_normal_component=eta_full, method=method)
    return GderAnswer(False, method=method)


def projection_derivative(omega: ConvexSetSpec, ubar, w,
                          tols: TolerancePolicy = DEFAULT_TOLS) -> np.ndarray:
    """Directional (semi)derivative of the projection mapping of a convex
    catalog set at ubar, through the resolvent of the normal-cone map's
    graphical derivative at (P(ubar), ubar - P(ubar))."""
    if not isinstance(omega, ConvexSetSpec):
        raise NonConvexUnsupported("projection derivative needs a convex catalog set")
    ubar = as_vector(ubar, omega.dim)
    w = as_vector(w, omega.dim)
    xbar = project(omega, ubar, tols)
    vbar = ubar - xbar
    return _projection_derivative_at(omega, xbar, vbar, w, tols)


def _projection_derivative_at(omega: ConvexSetSpec, xbar, vbar, w,
                              tols: TolerancePolicy) -> np.ndarray:
    if isinstance(omega, FullSpace):
        return w.copy()
    if isinstance(omega, Product):
        out = []
        for f, xi, vi, wi in zip(omega.factors, omega.split(xbar),
                                 omega.split(vbar), omega.split(w)):
            out.append(_projection_derivative_at(f, xi, vi, wi, tols))
        return np.concatenate(out)
    kcone = critical_cone(omega, xbar, vbar, tols)
    if isinstance(omega, (Polyhedron,)):
        return _project_cone_halfspace(kcone, w, tols)
    if isinstance(omega, SecondOrderCone):
        m = omega.m
        nx = float(np.linalg.norm(xbar))
        interior = nx > tols.cone_tol and \
            np.linalg.norm(xbar[:-1]) < xbar[-1] - tols.cone_tol * (1.0 + nx)
        if nx <= tols.cone_tol or interior or np.linalg.norm(vbar) <= tols.cone_tol:
            # vertex / interior: the extra curvature term vanishes
            if isinstance(kcone, SocCone):
                return soc_project(w)
            return _project_cone_halfspace(kcone, w, tols)
        # boundary with nonzero normal: solve w in z + c D z + N_K(z), K a
        # hyperplane through the axis direction
        c = float(np.linalg.norm(vbar) / nx)
        d = np.eye(m)
        d[-1, -1] = -1.0
        a = np.concatenate([xbar[:-1], [-xbar[-1]]])
        basis = _orthogonal_complement(a[None, :] / np.linalg.norm(a))
        mtil = basis @ d @ basis.T
        ztil = np.linalg.solve(c * mtil + np.eye(basis.shape[0]), basis @ w)
        return basis.T @ ztil
    raise NonConvexUnsupported(f"no projection derivative for {type(omega).__name__}")


def _project_cone_halfspace(kcone, w, tols):
    if isinstance(kcone, SocCone) and kcone.sign == 1:
        return soc_project(w)
    return project(cone_to_set(kcone), w, tols)
