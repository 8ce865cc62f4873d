"""Convex target sets and their pointwise cone objects.

Sets are one of: polyhedron {y: Ay <= b, Ey = e}, the second-order cone
Q = {(y', y_m): ||y'|| <= y_m}, finite products, the full space, and the
empty set.  For a base point in the set this module computes the tangent,
normal, and critical cones, second-order tangent sets, the second
subderivative of the set indicator, and second subderivatives through
smooth full-rank reductions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import (
    DimensionMismatch,
    NotANormal,
    NotTangent,
    PointNotInSet,
    RankDeficient,
    UnsupportedGeometry,
)
from .numeric_core import (
    DEFAULT_TOLS,
    NEG_INF,
    POS_INF,
    ExtReal,
    TolerancePolicy,
    as_matrix,
    as_vector,
    extreal_add,
)

__all__ = [
    "ConvexSetSpec",
    "Polyhedron",
    "SecondOrderCone",
    "Product",
    "FullSpace",
    "Empty",
    "ConeRep",
    "SocCone",
    "ProductCone",
    "PullbackCone",
    "Cone",
    "cone_contains",
    "cone_support",
    "cone_equality_rows",
    "cone_to_set",
    "SecondTangentRep",
    "ReductionData",
    "tangent_cone",
    "normal_cone",
    "critical_cone",
    "second_tangent",
    "d2_indicator",
    "soc_boundary_d2_closed_form",
    "soc_reduction",
    "reduction_second_subderivative",
    "normal_cone_generators",
]


# ---------------------------------------------------------------------------
# Convex set specifications
# ---------------------------------------------------------------------------


class ConvexSetSpec:
    """Base class for the catalog's convex set descriptions."""

    dim: int


@dataclass(frozen=True)
class Polyhedron(ConvexSetSpec):
    """{y : A y <= b, E y = e}; A or E may have zero rows."""

    A: np.ndarray
    b: np.ndarray
    E: np.ndarray
    e: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.A, dtype=float)
        ee = np.asarray(self.E, dtype=float)
        n = a.shape[1] if a.ndim == 2 and a.shape[1] else (
            ee.shape[1] if ee.ndim == 2 else 0)
        if a.ndim != 2 or a.size == 0 and a.shape != (0, n):
            a = a.reshape((-1, n)) if a.size else np.zeros((0, n))
        if ee.ndim != 2 or ee.size == 0 and ee.shape != (0, n):
            ee = ee.reshape((-1, n)) if ee.size else np.zeros((0, n))
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "E", ee)
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float).ravel())
        object.__setattr__(self, "e", np.asarray(self.e, dtype=float).ravel())
        if self.A.shape[0] != self.b.shape[0] or self.E.shape[0] != self.e.shape[0]:
            raise DimensionMismatch("row/rhs count mismatch in Polyhedron")
        if self.A.shape[1] != self.E.shape[1]:
            raise DimensionMismatch("A and E column counts differ")

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @staticmethod
    def from_inequalities(A, b) -> "Polyhedron":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        n = A.shape[1]
        return Polyhedron(A, np.asarray(b, dtype=float), np.zeros((0, n)), np.zeros(0))

    @staticmethod
    def orthant_nonpos(n: int) -> "Polyhedron":
        return Polyhedron.from_inequalities(np.eye(n), np.zeros(n))

    @staticmethod
    def zero(n: int) -> "Polyhedron":
        return Polyhedron(np.zeros((0, n)), np.zeros(0), np.eye(n), np.zeros(n))


@dataclass(frozen=True)
class SecondOrderCone(ConvexSetSpec):
    """Q = {(y', y_m) in R^(m-1) x R : ||y'|| <= y_m}, m >= 2."""

    m: int

    def __post_init__(self):
        if self.m < 2:
            raise DimensionMismatch("second-order cone needs dim >= 2")

    @property
    def dim(self) -> int:
        return self.m


@dataclass(frozen=True)
class Product(ConvexSetSpec):
    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        for f in self.factors:
            if not isinstance(f, ConvexSetSpec):
                raise DimensionMismatch("Product factors must be ConvexSetSpec")

    @property
    def dim(self) -> int:
        return sum(f.dim for f in self.factors)

    def split(self, y: np.ndarray) -> list[np.ndarray]:
        out, k = [], 0
        for f in self.factors:
            out.append(y[k : k + f.dim])
            k += f.dim
        return out


@dataclass(frozen=True)
class FullSpace(ConvexSetSpec):
    n: int

    @property
    def dim(self) -> int:
        return self.n


@dataclass(frozen=True)
class Empty(ConvexSetSpec):
    n: int

    @property
    def dim(self) -> int:
        return self.n


# ---------------------------------------------------------------------------
# Cone representations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConeRep:
    """Polyhedral cone, as halfspaces {w: ineq w <= 0, eq w = 0} and/or
    generators {nonneg combinations of rays + span of lineality}.

    Either family may be None; `has_halfspace` / `has_generators` flag
    which representations are populated.
    """

    dim: int
    ineq: Optional[np.ndarray] = None
    eq: Optional[np.ndarray] = None
    rays: Optional[np.ndarray] = None
    lineality: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("ineq", "eq", "rays", "lineality"):
            v = getattr(self, name)
            if v is not None:
                v = np.atleast_2d(np.asarray(v, dtype=float))
                if v.size == 0:
                    v = np.zeros((0, self.dim))
                if v.shape[1] != self.dim:
                    raise DimensionMismatch(f"{name} has wrong column count")
                object.__setattr__(self, name, v)

    @property
    def has_halfspace(self) -> bool:
        return self.ineq is not None or self.eq is not None

    @property
    def has_generators(self) -> bool:
        return self.rays is not None or self.lineality is not None

    @staticmethod
    def full(n: int) -> "ConeRep":
        return ConeRep(n, ineq=np.zeros((0, n)), eq=np.zeros((0, n)),
                       lineality=np.eye(n), rays=np.zeros((0, n)))

    @staticmethod
    def zero(n: int) -> "ConeRep":
        return ConeRep(n, ineq=np.zeros((0, n)), eq=np.eye(n),
                       rays=np.zeros((0, n)), lineality=np.zeros((0, n)))

    @staticmethod
    def ray(r: np.ndarray) -> "ConeRep":
        """Single ray R+ * r, with both representations populated."""
        r = as_vector(r)
        n = r.shape[0]
        nr = np.linalg.norm(r)
        if nr == 0:
            return ConeRep.zero(n)
        rhat = r / nr
        comp = _orthogonal_complement(rhat[None, :])
        return ConeRep(n, ineq=-rhat[None, :], eq=comp,
                       rays=rhat[None, :], lineality=np.zeros((0, n)))


@dataclass(frozen=True)
class SocCone:
    """sign * Q in R^dim (sign +1 is the cone itself, -1 its polar)."""

    dim: int
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")


@dataclass(frozen=True)
class ProductCone:
    parts: tuple

    @property
    def dim(self) -> int:
        return sum(p.dim for p in self.parts)

    def split(self, w: np.ndarray) -> list[np.ndarray]:
        out, k = [], 0
        for p in self.parts:
            out.append(w[k : k + p.dim])
            k += p.dim
        return out


@dataclass(frozen=True)
class PullbackCone:
    """{w : matrix @ w in base, extra_eq @ w = 0}."""

    matrix: np.ndarray
    base: Union[ConeRep, SocCone, ProductCone]
    extra_eq: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "matrix", as_matrix(self.matrix))
        if self.extra_eq is not None:
            ee = np.atleast_2d(np.asarray(self.extra_eq, dtype=float))
            object.__setattr__(self, "extra_eq", ee)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


Cone = Union[ConeRep, SocCone, ProductCone, PullbackCone]


def _orthogonal_complement(rows: np.ndarray) -> np.ndarray:
    """Orthonormal basis (as rows) of the orthogonal complement of span(rows)."""
    rows = np.atleast_2d(rows)
    n = rows.shape[1]
    if rows.shape[0] == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(rows, full_matrices=True)
    rank = int(np.sum(s > 1e-12 * max(1.0, s[0] if s.size else 1.0)))
    return vt[rank:]


def _soc_member(y: np.ndarray, sign: int, tol: float) -> bool:
    z = sign * y
    return float(np.linalg.norm(z[:-1])) <= float(z[-1]) + tol


def _nonneg_combination_residual(targets: np.ndarray, rays: np.ndarray,
                                 lineality: np.ndarray) -> float:
    """Distance from a vector to cone{rays} + span{lineality} via NNLS."""
    from scipy.optimize import nnls

    cols = []
    if rays is not None and rays.shape[0]:
        cols.append(rays.T)
    if lineality is not None and lineality.shape[0]:
        cols.append(lineality.T)
        cols.append(-lineality.T)
    if not cols:
        return float(np.linalg.norm(targets))
    m = np.hstack(cols)
    _, res = nnls(m, targets)
    return float(res)


def cone_contains(cone: Cone, w, tol: float = DEFAULT_TOLS.cone_tol) -> bool:
    """Membership test with tolerance scaled per row by (1 + |row||w|)."""
    w = as_vector(w)
    nw = float(np.linalg.norm(w))
    if isinstance(cone, ConeRep):
        if cone.has_halfspace:
            ok = True
            if cone.ineq is not None and cone.ineq.shape[0]:
                rn = np.linalg.norm(cone.ineq, axis=1)
                ok &= bool(np.all(cone.ineq @ w <= tol * (1.0 + rn * nw)))
            if cone.eq is not None and cone.eq.shape[0]:
                rn = np.linalg.norm(cone.eq, axis=1)
                ok &= bool(np.all(np.abs(cone.eq @ w) <= tol * (1.0 + rn * nw)))
            return ok
        res = _nonneg_combination_residual(w, cone.rays, cone.lineality)
        return res <= tol * (1.0 + nw)
    if isinstance(cone, SocCone):
        return _soc_member(w, cone.sign, tol * (1.0 + nw))
    if isinstance(cone, ProductCone):
        return all(cone_contains(p, wi, tol) for p, wi in zip(cone.parts, cone.split(w)))
    if isinstance(cone, PullbackCone):
        if cone.extra_eq is not None and cone.extra_eq.shape[0]:
            rn = np.linalg.norm(cone.extra_eq, axis=1)
            if not np.all(np.abs(cone.extra_eq @ w) <= tol * (1.0 + rn * nw)):
                return False
        return cone_contains(cone.base, cone.matrix @ w, tol)
    raise TypeError(f"not a cone: {cone!r}")


def cone_support(cone: Cone, v, tol: float = DEFAULT_TOLS.cone_tol) -> ExtReal:
    """Support function of a cone: 0 on the polar cone, +inf elsewhere."""
    v = as_vector(v)
    nv = float(np.linalg.norm(v))
    if isinstance(cone, ConeRep):
        if cone.has_halfspace:
            # polar of {Gw<=0, Hw=0} is cone{G rows} + span{H rows}
            res = _nonneg_combination_residual(
                v,
                cone.ineq if cone.ineq is not None else np.zeros((0, cone.dim)),
                cone.eq if cone.eq is not None else np.zeros((0, cone.dim)),
            )
            return ExtReal.finite(0.0) if res <= tol * (1.0 + nv) else POS_INF
        ok = True
        if cone.rays is not None and cone.rays.shape[0]:
            rn = np.linalg.norm(cone.rays, axis=1)
            ok &= bool(np.all(cone.rays @ v <= tol * (1.0 + rn * nv)))
        if cone.lineality is not None and cone.lineality.shape[0]:
            rn = np.linalg.norm(cone.lineality, axis=1)
            ok &= bool(np.all(np.abs(cone.lineality @ v) <= tol * (1.0 + rn * nv)))
        return ExtReal.finite(0.0) if ok else POS_INF
    if isinstance(cone, SocCone):
        # polar of sign*Q is -sign*Q
        inside = _soc_member(v, -cone.sign, tol * (1.0 + nv))
        return ExtReal.finite(0.0) if inside else POS_INF
    if isinstance(cone, ProductCone):
        total = ExtReal.finite(0.0)
        for p, vi in zip(cone.parts, cone.split(v)):
            total = extreal_add(total, cone_support(p, vi, tol))
        return total
    raise UnsupportedGeometry("support of a pullback cone is not computed directly")


def cone_equality_rows(cone: Cone) -> np.ndarray:
    """Rows q with q @ w = 0 implied by the cone (used for sphere sampling)."""
    if isinstance(cone, ConeRep):
        if cone.eq is not None:
            return cone.eq
        if cone.has_generators:
            span = np.vstack([m for m in (cone.rays, cone.lineality) if m is not None])
            return _orthogonal_complement(span)
        return np.zeros((0, cone.dim))
    if isinstance(cone, SocCone):
        return np.zeros((0, cone.dim))
    if isinstance(cone, ProductCone):
        rows, k = [], 0
        for p in cone.parts:
            sub = cone_equality_rows(p)
            wide = np.zeros((sub.shape[0], cone.dim))
            wide[:, k : k + p.dim] = sub
            rows.append(wide)
            k += p.dim
        return np.vstack(rows) if rows else np.zeros((0, cone.dim))
    if isinstance(cone, PullbackCone):
        base_rows = cone_equality_rows(cone.base)
        parts = [base_rows @ cone.matrix] if base_rows.shape[0] else []
        if cone.extra_eq is not None and cone.extra_eq.shape[0]:
            parts.append(cone.extra_eq)
        return np.vstack(parts) if parts else np.zeros((0, cone.dim))
    raise TypeError(f"not a cone: {cone!r}")


def cone_to_set(cone: Cone) -> ConvexSetSpec:
    """View a cone as a ConvexSetSpec where a closed form exists."""
    if isinstance(cone, ConeRep):
        if not cone.has_halfspace:
            raise UnsupportedGeometry("generator-only cone has no halfspace set form")
        g = cone.ineq if cone.ineq is not None else np.zeros((0, cone.dim))
        h = cone.eq if cone.eq is not None else np.zeros((0, cone.dim))
        return Polyhedron(g, np.zeros(g.shape[0]), h, np.zeros(h.shape[0]))
    if isinstance(cone, SocCone):
        if cone.sign == 1:
            return SecondOrderCone(cone.dim)
        raise UnsupportedGeometry("polar second-order cone has no set form here")
    if isinstance(cone, ProductCone):
        return Product(tuple(cone_to_set(p) for p in cone.parts))
    raise UnsupportedGeometry("pullback cone has no direct set form")


# ---------------------------------------------------------------------------
# Second-order tangent sets and reduction data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SecondTangentRep:
    """The set T^2(base, direction), stored as a ConvexSetSpec region."""

    base: np.ndarray
    direction: np.ndarray
    region: ConvexSetSpec

    @property
    def is_empty(self) -> bool:
        return isinstance(self.region, Empty)


@dataclass(frozen=True)
class ReductionData:
    """Local description of a set as {y : h(y) in cone}, with h(base)=0 and
    the jacobian of h at base of full row rank."""

    h_value: callable
    h_jacobian: callable
    h_hessian: callable  # returns (s, m, m) array of second derivative blocks
    cone: ConvexSetSpec
    base: np.ndarray
    rank_tol: float = 1e-8

    def jacobian_at_base(self) -> np.ndarray:
        j = as_matrix(self.h_jacobian(self.base))
        sv = np.linalg.svd(j, compute_uv=False)
        if sv.size == 0 or sv[-1] <= self.rank_tol:
            raise RankDeficient("reduction jacobian is rank deficient at the base point")
        return j


# ---------------------------------------------------------------------------
# Helper: active sets for polyhedra
# ---------------------------------------------------------------------------


def _active_rows(poly: Polyhedron, y: np.ndarray, cone_tol: float) -> np.ndarray:
    if poly.A.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    resid = poly.A @ y - poly.b
    rn = np.linalg.norm(poly.A, axis=1)
    ny = float(np.linalg.norm(y))
    return np.abs(resid) <= cone_tol * (1.0 + rn * ny)


def _require_member(theta: ConvexSetSpec, y: np.ndarray, tols: TolerancePolicy):
    from .convex_subproblems import member

    if not member(theta, y, tols.cone_tol):
        raise PointNotInSet(f"point {y!r} is not in the set within tolerance")


# ---------------------------------------------------------------------------
# Cone computations
# ---------------------------------------------------------------------------


def tangent_cone(theta: ConvexSetSpec, y, tols: TolerancePolicy = DEFAULT_TOLS) -> Cone:
    """Tangent cone to a catalog set at a member point."""
    y = as_vector(y, theta.dim)
    _require_member(theta, y, tols)
    return _tangent_cone_unchecked(theta, y, tols)


def _tangent_cone_unchecked(theta: ConvexSetSpec, y: np.ndarray,
                            tols: TolerancePolicy) -> Cone:
    if isinstance(theta, FullSpace):
        return ConeRep.full(theta.dim)
    if isinstance(theta, Polyhedron):
        act = _active_rows(theta, y, tols.cone_tol)
        return ConeRep(theta.dim, ineq=theta.A[act], eq=theta.E)
    if isinstance(theta, SecondOrderCone):
        m = theta.m
        ny = float(np.linalg.norm(y))
        if ny <= tols.cone_tol:
            return SocCone(m, 1)
        head, tail = y[:-1], y[-1]
        if np.linalg.norm(head) < tail - tols.cone_tol * (1.0 + ny):
            return ConeRep.full(m)
        g = np.concatenate([head / np.linalg.norm(head), [-1.0]])
        return ConeRep(m, ineq=g[None, :], eq=np.zeros((0, m)))
    if isinstance(theta, Product):
        parts = [
            _tangent_cone_unchecked(f, yi, tols)
            for f, yi in zip(theta.factors, theta.split(y))
        ]
        return _merge_product_cone(parts)
    raise UnsupportedGeometry(f"no tangent cone for {type(theta).__name__}")


def _merge_product_cone(parts: list[Cone]) -> Cone:
    """Collapse a product of polyhedral cones into one block ConeRep."""
    if len(parts) == 1:
        return parts[0]
    if all(isinstance(p, ConeRep) for p in parts):
        dims = [p.dim for p in parts]
        total = sum(dims)

        def stack(attr):
            rows, k, seen = [], 0, False
            for p, d in zip(parts, dims):
                block = getattr(p, attr)
                if block is not None:
                    seen = True
                    wide = np.zeros((block.shape[0], total))
                    wide[:, k : k + d] = block
                    rows.append(wide)
                k += d
            if not seen:
                return None
            return np.vstack(rows) if rows else np.zeros((0, total))

        halfspace_ok = all(p.has_halfspace for p in parts)
        generators_ok = all(p.has_generators for p in parts)
        return ConeRep(
            total,
            ineq=stack("ineq") if halfspace_ok else None,
            eq=stack("eq") if halfspace_ok else None,
            rays=stack("rays") if generators_ok else None,
            lineality=stack("lineality") if generators_ok else None,
        )
    return ProductCone(tuple(parts))


def normal_cone(theta: ConvexSetSpec, y, tols: TolerancePolicy = DEFAULT_TOLS) -> Cone:
    """Normal cone (polar of the tangent cone) at a member point."""
    y = as_vector(y, theta.dim)
    _require_member(theta, y, tols)
    return _normal_cone_unchecked(theta, y, tols)


def _normal_cone_unchecked(theta: ConvexSetSpec, y: np.ndarray,
                           tols: TolerancePolicy) -> Cone:
    if isinstance(theta, FullSpace):
        return ConeRep.zero(theta.dim)
    if isinstance(theta, Polyhedron):
        act = _active_rows(theta, y, tols.cone_tol)
        return ConeRep(theta.dim, rays=theta.A[act], lineality=theta.E)
    if isinstance(theta, SecondOrderCone):
        m = theta.m
        ny = float(np.linalg.norm(y))
        if ny <= tols.cone_tol:
            return SocCone(m, -1)
        head, tail = y[:-1], y[-1]
        if np.linalg.norm(head) < tail - tols.cone_tol * (1.0 + ny):
            return ConeRep.zero(m)
        r = np.concatenate([head / np.linalg.norm(head), [-1.0]])
        return ConeRep.ray(r)
    if isinstance(theta, Product):
        parts = [
            _normal_cone_unchecked(f, yi, tols)
            for f, yi in zip(theta.factors, theta.split(y))
        ]
        return _merge_product_cone(parts)
    raise UnsupportedGeometry(f"no normal cone for {type(theta).__name__}")


def normal_cone_generators(theta: ConvexSetSpec, y,
                           tols: TolerancePolicy = DEFAULT_TOLS):
    """(rays, lineality) of the normal cone when it is polyhedral, else None."""
    cone = normal_cone(theta, y, tols)
    if isinstance(cone, ConeRep) and cone.has_generators:
        rays = cone.rays if cone.rays is not None else np.zeros((0, cone.dim))
        lin = cone.lineality if cone.lineality is not None else np.zeros((0, cone.dim))
        return rays, lin
    return None


def critical_cone(theta: ConvexSetSpec, y, lam,
                  tols: TolerancePolicy = DEFAULT_TOLS) -> Cone:
    """Tangent cone intersected with the orthogonal complement of a normal."""
    y = as_vector(y, theta.dim)
    lam = as_vector(lam, theta.dim)
    ncone = normal_cone(theta, y, tols)
    if not cone_contains(ncone, lam, tols.cone_tol):
        raise NotANormal("lambda is not in the normal cone at the base point")
    tcone = tangent_cone(theta, y, tols)
    return _intersect_with_orthogonal(tcone, lam, theta, y, tols)


def _intersect_with_orthogonal(tcone: Cone, lam: np.ndarray,
                               theta: ConvexSetSpec, y: np.ndarray,
                               tols: TolerancePolicy) -> Cone:
    nl = float(np.linalg.norm(lam))
    if nl <= tols.cone_tol:
        return tcone
    if isinstance(tcone, ConeRep):
        if not tcone.has_halfspace:
            raise UnsupportedGeometry("tangent cone lacks halfspace form")
        eq = tcone.eq if tcone.eq is not None else np.zeros((0, tcone.dim))
        return ConeRep(tcone.dim, ineq=tcone.ineq, eq=np.vstack([eq, lam[None, :]]))
    if isinstance(tcone, SocCone) and tcone.sign == 1:
        # K = Q intersect {lam}^perp with lam in -Q
        m = tcone.dim
        head, tail = lam[:-1], lam[-1]
        if np.linalg.norm(head) < -tail - tols.cone_tol * (1.0 + nl):
            return ConeRep.zero(m)  # lam interior to -Q
        return ConeRep.ray(np.concatenate([head, [-tail]]))
    if isinstance(tcone, ProductCone) and isinstance(theta, Product):
        parts = []
        for f, ti, yi, li in zip(theta.factors, tcone.parts, theta.split(y),
                                 _split_like(theta, lam)):
            parts.append(_intersect_with_orthogonal(ti, li, f, yi, tols))
        return _merge_product_cone(parts)
    raise UnsupportedGeometry("unsupported tangent cone kind for critical cone")


def _split_like(theta: Product, v: np.ndarray) -> list[np.ndarray]:
    return theta.split(v)


# ---------------------------------------------------------------------------
# Second-order tangent sets
# ---------------------------------------------------------------------------


def soc_reduction(m: int) -> "ReductionData":
    """Quadratic full-rank reduction of Q^m near a nonzero boundary point:
    Q = {y : (||y'||^2 - y_m^2, -y_m) in R^2_-} locally."""

    def value(y):
        y = as_vector(y, m)
        return np.array([float(y[:-1] @ y[:-1] - y[-1] ** 2), -y[-1]])

    def jacobian(y):
        y = as_vector(y, m)
        j = np.zeros((2, m))
        j[0, :-1] = 2.0 * y[:-1]
        j[0, -1] = -2.0 * y[-1]
        j[1, -1] = -1.0
        return j

    def hessian(y):
        h = np.zeros((2, m, m))
        h[0] = 2.0 * np.eye(m)
        h[0, -1, -1] = -2.0
        return h

    return ReductionData(value, jacobian, hessian, Polyhedron.orthant_nonpos(2),
                         base=np.zeros(m))


def second_tangent(theta: ConvexSetSpec, y, u,
                   tols: TolerancePolicy = DEFAULT_TOLS) -> SecondTangentRep:
    """Second-order tangent set T^2(y, u) for u in the tangent cone."""
    y = as_vector(y, theta.dim)
    u = as_vector(u, theta.dim)
    tcone = tangent_cone(theta, y, tols)
    if not cone_contains(tcone, u, tols.cone_tol):
        raise NotTangent("direction is not tangent at the base point")
    region = _second_tangent_region(theta, y, u, tols)
    return SecondTangentRep(base=y, direction=u, region=region)


def _second_tangent_region(theta: ConvexSetSpec, y: np.ndarray, u: np.ndarray,
                           tols: TolerancePolicy) -> ConvexSetSpec:
    if isinstance(theta, FullSpace):
        return FullSpace(theta.dim)
    if isinstance(theta, Polyhedron):
        act = _active_rows(theta, y, tols.cone_tol)
        if not act.any():
            sub = np.zeros((0, theta.dim))
        else:
            rows = theta.A[act]
            rn = np.linalg.norm(rows, axis=1)
            nu = float(np.linalg.norm(u))
            still = np.abs(rows @ u) <= tols.cone_tol * (1.0 + rn * nu)
            sub = rows[still]
        return Polyhedron(sub, np.zeros(sub.shape[0]), theta.E,
                          np.zeros(theta.E.shape[0]))
    if isinstance(theta, SecondOrderCone):
        m = theta.m
        ny = float(np.linalg.norm(y))
        if ny <= tols.cone_tol:
            # T^2(0, u) = T_Q(u) for the closed cone Q
            return _soc_tangent_as_set(m, u, tols)
        head, tail = y[:-1], y[-1]
        if np.linalg.norm(head) < tail - tols.cone_tol * (1.0 + ny):
            return FullSpace(m)
        # boundary point: route through the quadratic reduction
        red = soc_reduction(m)
        return _reduction_second_tangent_region(red, y, u, tols)
    if isinstance(theta, Product):
        regions = [
            _second_tangent_region(f, yi, ui, tols)
            for f, yi, ui in zip(theta.factors, theta.split(y), theta.split(u))
        ]
        if any(isinstance(r, Empty) for r in regions):
            return Empty(theta.dim)
        return Product(tuple(regions))
    raise UnsupportedGeometry(f"no second tangent for {type(theta).__name__}")


def _soc_tangent_as_set(m: int, u: np.ndarray, tols: TolerancePolicy) -> ConvexSetSpec:
    nu = float(np.linalg.norm(u))
    if nu <= tols.cone_tol:
        return SecondOrderCone(m)
    head, tail = u[:-1], u[-1]
    if np.linalg.norm(head) < tail - tols.cone_tol * (1.0 + nu):
        return FullSpace(m)
    g = np.concatenate([head / np.linalg.norm(head), [-1.0]])
    return Polyhedron.from_inequalities(g[None, :], np.zeros(1))


def _reduction_second_tangent_region(red: ReductionData, y: np.ndarray,
                                     u: np.ndarray,
                                     tols: TolerancePolicy) -> ConvexSetSpec:
    """T^2 through a reduction {y: h(y) in cone}: pull the inner second
    tangent back through the linearization, shifted by the h-curvature."""
    j = as_matrix(red.h_jacobian(y))
    hy = as_vector(red.h_value(y))
    du = j @ u
    inner = _second_tangent_region(red.cone, hy, du, tols)
    hess = np.asarray(red.h_hessian(y), dtype=float)
    curv = np.einsum("kij,i,j->k", hess, u, u)
    return _pullback_region(inner, j, curv)


def _pullback_region(region: ConvexSetSpec, j: np.ndarray,
                     shift: np.ndarray) -> ConvexSetSpec:
    """{z : j z + shift in region} as a ConvexSetSpec, when representable."""
    n = j.shape[1]
    if isinstance(region, FullSpace):
        return FullSpace(n)
    if isinstance(region, Empty):
        return Empty(n)
    if isinstance(region, Polyhedron):
        return Polyhedron(
            region.A @ j, region.b - region.A @ shift,
            region.E @ j, region.e - region.E @ shift,
        )
    raise UnsupportedGeometry("cannot pull a non-polyhedral region back linearly")


# ---------------------------------------------------------------------------
# Second subderivative of the indicator
# ---------------------------------------------------------------------------


def soc_boundary_d2_closed_form(y, lam, u) -> ExtReal:
    """Closed-form value (||lam||/||y||) (||u'||^2 - u_m^2) on the critical
    cone for a nonzero boundary point of Q, +inf off the cone."""
    y = as_vector(y)
    lam = as_vector(lam)
    u = as_vector(u)
    m = y.shape[0]
    theta = SecondOrderCone(m)
    kcone = critical_cone(theta, y, lam)
    if not cone_contains(kcone, u):
        return POS_INF
    ratio = float(np.linalg.norm(lam) / np.linalg.norm(y))
    return ExtReal.finite(ratio * float(u[:-1] @ u[:-1] - u[-1] ** 2))


def d2_indicator(theta: ConvexSetSpec, y, lam, u,
                 tols: TolerancePolicy = DEFAULT_TOLS) -> ExtReal:
    """Second subderivative of the set indicator at y for the normal lam,
    evaluated at u.

    Polyhedra give 0 on the critical cone and +inf off it; the second-order
    cone at a nonzero boundary point carries the extra curvature term,
    computed through the quadratic reduction; products sum componentwise.
    """
    y = as_vector(y, theta.dim)
    lam = as_vector(lam, theta.dim)
    u = as_vector(u, theta.dim)
    _require_member(theta, y, tols)
    ncone = _normal_cone_unchecked(theta, y, tols)
    if not cone_contains(ncone, lam, tols.cone_tol):
        raise NotANormal("lambda is not a normal at the base point")
    return _d2_indicator_unchecked(theta, y, lam, u, tols)


def _d2_indicator_unchecked(theta: ConvexSetSpec, y, lam, u,
                            tols: TolerancePolicy) -> ExtReal:
    if isinstance(theta, (FullSpace, Polyhedron)):
        tcone = _tangent_cone_unchecked(theta, y, tols)
        kcone = _intersect_with_orthogonal(tcone, lam, theta, y, tols)
        return ExtReal.finite(0.0) if cone_contains(kcone, u, tols.cone_tol) else POS_INF
    if isinstance(theta, SecondOrderCone):
        m = theta.m
        ny = float(np.linalg.norm(y))
        if ny <= tols.cone_tol or np.linalg.norm(y[:-1]) < y[-1] - tols.cone_tol * (1.0 + ny):
            tcone = _tangent_cone_unchecked(theta, y, tols)
            kcone = _intersect_with_orthogonal(tcone, lam, theta, y, tols)
            return ExtReal.finite(0.0) if cone_contains(kcone, u, tols.cone_tol) else POS_INF
        red = soc_reduction(m)
        red = ReductionData(red.h_value, red.h_jacobian, red.h_hessian, red.cone, base=y)
        return reduction_second_subderivative(red, lam, u, tols)
    if isinstance(theta, Product):
        total = ExtReal.finite(0.0)
        for f, yi, li, ui in zip(theta.factors, theta.split(np.asarray(y)),
                                 theta.split(np.asarray(lam)),
                                 theta.split(np.asarray(u))):
            total = extreal_add(total, _d2_indicator_unchecked(f, yi, li, ui, tols))
        return total
    raise UnsupportedGeometry(f"no second subderivative for {type(theta).__name__}")


def reduction_second_subderivative(red: ReductionData, lam, w,
                                   tols: TolerancePolicy = DEFAULT_TOLS) -> ExtReal:
    """Second subderivative through a smooth full-rank reduction.

    Solves lam = J^T mu with mu in the normal cone of the reduced cone at
    h(base) (unique by full rank), and returns <mu, D^2 h(base)(w, w)> on
    the critical cone, +inf off it.
    """
    lam = as_vector(lam)
    w = as_vector(w)
    y = as_vector(red.base)
    j = red.jacobian_at_base()
    hy = as_vector(red.h_value(y))
    mu, *_ = np.linalg.lstsq(j.T, lam, rcond=None)
    if np.linalg.norm(j.T @ mu - lam) > tols.eq_tol * (1.0 + np.linalg.norm(lam)):
        raise NotANormal("lambda is not in the range of the reduction jacobian")
    ncone = _normal_cone_unchecked(red.cone, hy, tols)
    if not cone_contains(ncone, mu, tols.cone_tol):
        raise NotANormal("reduced multiplier is not a normal of the reduced cone")
    # critical cone of the reduced system at (y, lam)
    inner_t = _tangent_cone_unchecked(red.cone, hy, tols)
    if isinstance(inner_t, ConeRep) and inner_t.has_halfspace:
        g = inner_t.ineq if inner_t.ineq is not None else np.zeros((0, j.shape[0]))
        h = inner_t.eq if inner_t.eq is not None else np.zeros((0, j.shape[0]))
        kcone = ConeRep(y.shape[0], ineq=g @ j, eq=np.vstack([h @ j, lam[None, :]]))
        ok = cone_contains(kcone, w, tols.cone_tol)
    else:
        ok = cone_contains(inner_t, j @ w, tols.cone_tol) and (
            abs(float(lam @ w)) <= tols.cone_tol * (1.0 + np.linalg.norm(lam) * np.linalg.norm(w))
        )
    if not ok:
        return POS_INF
    hess = np.asarray(red.h_hessian(y), dtype=float)
    curv = np.einsum("kij,i,j->k", hess, w, w)
    return ExtReal.finite(float(mu @ curv))
