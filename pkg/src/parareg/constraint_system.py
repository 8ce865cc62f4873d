"""Constraint systems {x : f(x) in Theta}: smooth maps, chain rules,
multiplier sets, perturbed second-order approximations, and constraint
qualification diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .convex_subproblems import (
    LinearProgram,
    batch_dist_lower,
    dist,
    enumerate_vertices,
    member,
    project,
    solve_lp,
)
from .errors import (
    DimensionMismatch,
    EmptySet,
    InfeasiblePoint,
    NotTangent,
    UnsupportedGeometry,
)
from .numeric_core import (
    DEFAULT_TOLS,
    ExtReal,
    TolerancePolicy,
    as_matrix,
    as_vector,
)
from .set_catalog import (
    Cone,
    ConeRep,
    ConvexSetSpec,
    Empty,
    FullSpace,
    Polyhedron,
    Product,
    ProductCone,
    PullbackCone,
    SecondOrderCone,
    SecondTangentRep,
    SocCone,
    cone_contains,
    normal_cone,
    second_tangent,
    tangent_cone,
)

__all__ = [
    "SmoothMap",
    "ConstraintSystem",
    "BasePoint",
    "MultiplierSet",
    "tangent_cone_omega",
    "critical_cone_omega",
    "multiplier_set",
    "second_tangent_omega",
    "s_w_map",
    "cq_diagnostics",
    "normal_image_distance",
    "restore_feasibility",
    "region_as_polyhedron",
]


# ---------------------------------------------------------------------------
# Smooth maps
# ---------------------------------------------------------------------------

FD_STEP = 1e-5  # central-difference step scale for fallback hessians


@dataclass
class SmoothMap:
    """Twice-differentiable map R^n -> R^m with optional exact polynomial form.

    `polynomial` is a tuple of coordinates, each a tuple of monomials
    (coefficient, exponent-tuple).  When present, evaluators come from
    symbolic differentiation of the monomials; otherwise user callables are
    used and a missing hessian falls back to central finite differences
    (provenance flag `fd_hessian`).
    """

    n: int
    m: int
    value_fn: Callable
    jacobian_fn: Callable
    hessian_fn: Optional[Callable] = None
    polynomial: Optional[tuple] = None

    @property
    def fd_hessian(self) -> bool:
        return self.hessian_fn is None and self.polynomial is None

    def value(self, x) -> np.ndarray:
        return as_vector(self.value_fn(as_vector(x, self.n)), self.m)

    def jacobian(self, x) -> np.ndarray:
        return as_matrix(self.jacobian_fn(as_vector(x, self.n)), (self.m, self.n))

    def hessian(self, x) -> np.ndarray:
        x = as_vector(x, self.n)
        if self.hessian_fn is not None:
            h = np.asarray(self.hessian_fn(x), dtype=float)
            if h.shape != (self.m, self.n, self.n):
                raise DimensionMismatch("hessian callback must return (m, n, n)")
            return h
        step = FD_STEP * (1.0 + float(np.linalg.norm(x)))
        h = np.zeros((self.m, self.n, self.n))
        for j in range(self.n):
            ej = np.zeros(self.n)
            ej[j] = step
            jp = self.jacobian(x + ej)
            jm = self.jacobian(x - ej)
            h[:, :, j] = (jp - jm) / (2.0 * step)
        # symmetrize the finite-difference blocks
        return 0.5 * (h + np.transpose(h, (0, 2, 1)))

    def value_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.polynomial is not None:
            return _poly_value_batch(self.polynomial, X, self.m)
        return np.array([self.value(x) for x in X])

    @staticmethod
    def from_polynomial(n: int, coords) -> "SmoothMap":
        coords = tuple(
            tuple((float(c), tuple(int(p) for p in exps)) for c, exps in coord)
            for coord in coords
        )
        m = len(coords)
        for coord in coords:
            for _, exps in coord:
                if len(exps) != n:
                    raise DimensionMismatch("monomial exponent length != n")

        def value(x):
            x = as_vector(x, n)
            return _poly_value_batch(coords, x[None, :], m)[0]

        def jacobian(x):
            x = as_vector(x, n)
            j = np.zeros((m, n))
            for i, coord in enumerate(coords):
                for c, exps in coord:
                    for k in range(n):
                        if exps[k] == 0:
                            continue
                        term = c * exps[k]
                        for l in range(n):
                            p = exps[l] - (1 if l == k else 0)
                            if p:
                                term *= x[l] ** p
                        j[i, k] += term
            return j

        def hessian(x):
            x = as_vector(x, n)
            h = np.zeros((m, n, n))
            for i, coord in enumerate(coords):
                for c, exps in coord:
                    for k in range(n):
                        if exps[k] == 0:
                            continue
                        for l in range(n):
                            ekl = exps[l] - (1 if l == k else 0)
                            if ekl == 0:
                                continue
                            term = c * exps[k] * ekl
                            for q in range(n):
                                p = exps[q] - (1 if q == k else 0) - (1 if q == l else 0)
                                if p:
                                    term *= x[q] ** p
                            h[i, k, l] += term
            return h

        return SmoothMap(n, m, value, jacobian, hessian, polynomial=coords)

    @staticmethod
    def identity(n: int) -> "SmoothMap":
        coords = tuple(
            ((1.0, tuple(1 if j == i else 0 for j in range(n))),) for i in range(n)
        )
        return SmoothMap.from_polynomial(n, coords)

    @staticmethod
    def linear(matrix) -> "SmoothMap":
        matrix = as_matrix(matrix)
        m, n = matrix.shape
        coords = []
        for i in range(m):
            coord = [
                (float(matrix[i, j]), tuple(1 if k == j else 0 for k in range(n)))
                for j in range(n)
                if matrix[i, j] != 0.0
            ]
            coords.append(tuple(coord) or ((0.0, tuple(0 for _ in range(n))),))
        return SmoothMap.from_polynomial(n, tuple(coords))


def _poly_value_batch(coords, X: np.ndarray, m: int) -> np.ndarray:
    X = np.atleast_2d(X)
    out = np.zeros((X.shape[0], m))
    for i, coord in enumerate(coords):
        for c, exps in coord:
            term = np.full(X.shape[0], c)
            for k, p in enumerate(exps):
                if p:
                    term = term * X[:, k] ** p
            out[:, i] += term
    return out


@dataclass
class ConstraintSystem:
    f: SmoothMap
    theta: ConvexSetSpec

    def __post_init__(self):
        if self.f.m != self.theta.dim:
            raise DimensionMismatch("f output dim != theta ambient dim")

    @property
    def n(self) -> int:
        return self.f.n

    @property
    def m(self) -> int:
        return self.f.m


@dataclass
class BasePoint:
    """Feasible base pair (x, v) with cached derivatives of f at x."""

    cs: ConstraintSystem
    x: np.ndarray
    v: np.ndarray
    kappa_override: Optional[float] = None
    tols: TolerancePolicy = DEFAULT_TOLS
    fx: np.ndarray = field(init=False)
    jac: np.ndarray = field(init=False)
    hess: np.ndarray = field(init=False)
    _kappa_cache: Optional[float] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.x = as_vector(self.x, self.cs.n)
        self.v = as_vector(self.v, self.cs.n)
        self.fx = self.cs.f.value(self.x)
        if not member(self.cs.theta, self.fx, self.tols.cone_tol):
            raise InfeasiblePoint("f(x) is not in theta within tolerance")
        self.jac = self.cs.f.jacobian(self.x)
        self.hess = self.cs.f.hessian(self.x)

    def hess_quadratic(self, w: np.ndarray) -> np.ndarray:
        """The m-vector D^2 f(x)(w, w)."""
        w = as_vector(w, self.cs.n)
        return np.einsum("kij,i,j->k", self.hess, w, w)

    def kappa(self) -> float:
        """Metric-subregularity modulus: user override or a cached sampled
        estimate (never a certificate)."""
        if self.kappa_override is not None:
            return float(self.kappa_override)
        if self._kappa_cache is None:
            est, unbounded = _mscq_sample(self.cs, self.x, radii=(1e-1, 1e-2, 1e-3),
                                          samples=40, seed=1234, tols=self.tols)
            self._kappa_cache = 1e6 if unbounded else max(est, 1.0)
        return self._kappa_cache


# ---------------------------------------------------------------------------
# First- and second-order pullback cones
# ---------------------------------------------------------------------------


def tangent_cone_omega(cs: ConstraintSystem, bp: BasePoint,
                       tols: TolerancePolicy = DEFAULT_TOLS) -> Cone:
    """Pullback tangent cone {w: Df(x) w in T_theta(f(x))} (under the
    metric subregularity qualification, declared by the caller)."""
    t_theta = tangent_cone(cs.theta, bp.fx, tols)
    return _pullback_cone(t_theta, bp.jac)


def critical_cone_omega(cs: ConstraintSystem, bp: BasePoint,
                        tols: TolerancePolicy = DEFAULT_TOLS) -> Cone:
    """{w: Df(x) w in T_theta(f(x)), <v, w> = 0}."""
    t_theta = tangent_cone(cs.theta, bp.fx, tols)
    nv = float(np.linalg.norm(bp.v))
    if nv <= tols.cone_tol:
        return _pullback_cone(t_theta, bp.jac)
    row = bp.v[None, :]
    if isinstance(t_theta, ConeRep) and t_theta.has_halfspace:
        g = t_theta.ineq if t_theta.ineq is not None else np.zeros((0, cs.m))
        h = t_theta.eq if t_theta.eq is not None else np.zeros((0, cs.m))
        return ConeRep(cs.n, ineq=g @ bp.jac, eq=np.vstack([h @ bp.jac, row]))
    return PullbackCone(bp.jac, t_theta, extra_eq=row)


def _pullback_cone(base: Cone, j: np.ndarray) -> Cone:
    if isinstance(base, ConeRep) and base.has_halfspace:
        g = base.ineq if base.ineq is not None else np.zeros((0, j.shape[0]))
        h = base.eq if base.eq is not None else np.zeros((0, j.shape[0]))
        return ConeRep(j.shape[1], ineq=g @ j, eq=h @ j)
    return PullbackCone(j, base)


def region_as_polyhedron(region: ConvexSetSpec) -> Optional[Polyhedron]:
    """Flatten a region into one Polyhedron when it is polyhedral."""
    if isinstance(region, Polyhedron):
        return region
    if isinstance(region, FullSpace):
        n = region.dim
        return Polyhedron(np.zeros((0, n)), np.zeros(0), np.zeros((0, n)), np.zeros(0))
    if isinstance(region, Product):
        blocks = [region_as_polyhedron(f) for f in region.factors]
        if any(b is None for b in blocks):
            return None
        n = region.dim
        a_rows, b_rhs, e_rows, e_rhs = [], [], [], []
        k = 0
        for f, blk in zip(region.factors, blocks):
            d = f.dim
            if blk.A.shape[0]:
                wide = np.zeros((blk.A.shape[0], n))
                wide[:, k : k + d] = blk.A
                a_rows.append(wide)
                b_rhs.append(blk.b)
            if blk.E.shape[0]:
                wide = np.zeros((blk.E.shape[0], n))
                wide[:, k : k + d] = blk.E
                e_rows.append(wide)
                e_rhs.append(blk.e)
            k += d
        A = np.vstack(a_rows) if a_rows else np.zeros((0, n))
        b = np.concatenate(b_rhs) if b_rhs else np.zeros(0)
        E = np.vstack(e_rows) if e_rows else np.zeros((0, n))
        e = np.concatenate(e_rhs) if e_rhs else np.zeros(0)
        return Polyhedron(A, b, E, e)
    return None


def s_w_map(cs: ConstraintSystem, bp: BasePoint, w, p,
            tols: TolerancePolicy = DEFAULT_TOLS) -> SecondTangentRep:
    """Perturbed second-order approximation
    {u : Df(x)u + D^2 f(x)(w,w) + p in T^2_theta(f(x), Df(x) w)}."""
    w = as_vector(w, cs.n)
    p = as_vector(p, cs.m)
    t_omega = tangent_cone_omega(cs, bp, tols)
    if not cone_contains(t_omega, w, tols.cone_tol):
        raise NotTangent("direction w is not tangent to the constraint system")
    inner = second_tangent(cs.theta, bp.fx, bp.jac @ w, tols)
    shift = bp.hess_quadratic(w) + p
    region = _pullback_region_general(inner.region, bp.jac, shift, cs.n)
    return SecondTangentRep(base=bp.x, direction=w, region=region)


def second_tangent_omega(cs: ConstraintSystem, bp: BasePoint, w,
                         tols: TolerancePolicy = DEFAULT_TOLS) -> SecondTangentRep:
    """Second-order tangent set of the constraint system via the chain rule;
    nonemptiness is verified with one LP feasibility call."""
    rep = s_w_map(cs, bp, w, np.zeros(cs.m), tols)
    poly = region_as_polyhedron(rep.region)
    if poly is not None and poly.A.shape[1]:
        res = solve_lp(LinearProgram(np.zeros(poly.dim), A_ub=poly.A, b_ub=poly.b,
                                     A_eq=poly.E, b_eq=poly.e), tols)
        if res.status == "infeasible":
            raise EmptySet("second-order tangent set is empty; "
                           "parabolic derivability assumptions do not hold here")
    return rep


def _pullback_region_general(region: ConvexSetSpec, j: np.ndarray,
                             shift: np.ndarray, n: int) -> ConvexSetSpec:
    poly = region_as_polyhedron(region)
    if poly is not None:
        return Polyhedron(poly.A @ j, poly.b - poly.A @ shift,
                          poly.E @ j, poly.e - poly.E @ shift)
    if isinstance(region, Empty):
        return Empty(n)
    if isinstance(region, SecondOrderCone) and j.shape[0] == j.shape[1] == n \
            and np.allclose(j, np.eye(n)) and np.linalg.norm(shift) == 0.0:
        return region
    raise UnsupportedGeometry(
        "second-order tangent region is a cone preimage the dense LP layer "
        "cannot represent (second-order cone under a nontrivial linear map)")


# ---------------------------------------------------------------------------
# Multiplier sets
# ---------------------------------------------------------------------------


@dataclass
class MultiplierSet:
    """Lagrange multipliers {lam in N_theta(f(x)): Df(x)^T lam = v}.

    kind is one of:
      empty      -- no multiplier
      singleton  -- exactly one multiplier `lam0`
      ray        -- {t * direction : t >= 0} (v = 0 with the ray in the kernel)
      polyhedral -- lam = lam_map @ z over {z: z_i >= 0 (nonneg), A_eq z = b_eq}
      conic      -- slice of a non-polyhedral normal cone (SOC vertex)
    """

    kind: str
    m: int
    lam0: Optional[np.ndarray] = None
    direction: Optional[np.ndarray] = None
    lam_map: Optional[np.ndarray] = None
    nonneg: Optional[np.ndarray] = None
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    cone: Optional[Cone] = None
    jac: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    face_rows: Optional[np.ndarray] = None  # extra equalities F z = f_rhs
    face_rhs: Optional[np.ndarray] = None

    @property
    def is_empty(self) -> bool:
        return self.kind == "empty"

    def an_element(self, tols: TolerancePolicy = DEFAULT_TOLS) -> Optional[np.ndarray]:
        if self.kind == "empty":
            return None
        if self.kind == "singleton":
            return self.lam0.copy()
        if self.kind == "ray":
            return np.zeros(self.m) if self.lam0 is None else self.lam0.copy()
        if self.kind == "polyhedral":
            res = self._solve(np.zeros(self.lam_map.shape[1]), maximize=False, tols=tols)
            if res.status != "optimal":
                return None
            return self.lam_map @ res.x
        if self.kind == "conic":
            lam = _conic_slice_element(self.cone, self.jac, self.v, tols)
            return lam
        return None

    def _solve(self, cz: np.ndarray, maximize: bool,
               tols: TolerancePolicy, extra_box: Optional[float] = None):
        k = self.lam_map.shape[1]
        lower = np.where(self.nonneg, 0.0, -np.inf)
        A_eq, b_eq = self.A_eq, self.b_eq
        if self.face_rows is not None and self.face_rows.shape[0]:
            A_eq = np.vstack([A_eq, self.face_rows])
            b_eq = np.concatenate([b_eq, self.face_rhs])
        A_ub = None
        b_ub = None
        if extra_box is not None:
            A_ub = np.vstack([self.lam_map, -self.lam_map])
            b_ub = np.full(2 * self.m, extra_box)
        return solve_lp(LinearProgram(cz, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq,
                                      b_eq=b_eq, maximize=maximize, lower=lower), tols)

    def maximize_inner(self, h: np.ndarray,
                       tols: TolerancePolicy = DEFAULT_TOLS):
        """max <lam, h> over the set; returns (ExtReal value, argmax lam or
        None, argmax z or None)."""
        from .numeric_core import NEG_INF, POS_INF

        h = as_vector(h, self.m)
        if self.kind == "empty":
            return NEG_INF, None, None
        if self.kind == "singleton":
            return ExtReal.finite(float(self.lam0 @ h)), self.lam0.copy(), None
        if self.kind == "ray":
            slope = float(self.direction @ h)
            if slope > 1e-14:
                return POS_INF, None, None
            return ExtReal.finite(0.0), np.zeros(self.m), None
        if self.kind == "polyhedral":
            res = self._solve(self.lam_map.T @ h, maximize=True, tols=tols)
            if res.status == "infeasible":
                return NEG_INF, None, None
            if res.status == "unbounded":
                return POS_INF, None, None
            return res.value, self.lam_map @ res.x, res.x
        raise UnsupportedGeometry("linear maximization over a conic slice "
                                  "requires the supergradient routine")

    def with_face(self, h: np.ndarray, opt: float) -> "MultiplierSet":
        """Restrict a polyhedral set to the face {<lam, h> = opt}."""
        if self.kind != "polyhedral":
            return self
        row = (self.lam_map.T @ h)[None, :]
        rows = row if self.face_rows is None else np.vstack([self.face_rows, row])
        rhs = np.array([opt]) if self.face_rhs is None else np.concatenate(
            [self.face_rhs, [opt]])
        return MultiplierSet(kind="polyhedral", m=self.m, lam_map=self.lam_map,
                             nonneg=self.nonneg, A_eq=self.A_eq, b_eq=self.b_eq,
                             face_rows=rows, face_rhs=rhs)

    def vertices(self, radius: float, tols: TolerancePolicy = DEFAULT_TOLS) -> np.ndarray:
        """Vertices of the (face-restricted) set intersected with the box
        ||lam||_inf <= radius, mapped to lambda space."""
        if self.kind == "empty":
            return np.zeros((0, self.m))
        if self.kind == "singleton":
            return self.lam0[None, :]
        if self.kind == "ray":
            pts = [np.zeros(self.m)]
            nd = float(np.linalg.norm(self.direction, ord=np.inf))
            if nd > 0:
                pts.append((radius / nd) * self.direction)
            return np.array(pts)
        if self.kind != "polyhedral":
            raise UnsupportedGeometry("vertex enumeration needs a polyhedral set")
        k = self.lam_map.shape[1]
        box = np.vstack([self.lam_map, -self.lam_map])
        box_rhs = np.full(2 * self.m, radius)
        sign_rows = -np.eye(k)[np.asarray(self.nonneg, dtype=bool)]
        A_ub = np.vstack([box, sign_rows]) if sign_rows.size else box
        b_ub = np.concatenate([box_rhs, np.zeros(sign_rows.shape[0])]) if sign_rows.size else box_rhs
        A_eq, b_eq = self.A_eq, self.b_eq
        if self.face_rows is not None and self.face_rows.shape[0]:
            A_eq = np.vstack([A_eq, self.face_rows])
            b_eq = np.concatenate([b_eq, self.face_rhs])
        zs = enumerate_vertices(A_ub, b_ub, A_eq, b_eq, tol=1e-8)
        if zs.shape[0] == 0:
            el = self.an_element(tols)
            return el[None, :] if el is not None else np.zeros((0, self.m))
        lams = zs @ self.lam_map.T
        out = []
        for lam in lams:
            if not any(np.linalg.norm(lam - q) <= 1e-9 * (1 + np.linalg.norm(lam)) for q in out):
                out.append(lam)
        return np.array(out)

    def sample(self, count: int, radius: float, rng: np.random.Generator,
               tols: TolerancePolicy = DEFAULT_TOLS) -> np.ndarray:
        """Vertices plus random convex combinations (for face searches)."""
        verts = self.vertices(radius, tols)
        if verts.shape[0] <= 1 or count <= 0:
            return verts
        weights = rng.dirichlet(np.ones(verts.shape[0]), size=count)
        return np.vstack([verts, weights @ verts])


def _conic_slice_element(cone: Cone, jac: np.ndarray, v: np.ndarray,
                         tols: TolerancePolicy) -> Optional[np.ndarray]:
    """A point of {lam in cone: J^T lam = v} via alternating projections."""
    lam, *_ = np.linalg.lstsq(jac.T, v, rcond=None)
    for _ in range(500):
        lam = _project_cone(cone, lam)
        resid = jac.T @ lam - v
        if np.linalg.norm(resid) <= tols.eq_tol * (1.0 + np.linalg.norm(v)):
            if _cone_member(cone, lam, tols):
                return lam
        corr, *_ = np.linalg.lstsq(jac.T, resid, rcond=None)
        lam = lam - corr
    resid = jac.T @ lam - v
    if np.linalg.norm(resid) <= 1e-6 * (1.0 + np.linalg.norm(v)) and \
            _cone_member(cone, lam, tols):
        return lam
    return None


def _project_cone(cone: Cone, y: np.ndarray) -> np.ndarray:
    from .convex_subproblems import soc_project

    if isinstance(cone, SocCone):
        return soc_project(cone.sign * y) * cone.sign
    if isinstance(cone, ConeRep) and cone.has_halfspace:
        g = cone.ineq if cone.ineq is not None else np.zeros((0, cone.dim))
        h = cone.eq if cone.eq is not None else np.zeros((0, cone.dim))
        return project(Polyhedron(g, np.zeros(g.shape[0]), h, np.zeros(h.shape[0])), y)
    if isinstance(cone, ProductCone):
        return np.concatenate([_project_cone(p, yi)
                               for p, yi in zip(cone.parts, cone.split(y))])
    raise UnsupportedGeometry("no projection for this cone representation")


def _cone_member(cone: Cone, lam: np.ndarray, tols: TolerancePolicy) -> bool:
    return cone_contains(cone, lam, tols.cone_tol)


def multiplier_set(cs: ConstraintSystem, bp: BasePoint,
                   tols: TolerancePolicy = DEFAULT_TOLS) -> MultiplierSet:
    """Exact parametric description of the multiplier set at (x, v)."""
    ncone = normal_cone(cs.theta, bp.fx, tols)
    jac, v = bp.jac, bp.v
    m = cs.m
    if isinstance(ncone, ConeRep) and ncone.has_generators:
        rays = ncone.rays if ncone.rays is not None else np.zeros((0, m))
        lin = ncone.lineality if ncone.lineality is not None else np.zeros((0, m))
        if rays.shape[0] == 1 and lin.shape[0] == 0:
            return _ray_multiplier_set(rays[0], jac, v, m, tols)
        lam_map = np.vstack([rays, lin]).T  # (m, k)
        if lam_map.shape[1] == 0:
            if np.linalg.norm(v) <= tols.eq_tol:
                return MultiplierSet("singleton", m, lam0=np.zeros(m))
            return MultiplierSet("empty", m)
        nonneg = np.array([True] * rays.shape[0] + [False] * lin.shape[0])
        A_eq = jac.T @ lam_map
        ms = MultiplierSet("polyhedral", m, lam_map=lam_map, nonneg=nonneg,
                           A_eq=A_eq, b_eq=v.copy())
        probe = ms.an_element(tols)
        if probe is None:
            return MultiplierSet("empty", m)
        return ms
    if isinstance(ncone, (SocCone, ProductCone)):
        # try the square-invertible shortcut before keeping a conic slice
        if jac.shape[0] == jac.shape[1]:
            try:
                lam = np.linalg.solve(jac.T, v)
            except np.linalg.LinAlgError:
                lam = None
            if lam is not None:
                if _cone_member(ncone, lam, tols):
                    return MultiplierSet("singleton", m, lam0=lam)
                return MultiplierSet("empty", m)
        el = _conic_slice_element(ncone, jac, v, tols)
        if el is None:
            return MultiplierSet("empty", m)
        return MultiplierSet("conic", m, lam0=el, cone=ncone, jac=jac, v=v.copy())
    raise UnsupportedGeometry("normal cone lacks a generator description")


def _ray_multiplier_set(r: np.ndarray, jac: np.ndarray, v: np.ndarray, m: int,
                        tols: TolerancePolicy) -> MultiplierSet:
    """Closed-form multipliers when the normal cone is a single ray."""
    a = jac.T @ r
    na = float(np.linalg.norm(a))
    nv = float(np.linalg.norm(v))
    if na <= tols.eq_tol:
        if nv <= tols.eq_tol:
            return MultiplierSet("ray", m, lam0=np.zeros(m), direction=r.copy())
        return MultiplierSet("empty", m)
    t = float(a @ v) / (na * na)
    if t < -tols.eq_tol or np.linalg.norm(t * a - v) > tols.eq_tol * (1.0 + nv):
        return MultiplierSet("empty", m)
    return MultiplierSet("singleton", m, lam0=max(t, 0.0) * r)


def normal_image_distance(cs: ConstraintSystem, bp: BasePoint, vec,
                          tols: TolerancePolicy = DEFAULT_TOLS) -> float:
    """dist(vec; Df(x)^T N_theta(f(x)))."""
    from scipy.optimize import nnls

    vec = as_vector(vec, cs.n)
    ncone = normal_cone(cs.theta, bp.fx, tols)
    if isinstance(ncone, ConeRep) and ncone.has_generators:
        rays = ncone.rays if ncone.rays is not None else np.zeros((0, cs.m))
        lin = ncone.lineality if ncone.lineality is not None else np.zeros((0, cs.m))
        cols = []
        if rays.shape[0]:
            cols.append(bp.jac.T @ rays.T)
        if lin.shape[0]:
            cols.append(bp.jac.T @ lin.T)
            cols.append(-(bp.jac.T @ lin.T))
        if not cols:
            return float(np.linalg.norm(vec))
        _, res = nnls(np.hstack(cols), vec)
        return float(res)
    # conic normal cone: projected alternating descent on ||J^T lam - vec||
    lam, *_ = np.linalg.lstsq(bp.jac.T, vec, rcond=None)
    lam = _project_cone(ncone, lam)
    best = float(np.linalg.norm(bp.jac.T @ lam - vec))
    step = 1.0 / max(np.linalg.norm(bp.jac, 2) ** 2, 1e-12)
    for _ in range(500):
        grad = bp.jac @ (bp.jac.T @ lam - vec)
        lam = _project_cone(ncone, lam - step * grad)
        cur = float(np.linalg.norm(bp.jac.T @ lam - vec))
        best = min(best, cur)
    return best


# ---------------------------------------------------------------------------
# Feasibility restoration and CQ diagnostics
# ---------------------------------------------------------------------------


def restore_feasibility(cs: ConstraintSystem, x0: np.ndarray, max_iter: int = 25,
                        tols: TolerancePolicy = DEFAULT_TOLS,
                        target: Optional[float] = None) -> np.ndarray:
    """Gauss-Newton feasibility restoration toward {x: f(x) in theta}."""
    x = as_vector(x0, cs.n).copy()
    goal = tols.cone_tol if target is None else target
    for _ in range(max_iter):
        fx = cs.f.value(x)
        px = project(cs.theta, fx, tols)
        resid = fx - px
        if np.linalg.norm(resid) <= goal:
            return x
        j = cs.f.jacobian(x)
        step, *_ = np.linalg.lstsq(j, resid, rcond=None)
        x = x - step
    return x


def _mscq_sample(cs: ConstraintSystem, xbar: np.ndarray, radii, samples: int,
                 seed: int, tols: TolerancePolicy):
    """Sampled ratio dist(x;Omega)/dist(f(x);Theta) near xbar."""
    rng = np.random.default_rng(seed)
    n = cs.n
    worst = 0.0
    per_radius = []
    for r in radii:
        dirs = rng.standard_normal((samples, n))
        norms = np.linalg.norm(dirs, axis=1, keepdims=True)
        dirs = dirs / np.maximum(norms, 1e-12)
        X = xbar[None, :] + r * dirs
        fX = cs.f.value_batch(X)
        level_worst = 0.0
        for x, fx in zip(X, fX):
            df = dist(cs.theta, fx, tols)
            if df <= 1e-15:
                continue  # effectively feasible; ratio undefined
            z = restore_feasibility(cs, x, max_iter=30, tols=tols,
                                    target=min(1e-12, 1e-6 * df))
            fz = cs.f.value(z)
            if dist(cs.theta, fz, tols) > max(1e-10, 1e-3 * df):
                continue  # restoration failed; skip sample
            ratio = float(np.linalg.norm(z - x)) / df
            level_worst = max(level_worst, ratio)
        per_radius.append(level_worst)
        worst = max(worst, level_worst)
    unbounded = bool(per_radius and per_radius[-1] > 1e6)
    return worst, unbounded


def cq_diagnostics(cs: ConstraintSystem, bp: BasePoint,
                   radii=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7),
                   samples: int = 60, seed: int = 0,
                   tols: TolerancePolicy = DEFAULT_TOLS) -> dict:
    """Constraint-qualification diagnostics at the base point.

    `mrcq` asks whether the normal cone of theta at f(x) meets the kernel of
    Df(x)^T only at the origin (decided exactly for polyhedral normal cones,
    by a small trust-region solve for the second-order-cone vertex).
    `mscq_estimate` is the sampled modulus, flagged unbounded when the ratio
    blows past 1e6 along the refining radii.
    """
    ncone = normal_cone(cs.theta, bp.fx, tols)
    mrcq = _mrcq_exact(ncone, bp.jac, cs.m, tols)
    est, unbounded = _mscq_sample(cs, bp.x, radii, samples, seed, tols)
    return {
        "mrcq": mrcq,
        "mscq_estimate": None if unbounded else est,
        "mscq_unbounded": unbounded,
    }


def _mrcq_exact(ncone: Cone, jac: np.ndarray, m: int, tols: TolerancePolicy) -> bool:
    if isinstance(ncone, ConeRep) and ncone.has_generators:
        rays = ncone.rays if ncone.rays is not None else np.zeros((0, m))
        lin = ncone.lineality if ncone.lineality is not None else np.zeros((0, m))
        gens = np.vstack([rays, lin, -lin])
        if gens.shape[0] == 0:
            return True
        k = gens.shape[0]
        lam_map = gens.T  # (m, k), z >= 0
        A_eq = jac.T @ lam_map
        for j in range(m):
            for s in (1.0, -1.0):
                # max s*lam_j subject to lam in cone, J^T lam = 0, s*lam_j <= 1
                c = s * lam_map[j]
                res = solve_lp(LinearProgram(
                    c, A_ub=c[None, :], b_ub=np.ones(1),
                    A_eq=A_eq, b_eq=np.zeros(jac.shape[1]),
                    maximize=True, nonneg=True), tols)
                if res.status == "unbounded" or (
                        res.optimal and res.value.as_float() > 0.5):
                    return False
        return True
    if isinstance(ncone, SocCone):
        # nonzero lam in sign*Q with J^T lam = 0 iff the normalized slice
        # {(z, sign): ||z|| <= 1} meets the kernel
        B = jac.T  # (n, m)
        Bz = B[:, :-1]
        g = float(ncone.sign) * B[:, -1]
        # min over ||z||<=1 of ||Bz z + sign*b_m||^2
        val = _min_quadratic_unit_ball(Bz.T @ Bz, Bz.T @ g, float(g @ g))
        return val > (10 * tols.eq_tol) ** 2
    raise UnsupportedGeometry("MRCQ test unsupported for this normal cone kind")


def _min_quadratic_unit_ball(B: np.ndarray, g: np.ndarray, c: float) -> float:
    """Exact min of z^T B z + 2 g^T z + c over the unit ball (trust region)."""
    w, V = np.linalg.eigh(B)
    gbar = V.T @ g
    # interior candidate
    if w.min() > 1e-14:
        z = -gbar / w
        if np.linalg.norm(z) <= 1.0:
            return float(z @ (w * z) + 2 * gbar @ z + c)
    # boundary: solve sum (gbar_i / (w_i + mu))^2 = 1 for mu > -w.min()
    lo = max(0.0, -w.min()) + 1e-14
    hi = lo + max(1.0, np.linalg.norm(gbar)) * 2
    def norm_at(mu):
        return float(np.sum((gbar / (w + mu)) ** 2))
    while norm_at(hi) > 1.0:
        hi *= 2
        if hi > 1e16:
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if norm_at(mid) > 1.0:
            lo = mid
        else:
            hi = mid
    mu = 0.5 * (lo + hi)
    z = -gbar / (w + mu)
    nz = np.linalg.norm(z)
    if nz > 0:
        z = z / max(nz, 1.0)
    return float(z @ (w * z) + 2 * gbar @ z + c)
