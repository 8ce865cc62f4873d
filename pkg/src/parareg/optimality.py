"""Constrained problems min phi(x) s.t. f(x) in theta: KKT residuals,
no-gap second-order conditions, the best growth modulus, sampled quadratic
growth, and strong metric subregularity of the subgradient map.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .constraint_system import (
    BasePoint,
    ConstraintSystem,
    MultiplierSet,
    SmoothMap,
    critical_cone_omega,
    multiplier_set,
    normal_image_distance,
    restore_feasibility,
)
from .convex_subproblems import batch_feasible, member
from .errors import InfeasiblePoint, KktViolated, NoMultipliers, UnsupportedGeometry
from .numeric_core import DEFAULT_TOLS, TolerancePolicy, as_vector
from .second_subderivative import dual_value
from .set_catalog import (
    Cone,
    FullSpace,
    Polyhedron,
    Product,
    PullbackCone,
    SecondOrderCone,
    cone_contains,
    cone_equality_rows,
    critical_cone,
    _orthogonal_complement,
)

__all__ = [
    "OptProblem",
    "OptimalityCertificate",
    "GrowthReport",
    "kkt_check",
    "second_order_conditions",
    "growth_sample",
    "sufficient_without_cq",
    "strong_subregularity_check",
    "curvature_quadratics",
    "sample_cone_sphere",
]


@dataclass
class OptProblem:
    phi: SmoothMap  # scalar objective (m == 1)
    cs: ConstraintSystem

    def __post_init__(self):
        if self.phi.m != 1:
            raise UnsupportedGeometry("objective must be scalar valued")
        if self.phi.n != self.cs.n:
            raise UnsupportedGeometry("objective and constraints disagree on n")

    def phi_value(self, x) -> float:
        return float(self.phi.value(x)[0])

    def phi_grad(self, x) -> np.ndarray:
        return self.phi.jacobian(x)[0]

    def phi_hess(self, x) -> np.ndarray:
        return self.phi.hessian(x)[0]

    def phi_batch(self, X) -> np.ndarray:
        return self.phi.value_batch(X)[:, 0]


@dataclass
class OptimalityCertificate:
    necessary_holds: bool
    sufficient_holds: bool
    ell_hat: float
    worst_direction: Optional[np.ndarray]
    method: str  # exact_small_dim | sampled | vacuous


@dataclass
class GrowthReport:
    ell: float
    eps: float
    sample_count: int
    violations: list
    largest_passing_ell: float
    seed: int

    @property
    def holds(self) -> bool:
        return not self.violations


def kkt_check(p: OptProblem, x, tols: TolerancePolicy = DEFAULT_TOLS) -> dict:
    """First-order check: v = -grad phi, the multiplier set at (x, v), and
    the distance of v to the image of the normal cone."""
    x = as_vector(x, p.cs.n)
    if not member(p.cs.theta, p.cs.f.value(x), tols.cone_tol):
        raise InfeasiblePoint("x is not feasible")
    v = -p.phi_grad(x)
    bp = BasePoint(p.cs, x, v, tols=tols)
    ms = multiplier_set(p.cs, bp, tols)
    residual = normal_image_distance(p.cs, bp, v, tols)
    return {"v": v, "multiplier_set": ms, "residual": residual, "base_point": bp}


# ---------------------------------------------------------------------------
# Compiled quadratic forms for the curvature objective
# ---------------------------------------------------------------------------


def _soc_curvature_blocks(theta, fx, lam, tols) -> Optional[np.ndarray]:
    """Curvature matrix C with d2 indicator term = <C u, u> on the critical
    cone (zero for polyhedra, the scaled (I, -1) form on SOC boundaries);
    None when the set carries no such quadratic representation."""
    if isinstance(theta, (Polyhedron, FullSpace)):
        return np.zeros((theta.dim, theta.dim))
    if isinstance(theta, SecondOrderCone):
        m = theta.m
        ny = float(np.linalg.norm(fx))
        if ny <= tols.cone_tol:
            return np.zeros((m, m))
        head, tail = fx[:-1], fx[-1]
        if np.linalg.norm(head) < tail - tols.cone_tol * (1.0 + ny):
            return np.zeros((m, m))
        c = float(np.linalg.norm(lam) / ny)
        d = np.eye(m)
        d[-1, -1] = -1.0
        return c * d
    if isinstance(theta, Product):
        blocks = []
        k = 0
        out = np.zeros((theta.dim, theta.dim))
        for f in theta.factors:
            sub = _soc_curvature_blocks(f, fx[k : k + f.dim], lam[k : k + f.dim], tols)
            if sub is None:
                return None
            out[k : k + f.dim, k : k + f.dim] = sub
            k += f.dim
        return out
    return None


def curvature_quadratics(p: OptProblem, bp: BasePoint, ms: MultiplierSet,
                         tols: TolerancePolicy = DEFAULT_TOLS) -> Optional[list]:
    """Quadratic forms M_i with Q(w) = max_i w^T M_i w on the critical cone.

    One matrix per multiplier-set vertex: Hessian of the Lagrangian plus the
    pulled-back second-order-cone curvature.  None when the multiplier set
    is not polyhedral (SOC-vertex slices need the ascent path)."""
    hphi = p.phi_hess(bp.x)
    radius = 10.0 * (1.0 + bp.kappa() * float(np.linalg.norm(bp.v)))

    def matrix_for(lam):
        m = hphi + np.einsum("kij,k->ij", bp.hess, lam)
        cmat = _soc_curvature_blocks(p.cs.theta, bp.fx, lam, tols)
        if cmat is None:
            return None
        return m + bp.jac.T @ cmat @ bp.jac

    if ms.kind in ("singleton", "ray"):
        lam = ms.lam0 if ms.kind == "singleton" else np.zeros(ms.m)
        mat = matrix_for(lam)
        mats = [mat] if mat is not None else None
        if ms.kind == "ray":
            # positive multiples of the ray may add curvature; objective is
            # linear in t, so the max sits at t = 0 or grows without bound.
            far = matrix_for(ms.direction * radius)
            if far is not None and mats is not None:
                mats.append(far)
        return mats
    if ms.kind == "polyhedral":
        verts = ms.vertices(radius, tols)
        if verts.shape[0] == 0:
            return None
        mats = []
        for lam in verts:
            mat = matrix_for(lam)
            if mat is None:
                return None
            mats.append(mat)
        return mats
    return None


# ---------------------------------------------------------------------------
# Sphere sampling over cones
# ---------------------------------------------------------------------------


def sample_cone_sphere(cone: Cone, n: int, rng: np.random.Generator,
                       grid_target: int = 10000, sampled_target: int = 20000,
                       tols: TolerancePolicy = DEFAULT_TOLS):
    """Unit directions in the cone: deterministic grids inside the cone's
    equality subspace for dimension <= 3, low-discrepancy sampling above.

    Returns (W, method); W has unit rows, possibly empty when the cone is
    the origin.
    """
    eq = cone_equality_rows(cone)
    basis = _orthogonal_complement(eq) if eq.shape[0] else np.eye(n)
    d = basis.shape[0]
    if d == 0:
        return np.zeros((0, n)), "vacuous"
    if d == 1:
        cands = np.array([basis[0], -basis[0]])
        method = "exact_small_dim"
    elif d == 2:
        ang = np.linspace(0.0, 2 * np.pi, grid_target, endpoint=False)
        cands = np.cos(ang)[:, None] * basis[0] + np.sin(ang)[:, None] * basis[1]
        method = "exact_small_dim"
    elif d == 3:
        k = np.arange(grid_target)
        golden = (1 + 5 ** 0.5) / 2
        zc = 1 - 2 * (k + 0.5) / grid_target
        rr = np.sqrt(1 - zc ** 2)
        th = 2 * np.pi * k / golden
        sph = np.stack([rr * np.cos(th), rr * np.sin(th), zc], axis=1)
        cands = sph @ basis
        method = "exact_small_dim"
    else:
        from scipy.stats import qmc

        eng = qmc.Halton(d, scramble=True, seed=rng)
        g = eng.random(sampled_target)
        sph = _gaussianize(g)
        sph /= np.maximum(np.linalg.norm(sph, axis=1, keepdims=True), 1e-300)
        cands = sph @ basis
        method = "sampled"
    keep = np.array([cone_contains(cone, wv, tols.cone_tol) for wv in cands])
    W = cands[keep]
    norms = np.linalg.norm(W, axis=1, keepdims=True)
    W = W / np.maximum(norms, 1e-300)
    return W, method


def _gaussianize(u01: np.ndarray) -> np.ndarray:
    from scipy.special import ndtri

    return ndtri(np.clip(u01, 1e-12, 1 - 1e-12))


def _refine_minimum(mats, cone, w0, tols, steps: int = 60):
    """Local descent of max_i w^T M_i w on the cone intersect sphere."""
    from .constraint_system import _project_cone

    w = w0.copy()
    best = _maxquad(mats, w)
    lr = 0.1
    for _ in range(steps):
        vals = [float(w @ (m @ w)) for m in mats]
        i = int(np.argmax(vals))
        g = 2.0 * (mats[i] @ w)
        cand = w - lr * g
        try:
            cand = _project_cone(cone, cand) if not isinstance(cone, PullbackCone) \
                else cand
        except UnsupportedGeometry:
            pass
        nc = np.linalg.norm(cand)
        if nc < 1e-12 or not cone_contains(cone, cand, tols.cone_tol):
            lr *= 0.5
            continue
        cand = cand / nc
        val = _maxquad(mats, cand)
        if val < best:
            w, best = cand, val
        else:
            lr *= 0.7
    return w, best


def _maxquad(mats, w):
    return max(float(w @ (m @ w)) for m in mats)


def second_order_conditions(p: OptProblem, x, seed: int = 0,
                            tols: TolerancePolicy = DEFAULT_TOLS) -> OptimalityCertificate:
    """No-gap second-order conditions at a stationary point.

    Scans Q(w) = <Hess_phi w, w> + d2 of the constraint indicator over the
    critical cone intersected with the unit sphere (deterministic grid for
    up to three free dimensions, low-discrepancy sampling above, plus local
    descents), and reports the best growth modulus found.
    """
    chk = kkt_check(p, x, tols)
    bp: BasePoint = chk["base_point"]
    ms: MultiplierSet = chk["multiplier_set"]
    if chk["residual"] > tols.eq_tol * (1.0 + np.linalg.norm(chk["v"])):
        raise NoMultipliers("KKT residual exceeds tolerance at x")
    if ms.is_empty:
        raise NoMultipliers("multiplier set is empty at x")
    kcone = critical_cone_omega(p.cs, bp, tols)
    rng = np.random.default_rng(seed)
    W, method = sample_cone_sphere(kcone, p.cs.n, rng, tols=tols)
    if W.shape[0] == 0:
        return OptimalityCertificate(True, True, float("inf"), None, "vacuous")
    mats = curvature_quadratics(p, bp, ms, tols)
    if mats is not None:
        vals = np.max(np.stack([np.einsum("ij,nj,ni->n", m, W, W) for m in mats]),
                      axis=0)
        order = np.argsort(vals)
        best_w = W[order[0]]
        best = float(vals[order[0]])
        for idx in order[: min(50, len(order))]:
            wr, vr = _refine_minimum(mats, kcone, W[idx], tols)
            if vr < best:
                best, best_w = vr, wr
    else:
        # multiplier set is a conic slice: evaluate the dual per direction
        hphi = p.phi_hess(bp.x)
        count = min(W.shape[0], 800)
        idx = np.linspace(0, W.shape[0] - 1, count).astype(int)
        best, best_w = np.inf, None
        for i in idx:
            wv = W[i]
            d2 = dual_value(p.cs, bp, wv, tols=tols)
            if not d2.value.is_finite:
                continue
            val = float(wv @ (hphi @ wv)) + d2.value.value
            if val < best:
                best, best_w = val, wv.copy()
        method = "sampled"
    tol_zero = 1e-9 * (1.0 + abs(best))
    necessary = best >= -tol_zero
    sufficient = best > tol_zero
    if abs(best) <= tol_zero:
        ell_hat = 0.0
    elif best < 0:
        ell_hat = float("-inf")  # not even a local minimum candidate
    else:
        ell_hat = float(best)
    return OptimalityCertificate(necessary, sufficient, ell_hat, best_w, method)


def growth_sample(p: OptProblem, x, ell: float, eps: Optional[float] = None,
                  samples: int = 50000, seed: int = 0,
                  tols: TolerancePolicy = DEFAULT_TOLS) -> GrowthReport:
    """Samples feasible points in the eps-ball and checks the quadratic
    growth inequality; 70% of draws are boundary-biased via vectorized
    segment bisection between feasible and infeasible points."""
    x = as_vector(x, p.cs.n)
    if eps is None:
        eps = 1e-2 * (1.0 + float(np.linalg.norm(x)))
    rng = np.random.default_rng(seed)
    n = p.cs.n
    psi0 = p.phi_value(x)

    def feasible_mask(X):
        # essentially exact feasibility: tolerance-level infeasibility would
        # fake growth violations of size ~ tol * |grad phi| near the boundary
        return batch_feasible(p.cs.theta, p.cs.f.value_batch(X),
                              1e-12 * (1.0 + float(np.linalg.norm(x))), tols)

    n_boundary = int(0.7 * samples)
    n_interior = samples - n_boundary
    # interior: rejection sampling in the ball
    pts = []
    budget = 6
    want = n_interior
    while want > 0 and budget > 0:
        draw = _ball(rng, x, eps, int(want * 2.5) + 16)
        keep = feasible_mask(draw)
        pts.append(draw[keep][:want])
        want -= pts[-1].shape[0]
        budget -= 1
    interior = np.vstack(pts) if pts else np.zeros((0, n))
    # boundary-biased: bisect segments between feasible and infeasible draws
    fa = interior
    if fa.shape[0] and n_boundary:
        reps = int(np.ceil(n_boundary / fa.shape[0]))
        a = np.tile(fa, (reps, 1))[:n_boundary]
        b = _ball(rng, x, eps, n_boundary)
        bmask = feasible_mask(b)
        a2, b2 = a[~bmask], b[~bmask]
        for _ in range(14):
            mid = 0.5 * (a2 + b2)
            mm = feasible_mask(mid)
            a2 = np.where(mm[:, None], mid, a2)
            b2 = np.where(mm[:, None], b2, mid)
        boundary = np.vstack([a2, b[bmask]])
    else:
        boundary = np.zeros((0, n))
    X = np.vstack([interior, boundary])
    X = X[feasible_mask(X)]
    if X.shape[0] == 0:
        return GrowthReport(ell, eps, 0, [], float("inf"), seed)
    d2 = np.sum((X - x) ** 2, axis=1)
    psis = p.phi_batch(X)
    slack = 1e-10 * (1.0 + np.abs(psi0))
    lhs = psis - psi0
    req = 0.5 * ell * d2
    bad = lhs < req - slack
    violations = [(X[i], float(psis[i]), float(psi0 + req[i]))
                  for i in np.flatnonzero(bad)[:50]]
    pos = d2 > 1e-16
    ratios = 2.0 * lhs[pos] / d2[pos]
    largest = float(max(ratios.min(), 0.0)) if pos.any() else float("inf")
    return GrowthReport(ell, eps, int(X.shape[0]), violations, largest, seed)


def _ball(rng, center, radius, count):
    n = center.shape[0]
    g = rng.standard_normal((count, n))
    g /= np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-300)
    r = radius * rng.random(count) ** (1.0 / n)
    return center[None, :] + g * r[:, None]


def sufficient_without_cq(p: OptProblem, x, lam, seed: int = 0,
                          tols: TolerancePolicy = DEFAULT_TOLS) -> bool:
    """Single-multiplier second-order sufficiency over the directions whose
    image lies in the critical cone of theta at f(x) for lam."""
    x = as_vector(x, p.cs.n)
    lam = as_vector(lam, p.cs.m)
    grad_l = p.phi_grad(x) + p.cs.f.jacobian(x).T @ lam
    if np.linalg.norm(grad_l) > tols.eq_tol * (1.0 + np.linalg.norm(lam)):
        raise KktViolated("gradient of the Lagrangian is not zero at (x, lam)")
    bp = BasePoint(p.cs, x, -p.phi_grad(x), tols=tols)
    ktheta = critical_cone(p.cs.theta, bp.fx, lam, tols)
    ecah = _pullback(ktheta, bp.jac)
    rng = np.random.default_rng(seed)
    W, _ = sample_cone_sphere(ecah, p.cs.n, rng, tols=tols)
    if W.shape[0] == 0:
        return True
    hphi = p.phi_hess(x)
    m = hphi + np.einsum("kij,k->ij", bp.hess, lam)
    cmat = _soc_curvature_blocks(p.cs.theta, bp.fx, lam, tols)
    if cmat is None:
        raise UnsupportedGeometry("no quadratic form for this target set")
    M = m + bp.jac.T @ cmat @ bp.jac
    vals = np.einsum("ij,nj,ni->n", M, W, W)
    i = int(np.argmin(vals))
    wref, vref = _refine_minimum([M], ecah, W[i], tols)
    return min(float(vals[i]), vref) > 1e-9


def _pullback(cone, jac):
    from .constraint_system import _pullback_cone

    return _pullback_cone(cone, jac)


def strong_subregularity_check(p: OptProblem, x, seed: int = 0,
                               n_directions: int = 60,
                               tols: TolerancePolicy = DEFAULT_TOLS) -> dict:
    """Two-route verdict on strong metric subregularity of the subgradient
    map at (x, 0): the second-order sufficient condition versus
    injectivity-at-zero of the graphical derivative along sampled critical
    directions."""
    from .graphical_derivative import dn_omega_membership

    cert = second_order_conditions(p, x, seed, tols)
    chk = kkt_check(p, x, tols)
    bp: BasePoint = chk["base_point"]
    kcone = critical_cone_omega(p.cs, bp, tols)
    rng = np.random.default_rng(seed + 1)
    W, _ = sample_cone_sphere(kcone, p.cs.n, rng, tols=tols)
    if W.shape[0]:
        idx = np.linspace(0, W.shape[0] - 1, min(n_directions, W.shape[0])).astype(int)
        W = W[idx]
    if cert.worst_direction is not None and W.shape[0]:
        W = np.vstack([W, cert.worst_direction])
    hphi = p.phi_hess(bp.x)
    zero_in_derivative = False
    witness = None
    for wv in W:
        ans = dn_omega_membership(p.cs, bp, wv, -(hphi @ wv), tols=tols)
        if ans.membership:
            zero_in_derivative = True
            witness = wv
            break
    injectivity_route = not zero_in_derivative
    return {
        "sufficient_route": cert.sufficient_holds,
        "injectivity_route": injectivity_route,
        "agree": cert.sufficient_holds == injectivity_route,
        "strongly_subregular": cert.sufficient_holds,
        "witness_direction": witness,
        "certificate": cert,
    }