"""Augmented Lagrangian analysis objects: evaluation through projections,
the Moreau envelope of the target indicator's second subderivative, the
second semiderivative in x, and the growth-threshold search over a
penalty grid.

Only analysis lives here; there is no augmented-Lagrangian *method* (no
outer iterations or multiplier updates).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .constraint_system import BasePoint, ConstraintSystem
from .convex_subproblems import batch_dist_lower, dist, project, soc_dist, soc_project
from .errors import KktViolated, NonpositiveRho, NotANormal, UnsupportedGeometry
from .numeric_core import DEFAULT_TOLS, POS_INF, ExtReal, TolerancePolicy, as_vector
from .optimality import GrowthReport, OptProblem, sample_cone_sphere
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
    _orthogonal_complement,
)

__all__ = [
    "AugLagEval",
    "AugGrowthReport",
    "eval_auglag",
    "auglag_value_batch",
    "moreau_envelope_of_d2",
    "d2_auglag",
    "auglag_expansion_residuals",
    "growth_threshold",
]


@dataclass
class AugLagEval:
    x: np.ndarray
    lam: np.ndarray
    rho: float
    value: float
    gradient_x: Optional[np.ndarray]


@dataclass
class AugGrowthReport:
    rho_bar: Optional[float]
    per_rho: list  # (rho, positivity_holds, GrowthReport)
    ell: float
    eps: float
    sufficient_without_cq: Optional[bool] = None

    @property
    def consistent(self) -> bool:
        """Grid verdicts agree with the single-multiplier sufficiency."""
        if self.sufficient_without_cq is None:
            return True
        return (self.rho_bar is not None) == self.sufficient_without_cq


def eval_auglag(p: OptProblem, x, lam, rho: float,
                tols: TolerancePolicy = DEFAULT_TOLS) -> AugLagEval:
    """Augmented Lagrangian value and x-gradient through the projection onto
    the target set."""
    if rho <= 0:
        raise NonpositiveRho("rho must be positive")
    x = as_vector(x, p.cs.n)
    lam = as_vector(lam, p.cs.m)
    fx = p.cs.f.value(x)
    y = fx + lam / rho
    py = project(p.cs.theta, y, tols)
    d = float(np.linalg.norm(y - py))
    value = p.phi_value(x) + 0.5 * rho * (d * d - float(lam @ lam) / (rho * rho))
    grad = p.phi_grad(x) + rho * (p.cs.f.jacobian(x).T @ (y - py))
    return AugLagEval(x, lam, rho, value, grad)


def auglag_value_batch(p: OptProblem, X: np.ndarray, lam: np.ndarray,
                       rho: float, tols: TolerancePolicy = DEFAULT_TOLS) -> np.ndarray:
    """Vectorized augmented-Lagrangian values (exact distances for the
    catalog sets with closed-form projections, per-point otherwise)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    fX = p.cs.f.value_batch(X)
    Y = fX + lam[None, :] / rho
    d = _batch_dist_exact(p.cs.theta, Y, tols)
    return p.phi_batch(X) + 0.5 * rho * (d * d - float(lam @ lam) / (rho * rho))


def _batch_dist_exact(theta: ConvexSetSpec, Y: np.ndarray,
                      tols: TolerancePolicy) -> np.ndarray:
    if isinstance(theta, (SecondOrderCone, FullSpace)):
        return batch_dist_lower(theta, Y)
    if isinstance(theta, Polyhedron):
        lower = batch_dist_lower(theta, Y)
        out = lower.copy()
        for i in np.flatnonzero(lower > 0):
            out[i] = dist(theta, Y[i], tols)
        return out
    if isinstance(theta, Product):
        k, total = 0, np.zeros(Y.shape[0])
        for f in theta.factors:
            total = total + _batch_dist_exact(f, Y[:, k : k + f.dim], tols) ** 2
            k += f.dim
        return np.sqrt(total)
    return np.array([dist(theta, y, tols) for y in Y])


# ---------------------------------------------------------------------------
# Moreau envelope of the second subderivative
# ---------------------------------------------------------------------------


def _dist_to_cone(kcone, u: np.ndarray, tols: TolerancePolicy) -> float:
    if isinstance(kcone, SocCone) and kcone.sign == 1:
        return float(soc_dist(u[None, :])[0])
    return float(np.linalg.norm(u - _project_onto_cone(kcone, u, tols)))


def _project_onto_cone(kcone, u: np.ndarray, tols: TolerancePolicy) -> np.ndarray:
    if isinstance(kcone, SocCone) and kcone.sign == 1:
        return soc_project(u)
    return project(cone_to_set(kcone), u, tols)


def moreau_envelope_of_d2(theta: ConvexSetSpec, y, lam, rho: float, u,
                          tols: TolerancePolicy = DEFAULT_TOLS) -> ExtReal:
    """Moreau envelope (parameter 1/(2 rho)) of the second subderivative of
    the target indicator at (y, lam), evaluated at u.

    For polyhedra this is rho * dist(u; K)^2; on the second-order-cone
    boundary the envelope of the quadratic-plus-indicator restricts to the
    critical hyperplane and solves a small positive-definite system in
    closed form.
    """
    if rho <= 0:
        raise NonpositiveRho("rho must be positive")
    y = as_vector(y, theta.dim)
    lam = as_vector(lam, theta.dim)
    u = as_vector(u, theta.dim)
    ncone = normal_cone(theta, y, tols)
    if not cone_contains(ncone, lam, tols.cone_tol):
        raise NotANormal("lam is not a normal at y")
    return ExtReal.finite(_envelope_value(theta, y, lam, rho, u, tols))


def _envelope_value(theta, y, lam, rho, u, tols) -> float:
    if isinstance(theta, (Polyhedron, FullSpace)):
        kcone = critical_cone(theta, y, lam, tols)
        d = _dist_to_cone(kcone, u, tols)
        return rho * d * d
    if isinstance(theta, SecondOrderCone):
        m = theta.m
        ny = float(np.linalg.norm(y))
        interior = ny > tols.cone_tol and \
            np.linalg.norm(y[:-1]) < y[-1] - tols.cone_tol * (1.0 + ny)
        if ny <= tols.cone_tol or interior or np.linalg.norm(lam) <= tols.cone_tol:
            kcone = critical_cone(theta, y, lam, tols)
            d = _dist_to_cone(kcone, u, tols)
            return rho * d * d
        # boundary, nonzero normal: quadratic c * (||z'||^2 - z_m^2) on the
        # critical hyperplane; minimize c z^T D z + rho ||z - u||^2 over it
        c = float(np.linalg.norm(lam) / ny)
        d = np.eye(m)
        d[-1, -1] = -1.0
        a = np.concatenate([y[:-1], [-y[-1]]])
        basis = _orthogonal_complement(a[None, :] / np.linalg.norm(a))
        mtil = basis @ d @ basis.T
        ztil = np.linalg.solve(c * mtil + rho * np.eye(basis.shape[0]),
                               rho * (basis @ u))
        z = basis.T @ ztil
        return float(c * (z @ (d @ z)) + rho * np.sum((z - u) ** 2))
    if isinstance(theta, Product):
        total = 0.0
        for f, yi, li, ui in zip(theta.factors, theta.split(y), theta.split(lam),
                                 theta.split(u)):
            total += _envelope_value(f, yi, li, rho, ui, tols)
        return total
    raise UnsupportedGeometry(f"no envelope for {type(theta).__name__}")


def _require_kkt(p: OptProblem, x, lam, tols) -> BasePoint:
    x = as_vector(x, p.cs.n)
    lam = as_vector(lam, p.cs.m)
    grad_l = p.phi_grad(x) + p.cs.f.jacobian(x).T @ lam
    if np.linalg.norm(grad_l) > tols.eq_tol * (1.0 + np.linalg.norm(lam)):
        raise KktViolated("gradient of the Lagrangian is not zero at (x, lam)")
    bp = BasePoint(p.cs, x, -p.phi_grad(x), tols=tols)
    ncone = normal_cone(p.cs.theta, bp.fx, tols)
    if not cone_contains(ncone, lam, tols.cone_tol):
        raise KktViolated("lam is not a normal of the target set at f(x)")
    return bp


def d2_auglag(p: OptProblem, x, lam, rho: float, w,
              tols: TolerancePolicy = DEFAULT_TOLS) -> float:
    """Second semiderivative (in x) of the augmented Lagrangian at a KKT
    pair: Lagrangian curvature plus the envelope of the target's second
    subderivative at the pushed-forward direction.  Finite for every w."""
    if rho <= 0:
        raise NonpositiveRho("rho must be positive")
    bp = _require_kkt(p, x, lam, tols)
    w = as_vector(w, p.cs.n)
    lam = as_vector(lam, p.cs.m)
    hl = p.phi_hess(bp.x) + np.einsum("kij,k->ij", bp.hess, lam)
    env = _envelope_value(p.cs.theta, bp.fx, lam, rho, bp.jac @ w, tols)
    return float(w @ (hl @ w)) + env


def auglag_expansion_residuals(p: OptProblem, x, lam, rho: float, w, ts,
                               tols: TolerancePolicy = DEFAULT_TOLS) -> list:
    """|L(x + t w) - phi(x) - t^2/2 d2| / (t^2/2) along a step grid; the
    second-order expansion drives these to zero."""
    x = as_vector(x, p.cs.n)
    w = as_vector(w, p.cs.n)
    d2 = d2_auglag(p, x, lam, rho, w, tols)
    base = p.phi_value(x)
    out = []
    for t in ts:
        val = eval_auglag(p, x + t * w, lam, rho, tols).value
        out.append(abs(val - base - 0.5 * t * t * d2) / (0.5 * t * t))
    return out


def growth_threshold(p: OptProblem, x, lam,
                     rho_grid=(1.0, 2.0, 5.0, 10.0, 50.0, 100.0),
                     ell: Optional[float] = None, eps: Optional[float] = None,
                     samples: int = 20000, seed: int = 0,
                     tols: TolerancePolicy = DEFAULT_TOLS) -> AugGrowthReport:
    """Grid search for the penalty threshold past which the augmented
    Lagrangian grows quadratically on the whole ball around x.

    For each rho the second semiderivative is checked for positivity over
    the unit sphere and the growth inequality is sampled over the
    unconstrained eps-ball; rho_bar is the smallest grid value from which
    every larger grid value passes both ("grid threshold", not optimized).
    The single-multiplier sufficient condition is recorded as cross-check.
    """
    x = as_vector(x, p.cs.n)
    lam = as_vector(lam, p.cs.m)
    bp = _require_kkt(p, x, lam, tols)
    if eps is None:
        eps = 1e-2 * (1.0 + float(np.linalg.norm(x)))
    n = p.cs.n
    rng = np.random.default_rng(seed)
    # sphere directions for the positivity check
    full = ConeRep.full(n)
    W, _ = sample_cone_sphere(full, n, rng, grid_target=4000, sampled_target=4000,
                              tols=tols)
    if ell is None:
        d2s = np.array([d2_auglag(p, x, lam, float(rho_grid[-1]), wv, tols)
                        for wv in W])
        ell = max(0.9 * float(d2s.min()), 1e-6)
    per_rho = []
    base = p.phi_value(x)
    for rho in rho_grid:
        rho = float(rho)
        d2min = min(d2_auglag(p, x, lam, rho, wv, tols) for wv in W)
        positivity = d2min > 1e-9
        X = _ball_points(rng, x, eps, samples)
        vals = auglag_value_batch(p, X, lam, rho, tols)
        d2dist = np.sum((X - x) ** 2, axis=1)
        req = base + 0.5 * ell * d2dist
        bad = vals < req - 1e-10 * (1.0 + abs(base))
        report = GrowthReport(ell, eps, int(X.shape[0]),
                              [(X[i], float(vals[i]), float(req[i]))
                               for i in np.flatnonzero(bad)[:20]],
                              float(np.min(2 * (vals - base) /
                                           np.maximum(d2dist, 1e-300))),
                              seed)
        per_rho.append((rho, positivity, report))
    rho_bar = None
    for i, (rho, pos, rep) in enumerate(per_rho):
        if pos and rep.holds and all(p2 and r2.holds for _, p2, r2 in per_rho[i:]):
            rho_bar = rho
            break
    try:
        from .optimality import sufficient_without_cq

        swc = sufficient_without_cq(p, x, lam, seed=seed, tols=tols)
    except Exception:
        swc = None
    return AugGrowthReport(rho_bar, per_rho, ell, eps, swc)


def _ball_points(rng, center, radius, count):
    n = center.shape[0]
    g = rng.standard_normal((count, n))
    g /= np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-300)
    r = radius * rng.random(count) ** (1.0 / n)
    return center[None, :] + g * r[:, None]
