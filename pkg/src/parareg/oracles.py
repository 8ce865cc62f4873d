"""Brute-force, definition-level estimators used as independent ground truth.

Every closed form in the package can be cross-checked here against the raw
limit definitions: second-order difference quotients of the indicator,
second-order tangency of parabolic arcs, parabolic-regularity and
epi-differentiability sequence searches, and tangency sampling on the graph
of the normal-cone map.  The estimators sample, locally polish, and
Richardson-extrapolate the per-level minima; they are evidence, not proof.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .constraint_system import BasePoint, ConstraintSystem, restore_feasibility
from .convex_subproblems import batch_feasible, dist, project
from .errors import UnsupportedGeometry
from .numeric_core import DEFAULT_TOLS, POS_INF, ExtReal, TolerancePolicy, as_vector
from .set_catalog import (
    ConvexSetSpec,
    FullSpace,
    Polyhedron,
    Product,
    SecondOrderCone,
)

__all__ = [
    "QuotientGrid",
    "OracleEstimate",
    "d2_quotient_estimate",
    "t2_membership",
    "parabolic_regularity_check",
    "epi_differentiability_check",
    "gph_normal_tangent_sample",
    "worker_count",
]

Target = Union[ConstraintSystem, ConvexSetSpec]

# growth factor across one grid level that counts as 1/t-like divergence
GROWTH_FACTOR = 1.2
DIVERGENCE_CAP = 1e6


def _default_ts() -> tuple:
    return tuple(np.geomspace(1e-1, 1e-4, 13))


@dataclass(frozen=True)
class QuotientGrid:
    """Geometric t-grid with per-level search radius and sample budget."""

    t_values: tuple = field(default_factory=_default_ts)
    radius_factor: float = 10.0
    samples: int = 2000
    seed: int = 0

    def __post_init__(self):
        ts = tuple(float(t) for t in self.t_values)
        if any(t <= 0 for t in ts) or any(b <= a for a, b in zip(ts[1:], ts)):
            raise ValueError("t grid must be strictly decreasing and positive")
        object.__setattr__(self, "t_values", ts)


@dataclass
class OracleEstimate:
    value: ExtReal
    trend: str  # converged | diverging_to_inf | inconclusive
    witness: list  # (t, point, quotient) triples, best per level
    level_values: list  # polished per-level minima (None where empty)
    raw_level_values: list  # pre-polish sample minima, for refinement checks
    seed: int

    @property
    def converged(self) -> bool:
        return self.trend == "converged"

    @property
    def diverging(self) -> bool:
        return self.trend == "diverging_to_inf"


def worker_count(n_items: int) -> int:
    cap = os.environ.get("PARAREG_THREADS", "")
    try:
        cap_val = int(cap) if cap else 1
    except ValueError:
        cap_val = 1
    return max(1, min(cap_val, n_items, os.cpu_count() or 1))


def _map_levels(fn, levels):
    workers = worker_count(len(levels))
    if workers <= 1:
        return [fn(i) for i in range(len(levels))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(len(levels))))


# ---------------------------------------------------------------------------
# Target adapters: feasibility and restoration for sets and systems
# ---------------------------------------------------------------------------


def _target_dim(target: Target) -> int:
    return target.n if isinstance(target, ConstraintSystem) else target.dim


def _feasible_mask(target: Target, X: np.ndarray, slack: float,
                   tols: TolerancePolicy) -> np.ndarray:
    if isinstance(target, ConstraintSystem):
        return batch_feasible(target.theta, target.f.value_batch(X), slack, tols)
    return batch_feasible(target, np.atleast_2d(X), slack, tols)


def _point_dist(target: Target, y: np.ndarray, tols: TolerancePolicy) -> float:
    """Distance to the target set; restoration-based upper bound for
    constraint systems."""
    if isinstance(target, ConstraintSystem):
        lower = dist(target.theta, target.f.value(y), tols)
        if lower <= 1e-15:
            return 0.0
        z = restore_feasibility(target, y, max_iter=30, tols=tols,
                                target=min(1e-13, 1e-6 * lower))
        if dist(target.theta, target.f.value(z), tols) > max(1e-10, 1e-2 * lower):
            return float("inf")  # restoration failed
        return float(np.linalg.norm(z - y))
    return dist(target, y, tols)


def _restore(target: Target, y: np.ndarray, tols: TolerancePolicy) -> np.ndarray:
    if isinstance(target, ConstraintSystem):
        return restore_feasibility(target, y, max_iter=20, tols=tols)
    return project(target, y, tols)


# ---------------------------------------------------------------------------
# Per-level minimization of the second-order difference quotient
# ---------------------------------------------------------------------------


def _ball_samples(rng: np.random.Generator, center: np.ndarray, radius: float,
                  count: int) -> np.ndarray:
    # one row of draws per sample, so doubling the count extends the sample
    # set instead of reshuffling it (monotone-refinement property)
    n = center.shape[0]
    block = rng.random((count, n + 1))
    from scipy.special import ndtri

    g = ndtri(np.clip(block[:, :n], 1e-12, 1 - 1e-12))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    g = g / np.maximum(norms, 1e-300)
    radii = radius * block[:, n] ** (1.0 / n)
    return center[None, :] + g * radii[:, None]


def _quotient(v: np.ndarray, u: np.ndarray, t: float) -> float:
    return -2.0 * float(v @ u) / t


def _level_minimum(target: Target, x: np.ndarray, v: np.ndarray, w: np.ndarray,
                   t: float, radius: float, count: int, rng: np.random.Generator,
                   tols: TolerancePolicy, polish: bool = True):
    """min of the second-order difference quotient of the indicator over the
    feasible slice of the radius-ball around w at scale t.

    Returns (raw_min, polished_min, best_u); None values when no feasible
    candidate exists at this level.
    """
    slack = tols.cone_tol * t * t * (1.0 + float(np.linalg.norm(x)))
    U = _ball_samples(rng, w, radius, count)
    U = np.vstack([w[None, :], U])
    X = x[None, :] + t * U
    mask = _feasible_mask(target, X, slack, tols)
    best_u, best_q = None, np.inf
    if mask.any():
        feas = U[mask]
        qs = -2.0 * (feas @ v) / t
        i = int(np.argmin(qs))
        best_u, best_q = feas[i].copy(), float(qs[i])
    # deterministic extra: restored tip of the ray
    z = _restore(target, x + t * w, tols)
    u0 = (z - x) / t
    if np.linalg.norm(u0 - w) <= radius * (1 + 1e-9):
        if _point_dist(target, x + t * u0, tols) <= slack:
            q0 = _quotient(v, u0, t)
            if q0 < best_q:
                best_u, best_q = u0, q0
    raw = None if best_u is None else best_q
    if best_u is None or not polish:
        return raw, raw, best_u
    if raw > 100.0 * (1.0 + float(np.linalg.norm(v))):
        # deep in divergence territory: the growth trend decides, polishing
        # the exact level value would be wasted work
        return raw, raw, best_u
    u, q = _polish_level(target, x, v, w, t, radius, slack, best_u, best_q, tols)
    return raw, q, u


def _polish_level(target, x, v, w, t, radius, slack, u0, q0, tols):
    """Pattern search with feasibility restoration along the objective
    descent direction; all accepted points stay in the radius ball.

    Each scale is exhausted greedily before halving, so the final point
    resolves the constrained minimum to a small multiple of the finest
    scale (radius * 2^-24)."""
    n = w.shape[0]
    nv = float(np.linalg.norm(v))
    vhat = v / nv if nv > 0 else np.zeros(n)
    dirs = [vhat, -vhat] if nv > 0 else []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        dirs.extend([e, -e])
    u, q = u0.copy(), q0

    def feasible(uu):
        return _point_dist(target, x + t * uu, tols) <= slack

    def clip(uu):
        d = uu - w
        nd = np.linalg.norm(d)
        if nd > radius:
            return w + d * (radius / nd)
        return uu

    def try_point(cand, restored):
        nonlocal u, q
        if not restored and not feasible(cand):
            return False
        qq = _quotient(v, cand, t)
        if qq < q - 1e-15 * (1 + abs(q)):
            u, q = cand, qq
            return True
        return False

    idle_scales = 0
    for k in range(25):
        eta = radius * 2.0 ** (-k)
        scale_improved = False
        for _ in range(60):  # exhaust this scale
            improved = False
            for d in dirs:
                plain = clip(u + eta * d)
                plain_feasible = feasible(plain)
                if plain_feasible and try_point(plain, restored=True):
                    improved = True
                    continue
                if plain_feasible:
                    continue  # blocked by the objective, sliding cannot help
                # blocked by feasibility: push along descent and restore
                probe = clip(u + eta * d + radius * vhat)
                z = _restore(target, x + t * probe, tols)
                cand = clip((z - x) / t)
                if feasible(cand) and try_point(cand, restored=True):
                    improved = True
            if improved:
                scale_improved = True
            else:
                break
        idle_scales = 0 if scale_improved else idle_scales + 1
        if idle_scales >= 4:
            break
    return u, q


def _extrapolate(ts, values):
    """Richardson extrapolation assuming per-level bias linear in t."""
    out = [None] * len(values)
    prev_i = None
    for i, val in enumerate(values):
        if val is None:
            continue
        if prev_i is None:
            out[i] = val
        else:
            t0, t1 = ts[prev_i], ts[i]
            out[i] = val + (val - values[prev_i]) * t1 / (t0 - t1)
        prev_i = i
    return out


def _classify(ts, values, extrapolated, tol, scale=1.0):
    """Trend detection: divergence by cap, by 1/t-like growth, or by missing
    feasible candidates at the finest levels; convergence by a stable
    extrapolated tail."""
    tail = 3
    fin = [v for v in values if v is not None]
    last = values[-tail:]
    if all(v is None for v in last):
        return "diverging_to_inf", POS_INF
    if all(v is not None and v > DIVERGENCE_CAP for v in last):
        return "diverging_to_inf", POS_INF
    present = [(t, v) for t, v in zip(ts, values) if v is not None]
    if len(present) >= tail + 1:
        growing = all(
            present[-j][1] > GROWTH_FACTOR * present[-j - 1][1] + tol
            for j in range(1, tail + 1)
        )
        if growing and present[-1][1] > 10 * tol * scale:
            return "diverging_to_inf", POS_INF
    ex = [e for e in extrapolated if e is not None]
    if len(ex) >= tail:
        tailvals = ex[-tail:]
        ref = tailvals[-1]
        spread = max(tailvals) - min(tailvals)
        if spread <= tol * (1.0 + abs(ref)):
            return "converged", ExtReal.finite(ref)
    if fin:
        return "inconclusive", ExtReal.finite(ex[-1] if ex else fin[-1])
    return "inconclusive", POS_INF


# ---------------------------------------------------------------------------
# Public oracles
# ---------------------------------------------------------------------------


def _resolve(target: Target, x, v=None):
    if isinstance(target, ConstraintSystem):
        n = target.n
    else:
        n = target.dim
    x = as_vector(x, n)
    v = None if v is None else as_vector(v, n)
    return x, v


def d2_quotient_estimate(target: Target, x, v, w,
                         grid: QuotientGrid = QuotientGrid(),
                         tols: TolerancePolicy = DEFAULT_TOLS,
                         radius_override: Optional[float] = None,
                         polish: bool = True) -> OracleEstimate:
    """Estimate the second subderivative of the indicator from the raw
    liminf of second-order difference quotients.

    Per t-level the quotient is minimized over the feasible part of a ball
    of radius `radius_factor * t` around w (samples plus pattern-search
    polish); the per-level minima carry an O(t) bias from the shrinking
    ball, which Richardson extrapolation removes before the convergence
    test on the last three levels.
    """
    x, v = _resolve(target, x, v)
    w = as_vector(w, x.shape[0])
    ts = grid.t_values

    def level(i):
        t = ts[i]
        rng = np.random.default_rng([grid.seed, i])
        factor = radius_override if radius_override is not None else grid.radius_factor
        return _level_minimum(target, x, v, w, t, factor * t, grid.samples,
                              rng, tols, polish)

    results = _map_levels(level, ts)
    raw = [r[0] for r in results]
    vals = [r[1] for r in results]
    ex = _extrapolate(ts, vals)
    trend, value = _classify(ts, vals, ex, tols.oracle_tol,
                             scale=1.0 + float(np.linalg.norm(v)))
    witness = [(t, r[2], r[1]) for t, r in zip(ts, results) if r[2] is not None]
    return OracleEstimate(value, trend, witness, vals, raw, grid.seed)


def t2_membership(target: Target, x, w, u,
                  grid: QuotientGrid = QuotientGrid(),
                  tols: TolerancePolicy = DEFAULT_TOLS) -> OracleEstimate:
    """Tests u in T^2(x, w) via the quotient dist(x + t w + t^2/2 u) / (t^2/2).

    Convergence of the quotient to zero certifies membership (restored
    points are genuine feasible witnesses); divergence or a tail bounded
    away from zero reports a non-member.
    """
    x, _ = _resolve(target, x)
    w = as_vector(w, x.shape[0])
    u = as_vector(u, x.shape[0])
    ts = grid.t_values
    scale = 1.0 + float(np.linalg.norm(u))

    def level(i):
        t = ts[i]
        y = x + t * w + 0.5 * t * t * u
        d = _point_dist(target, y, tols)
        return d / (0.5 * t * t)

    vals = _map_levels(level, ts)
    tail = vals[-3:]
    tol = tols.oracle_tol * scale
    if all(np.isfinite(q) and q <= tol for q in tail):
        return OracleEstimate(ExtReal.finite(0.0), "converged",
                              [(t, None, q) for t, q in zip(ts, vals)],
                              list(vals), list(vals), grid.seed)
    growing = all(
        (not np.isfinite(vals[-j])) or vals[-j] > GROWTH_FACTOR * vals[-j - 1]
        for j in range(1, 4)
    )
    bounded_away = all(np.isfinite(q) and q > 10 * tol for q in tail) or \
        any(not np.isfinite(q) for q in tail)
    if (growing and (not np.isfinite(vals[-1]) or vals[-1] > 10 * tol)) or \
            (bounded_away and vals[-1] >= vals[0] * 0.5) or \
            all((not np.isfinite(q)) or q > DIVERGENCE_CAP for q in tail):
        return OracleEstimate(POS_INF, "diverging_to_inf",
                              [(t, None, q) for t, q in zip(ts, vals)],
                              list(vals), list(vals), grid.seed)
    return OracleEstimate(ExtReal.finite(float(tail[-1])), "inconclusive",
                          [(t, None, q) for t, q in zip(ts, vals)],
                          list(vals), list(vals), grid.seed)


def parabolic_regularity_check(target: Target, x, v, w,
                               grid: QuotientGrid = QuotientGrid(),
                               tols: TolerancePolicy = DEFAULT_TOLS,
                               d2_value: Optional[float] = None):
    """Search for quotient-achieving sequences with ||w_k - w|| <= C t_k.

    Returns (holds, info) where info carries the constant C that worked and
    the witness sequence.  Requires a finite second-subderivative estimate.
    """
    x, v = _resolve(target, x, v)
    w = as_vector(w, x.shape[0])
    if d2_value is None:
        base = d2_quotient_estimate(target, x, v, w, grid, tols)
        if not base.value.is_finite:
            return False, {"reason": "second subderivative estimate not finite"}
        d2_value = base.value.value
    for c in (1.0, 10.0, 100.0):
        est = d2_quotient_estimate(target, x, v, w, grid, tols,
                                   radius_override=c)
        if est.value.is_finite and abs(est.value.value - d2_value) <= \
                tols.oracle_tol * (1.0 + abs(d2_value)):
            return True, {"constant": c, "witness": est.witness,
                          "estimate": est.value.value}
    return False, {"reason": "no O(t) sequence matched the estimate"}


def epi_differentiability_check(target: Target, x, v, w,
                                grid: QuotientGrid = QuotientGrid(),
                                tols: TolerancePolicy = DEFAULT_TOLS) -> bool:
    """For each grid level, looks for w_t -> w whose quotients converge to
    the estimated second subderivative; vacuously true when both sides are
    infinite (non-critical directions)."""
    x, v = _resolve(target, x, v)
    w = as_vector(w, x.shape[0])
    base = d2_quotient_estimate(target, x, v, w, grid, tols)
    if base.diverging:
        # quotient along the straight arc w_t = w must also blow up
        ts = grid.t_values
        slack = [tols.cone_tol * t * t * (1.0 + np.linalg.norm(x)) for t in ts]
        tailvals = []
        for t, s in zip(ts[-3:], slack[-3:]):
            d = _point_dist(target, x + t * w, tols)
            if d > s:
                tailvals.append(np.inf)
            else:
                tailvals.append(_quotient(v, w, t))
        return all((not np.isfinite(q)) or q > 10 * tols.oracle_tol or
                   abs(q) > DIVERGENCE_CAP for q in tailvals) or base.diverging
    if not base.value.is_finite:
        return False
    # every level must produce a candidate whose quotient tracks the value
    target_val = base.value.value
    good_levels = [q for (_, _, q) in base.witness]
    if len(good_levels) < len(grid.t_values) - 1:
        return False
    ex = _extrapolate(grid.t_values, base.level_values)
    tail = [e for e in ex if e is not None][-3:]
    return all(abs(e - target_val) <= tols.oracle_tol * (1 + abs(target_val))
               for e in tail)


# ---------------------------------------------------------------------------
# Tangency sampling on the graph of the normal-cone map
# ---------------------------------------------------------------------------


def _normal_generators_abs(theta: ConvexSetSpec, y: np.ndarray, atol: float):
    """Normal-cone description at y with an absolute activity tolerance;
    returns ('gens', rays, lineality) or ('soc_polar', m) or None."""
    if isinstance(theta, Polyhedron):
        ny = float(np.linalg.norm(y))
        if theta.A.shape[0]:
            rn = np.linalg.norm(theta.A, axis=1)
            act = np.abs(theta.A @ y - theta.b) <= atol * (1.0 + rn * ny)
            rays = theta.A[act]
        else:
            rays = np.zeros((0, theta.dim))
        return ("gens", rays, theta.E)
    if isinstance(theta, SecondOrderCone):
        m = theta.m
        ny = float(np.linalg.norm(y))
        if ny <= atol:
            return ("soc_polar", m)
        head, tail = y[:-1], y[-1]
        if np.linalg.norm(head) < tail - atol * (1.0 + ny):
            return ("gens", np.zeros((0, m)), np.zeros((0, m)))
        r = np.concatenate([head / max(np.linalg.norm(head), 1e-300), [-1.0]])
        return ("gens", r[None, :], np.zeros((0, m)))
    if isinstance(theta, Product):
        kinds = []
        k = 0
        for f in theta.factors:
            kinds.append((_normal_generators_abs(f, y[k : k + f.dim], atol), k, f.dim))
            k += f.dim
        if any(kind[0][0] == "soc_polar" for kind in kinds):
            return ("mixed", kinds, theta.dim)
        m = theta.dim
        rays, lin = [], []
        for (tag, r, l), off, d in kinds:
            for row in r:
                wide = np.zeros(m)
                wide[off : off + d] = row
                rays.append(wide)
            for row in l:
                wide = np.zeros(m)
                wide[off : off + d] = row
                lin.append(wide)
        return ("gens", np.array(rays) if rays else np.zeros((0, m)),
                np.array(lin) if lin else np.zeros((0, m)))
    if isinstance(theta, FullSpace):
        return ("gens", np.zeros((0, theta.dim)), np.zeros((0, theta.dim)))
    raise UnsupportedGeometry("no graph-sampling normal cone for this set")


def _dist_to_image_cone(desc, jac: np.ndarray, vec: np.ndarray) -> float:
    """dist(vec; J^T C) for a normal-cone description C."""
    from scipy.optimize import nnls

    tag = desc[0]
    if tag == "gens":
        _, rays, lin = desc
        cols = []
        if rays.shape[0]:
            cols.append(jac.T @ rays.T)
        if lin.shape[0]:
            cols.append(jac.T @ lin.T)
            cols.append(-(jac.T @ lin.T))
        if not cols:
            return float(np.linalg.norm(vec))
        _, res = nnls(np.hstack(cols), vec)
        return float(res)
    if tag == "soc_polar":
        m = desc[1]
        from .convex_subproblems import soc_project

        lam, *_ = np.linalg.lstsq(jac.T, vec, rcond=None)
        lam = -soc_project(-lam)
        best = float(np.linalg.norm(jac.T @ lam - vec))
        step = 1.0 / max(np.linalg.norm(jac, 2) ** 2, 1e-12)
        for _ in range(200):
            lam = lam - step * (jac @ (jac.T @ lam - vec))
            lam = -soc_project(-lam)
            best = min(best, float(np.linalg.norm(jac.T @ lam - vec)))
        return best
    if tag == "mixed":
        raise UnsupportedGeometry("mixed polyhedral/SOC-vertex products not sampled")
    raise UnsupportedGeometry(f"unknown normal description {tag!r}")


def gph_normal_tangent_sample(cs: ConstraintSystem, bp: BasePoint, w, q,
                              grid: QuotientGrid = QuotientGrid(),
                              tols: TolerancePolicy = DEFAULT_TOLS) -> OracleEstimate:
    """Tests (w, q) in the tangent cone to the graph of the normal-cone map
    at (x, v), by searching feasible points x_t near x + t w whose normal
    cones (through the chain rule) contain v + t q up to o(t)."""
    w = as_vector(w, cs.n)
    q = as_vector(q, cs.n)
    ts = grid.t_values
    count = max(20, grid.samples // 40)

    def level(i):
        t = ts[i]
        rng = np.random.default_rng([grid.seed, 7919 + i])
        Z = np.vstack([np.zeros((1, cs.n)),
                       _ball_samples(rng, np.zeros(cs.n), grid.radius_factor, count)])
        base = bp.x + t * w
        vhat = bp.v + t * q
        atol = grid.radius_factor * t * t
        best = np.inf
        for z in Z:
            cand = base + 0.5 * t * t * z
            cand = restore_feasibility(cs, cand, max_iter=10, tols=tols)
            fc = cs.f.value(cand)
            if dist(cs.theta, fc, tols) > tols.cone_tol * (1 + np.linalg.norm(fc)):
                continue
            if np.linalg.norm((cand - bp.x) / t - w) > 2.0 * grid.radius_factor * t:
                continue
            desc = _normal_generators_abs(cs.theta, fc, atol)
            jac = cs.f.jacobian(cand)
            d = _dist_to_image_cone(desc, jac, vhat)
            best = min(best, d / t)
        return best if np.isfinite(best) else None

    vals = _map_levels(level, ts)
    tol = tols.oracle_tol * (1.0 + float(np.linalg.norm(q)))
    tail = vals[-3:]
    if all(v is not None and v <= tol for v in tail):
        return OracleEstimate(ExtReal.finite(0.0), "converged",
                              [(t, None, v) for t, v in zip(ts, vals)],
                              list(vals), list(vals), grid.seed)
    finite_tail = [v for v in tail if v is not None]
    if (not finite_tail) or all(v > 10 * tol for v in finite_tail):
        return OracleEstimate(POS_INF, "diverging_to_inf",
                              [(t, None, v) for t, v in zip(ts, vals)],
                              list(vals), list(vals), grid.seed)
    return OracleEstimate(ExtReal.finite(float(finite_tail[-1])), "inconclusive",
                          [(t, None, v) for t, v in zip(ts, vals)],
                          list(vals), list(vals), grid.seed)
