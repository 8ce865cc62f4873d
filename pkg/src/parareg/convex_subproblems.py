"""Dense solver substrate: simplex LP, projections, support functions.

Everything here targets desk-scale problems (a few hundred rows/columns at
most) with plain numpy linear algebra; solvers are pure functions of their
inputs and safe to call in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, EmptySet, NumericalFailure
from .numeric_core import (
    DEFAULT_TOLS,
    NEG_INF,
    POS_INF,
    ExtReal,
    TolerancePolicy,
    as_matrix,
    as_vector,
)
from .set_catalog import (
    ConvexSetSpec,
    Empty,
    FullSpace,
    Polyhedron,
    Product,
    SecondOrderCone,
)

__all__ = [
    "LinearProgram",
    "LpResult",
    "solve_lp",
    "project",
    "support_function",
    "member",
    "dist",
    "batch_feasible",
    "batch_dist_lower",
    "soc_project",
    "soc_dist",
    "enumerate_vertices",
]


# ---------------------------------------------------------------------------
# Linear programming
# ---------------------------------------------------------------------------


@dataclass
class LinearProgram:
    """min (or max) c @ x over {A_ub x <= b_ub, A_eq x = b_eq, lo <= x <= hi}.

    Bounds default to free variables; set `nonneg=True` for x >= 0.
    """

    c: np.ndarray
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    maximize: bool = False
    nonneg: bool = False
    lower: Optional[np.ndarray] = None  # entries may be -inf
    upper: Optional[np.ndarray] = None  # entries may be +inf

    def __post_init__(self):
        self.c = as_vector(self.c)
        n = self.c.shape[0]
        if self.A_ub is None:
            self.A_ub = np.zeros((0, n))
            self.b_ub = np.zeros(0)
        else:
            self.A_ub = as_matrix(self.A_ub)
            self.b_ub = as_vector(self.b_ub, self.A_ub.shape[0])
        if self.A_eq is None:
            self.A_eq = np.zeros((0, n))
            self.b_eq = np.zeros(0)
        else:
            self.A_eq = as_matrix(self.A_eq)
            self.b_eq = as_vector(self.b_eq, self.A_eq.shape[0])
        if self.A_ub.shape[1] != n or self.A_eq.shape[1] != n:
            raise DimensionMismatch("constraint column count != len(c)")
        if self.lower is None:
            self.lower = np.zeros(n) if self.nonneg else np.full(n, -np.inf)
        else:
            self.lower = np.asarray(self.lower, dtype=float)
        if self.upper is None:
            self.upper = np.full(n, np.inf)
        else:
            self.upper = np.asarray(self.upper, dtype=float)


@dataclass
class LpResult:
    status: str  # optimal | infeasible | unbounded
    value: ExtReal
    x: Optional[np.ndarray] = None
    dual_ub: Optional[np.ndarray] = None
    dual_eq: Optional[np.ndarray] = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _simplex_core(A: np.ndarray, b: np.ndarray, c: np.ndarray, basis: list[int],
                  tol: float, degenerate_budget: int):
    """Phase-2 simplex on min c@x, Ax=b, x>=0 from a starting basis.

    Dantzig pricing, switching permanently to Bland's rule once degenerate
    pivots accumulate; raises NumericalFailure past the degenerate budget.
    Returns (status, x, y, basis) with y the equality duals.
    """
    m, n = A.shape
    degenerate = 0
    use_bland = False
    max_iter = 200 * (m + n + 10)
    for _ in range(max_iter):
        B = A[:, basis]
        try:
            xb = np.linalg.solve(B, b)
            y = np.linalg.solve(B.T, c[basis])
        except np.linalg.LinAlgError:
            raise NumericalFailure("singular basis in simplex")
        r = c - A.T @ y
        r[basis] = 0.0
        if use_bland:
            cand = np.flatnonzero(r < -tol)
            if cand.size == 0:
                return "optimal", _expand(xb, basis, n), y, basis
            k = int(cand[0])
        else:
            k = int(np.argmin(r))
            if r[k] >= -tol:
                return "optimal", _expand(xb, basis, n), y, basis
        d = np.linalg.solve(B, A[:, k])
        pos = d > tol
        if not pos.any():
            return "unbounded", _expand(xb, basis, n), y, basis
        ratios = np.full(m, np.inf)
        ratios[pos] = xb[pos] / d[pos]
        theta = ratios.min()
        ties = np.flatnonzero(np.abs(ratios - theta) <= tol * (1.0 + abs(theta)))
        # Bland tie-break: smallest variable index leaves
        leave = int(ties[np.argmin([basis[i] for i in ties])])
        if theta <= tol:
            degenerate += 1
            if degenerate > degenerate_budget // 2:
                use_bland = True
            if degenerate > degenerate_budget:
                raise NumericalFailure(
                    f"exceeded {degenerate_budget} degenerate pivots (Bland engaged)")
        basis[leave] = k
    raise NumericalFailure("simplex iteration limit reached")


def _expand(xb: np.ndarray, basis: list[int], n: int) -> np.ndarray:
    x = np.zeros(n)
    x[basis] = xb
    return x


def solve_lp(p: LinearProgram, tols: TolerancePolicy = DEFAULT_TOLS) -> LpResult:
    """Two-phase dense simplex.  Unbounded problems report value +/-inf in
    the problem's own sense; duals are signed for the minimization form."""
    tol = tols.lp_tol
    n = p.c.shape[0]
    sense = -1.0 if p.maximize else 1.0
    c0 = sense * p.c

    # assemble standard form: split free variables, add slacks for <= rows
    # and explicit rows for finite bounds
    rows_A = [p.A_ub, p.A_eq]
    rhs = [np.asarray(p.b_ub), np.asarray(p.b_eq)]
    kinds = ["ub"] * p.A_ub.shape[0] + ["eq"] * p.A_eq.shape[0]
    lo, hi = p.lower, p.upper
    bound_rows, bound_rhs = [], []
    for j in range(n):
        if np.isfinite(lo[j]) and lo[j] != 0.0:
            row = np.zeros(n)
            row[j] = -1.0
            bound_rows.append(row)
            bound_rhs.append(-lo[j])
        if np.isfinite(hi[j]):
            row = np.zeros(n)
            row[j] = 1.0
            bound_rows.append(row)
            bound_rhs.append(hi[j])
    if bound_rows:
        rows_A.insert(1, np.vstack(bound_rows))
        rhs.insert(1, np.asarray(bound_rhs))
        kinds = (["ub"] * p.A_ub.shape[0] + ["bound"] * len(bound_rows)
                 + ["eq"] * p.A_eq.shape[0])
    A_all = np.vstack(rows_A)
    b_all = np.concatenate(rhs)
    m = A_all.shape[0]

    nonneg_var = np.isfinite(lo) & (lo == 0.0)
    free_like = ~nonneg_var
    # columns: x+ for all, x- for free-like vars, slacks for ub/bound rows
    n_plus = n
    free_idx = np.flatnonzero(free_like)
    n_minus = free_idx.size
    slack_rows = [i for i, k in enumerate(kinds) if k in ("ub", "bound")]
    n_slack = len(slack_rows)
    n_std = n_plus + n_minus + n_slack

    A_std = np.zeros((m, n_std))
    A_std[:, :n] = A_all
    for jj, j in enumerate(free_idx):
        A_std[:, n + jj] = -A_all[:, j]
    for si, i in enumerate(slack_rows):
        A_std[i, n + n_minus + si] = 1.0
    c_std = np.zeros(n_std)
    c_std[:n] = c0
    for jj, j in enumerate(free_idx):
        c_std[n + jj] = -c0[j]

    if m == 0:
        # unconstrained: optimal only if the objective is identically zero
        if np.linalg.norm(c_std) <= tol:
            return LpResult("optimal", ExtReal.finite(0.0), np.zeros(n),
                            np.zeros(0), np.zeros(0))
        val = POS_INF if p.maximize else NEG_INF
        return LpResult("unbounded", val, None, None, None)

    # phase 1
    sign = np.where(b_all < 0, -1.0, 1.0)
    A1 = np.hstack([A_std, np.diag(sign)])
    c1 = np.concatenate([np.zeros(n_std), np.ones(m)])
    basis = list(range(n_std, n_std + m))
    budget = 10 * (m + n_std)
    status, x1, _, basis = _simplex_core(A1, b_all, c1, basis, tol, budget)
    if status != "optimal" or c1 @ x1 > tol * (1.0 + np.abs(b_all).sum()):
        return LpResult("infeasible", POS_INF if not p.maximize else NEG_INF,
                        None, None, None)
    # drive artificials out of the basis
    keep_rows = np.ones(m, dtype=bool)
    B = A1[:, basis]
    for pos_in_basis, var in enumerate(list(basis)):
        if var >= n_std:
            row_of = pos_in_basis
            # try pivoting in a structural column
            try:
                Binv_row = np.linalg.solve(B.T, np.eye(m)[:, row_of])
            except np.linalg.LinAlgError:
                raise NumericalFailure("singular basis after phase 1")
            piv = None
            for j in range(n_std):
                if j in basis:
                    continue
                if abs(Binv_row @ A1[:, j]) > 1e-9:
                    piv = j
                    break
            if piv is not None:
                basis[pos_in_basis] = piv
                B = A1[:, basis]
            else:
                keep_rows[row_of] = False  # redundant row
    if not keep_rows.all():
        A_std = A_std[keep_rows]
        b_all = b_all[keep_rows]
        basis = [basis[i] for i in range(m) if keep_rows[i]]
        m = A_std.shape[0]
    if any(v >= n_std for v in basis):
        raise NumericalFailure("could not remove artificial variables")

    status, x_std, y, basis = _simplex_core(A_std, b_all, c_std, basis, tol,
                                            10 * (m + n_std))
    if status == "unbounded":
        val = POS_INF if p.maximize else NEG_INF
        return LpResult("unbounded", val, None, None, None)

    x = x_std[:n].copy()
    for jj, j in enumerate(free_idx):
        x[j] -= x_std[n + jj]
    value = float(p.c @ x)
    # duals in the original row order (minimization sign convention)
    full_y = np.zeros(len(kinds))
    full_y[np.flatnonzero(keep_rows)] = y
    dual_ub = sense * full_y[: p.A_ub.shape[0]]
    dual_eq = sense * full_y[len(kinds) - p.A_eq.shape[0]:] if p.A_eq.shape[0] else np.zeros(0)
    return LpResult("optimal", ExtReal.finite(value), x, dual_ub, dual_eq)


# ---------------------------------------------------------------------------
# Projections
# ---------------------------------------------------------------------------


def soc_project(y: np.ndarray) -> np.ndarray:
    """Euclidean projection onto Q = {(y', t): ||y'|| <= t} (closed form)."""
    y = as_vector(y)
    head, tail = y[:-1], float(y[-1])
    s = float(np.linalg.norm(head))
    if s <= tail:
        return y.copy()
    if s <= -tail:
        return np.zeros_like(y)
    t = 0.5 * (s + tail)
    out = np.empty_like(y)
    out[:-1] = (t / s) * head if s > 0 else 0.0
    out[-1] = t
    return out


def soc_dist(Y: np.ndarray) -> np.ndarray:
    """Vectorized distance to Q for rows of Y."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    s = np.linalg.norm(Y[:, :-1], axis=1)
    t = Y[:, -1]
    inside = s <= t
    polar = s <= -t
    d = (s - t) / np.sqrt(2.0)
    d = np.where(polar, np.linalg.norm(Y, axis=1), d)
    return np.where(inside, 0.0, d)


def _project_affine(y: np.ndarray, E: np.ndarray, e: np.ndarray) -> np.ndarray:
    if E.shape[0] == 0:
        return y.copy()
    corr, *_ = np.linalg.lstsq(E, E @ y - e, rcond=None)
    # lstsq gives min-norm solution of E z = (Ey - e); y - z is the projection
    return y - corr


def _null_space_rows(rows: np.ndarray) -> np.ndarray:
    """Orthonormal basis (rows) of the null space of a row-stacked matrix."""
    rows = np.atleast_2d(rows)
    n = rows.shape[1]
    if rows.shape[0] == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(rows, full_matrices=True)
    rank = int(np.sum(s > 1e-12 * max(1.0, s[0] if s.size else 1.0)))
    return vt[rank:]


def _ldp(G: np.ndarray, h: np.ndarray):
    """Least-distance program min ||z|| s.t. G z <= h via one NNLS solve.

    Returns (z, ok); ok is False when the NNLS certificate looks degenerate
    and the caller should fall back to the active-set path.
    """
    from scipy.optimize import nnls

    keep = np.linalg.norm(G, axis=1) > 1e-14
    if (~keep).any():
        if (h[~keep] < -1e-12).any():
            return None, True  # 0 <= negative rhs: genuinely infeasible
        G, h = G[keep], h[keep]
    if G.shape[0] == 0:
        return np.zeros(G.shape[1]), True
    rn = np.linalg.norm(G, axis=1)
    Gn = G / rn[:, None]
    hn = h / rn
    n = G.shape[1]
    # standard form for least-distance programming asks for constraints
    # written as (G_std z >= h_std); ours flip sign
    Emat = np.vstack([-Gn.T, -hn[None, :]])
    f = np.zeros(n + 1)
    f[-1] = 1.0
    try:
        u, _ = nnls(Emat, f)
    except Exception:
        return None, False
    r = Emat @ u - f
    if abs(r[-1]) <= 1e-12:
        # infeasibility certificate, trustworthy only when the NNLS really
        # converged (the rewritten scipy solver can return garbage u)
        if float(np.linalg.norm(r)) <= 1e-10 and np.all(np.isfinite(u)) \
                and np.linalg.norm(u) < 1e12:
            return None, True
        return None, False
    z = -r[:-1] / r[-1]
    if not np.all(np.isfinite(z)):
        return None, False
    return z, True


def _project_polyhedron(poly: Polyhedron, y: np.ndarray,
                        tols: TolerancePolicy) -> np.ndarray:
    """Projection onto {Ax <= b, Ex = e}.

    Equalities are eliminated by restriction to their affine subspace, then
    the inequality-only least-distance program is solved by one NNLS; a
    primal active-set method (warm-started from a feasibility LP) backs the
    rare instances where the NNLS certificate degenerates.  Accuracy must
    stay well below cone_tol because the oracles compare distances against
    o(t^2) slacks.
    """
    A, b, E, e = poly.A, poly.b, poly.E, poly.e
    scale = 1.0 + float(np.linalg.norm(y))
    x0 = _project_affine(y, E, e)
    if E.shape[0] and np.linalg.norm(E @ x0 - e) > 1e-9 * (1.0 + np.linalg.norm(e)):
        raise EmptySet("equality system is inconsistent")
    viol = A @ x0 - b if A.shape[0] else np.zeros(0)
    if viol.size == 0 or viol.max() <= 1e-13 * scale:
        return x0
    basis = _null_space_rows(E) if E.shape[0] else np.eye(poly.dim)
    if basis.shape[0] == 0:
        raise EmptySet("affine subspace is a point outside the inequalities")
    Ar = A @ basis.T
    br = b - A @ x0
    # z in subspace coordinates relative to the projection of y
    sy = basis @ (y - x0)
    z, ok = _ldp(Ar, br - Ar @ sy)
    if ok and z is None:
        raise EmptySet("polyhedron is empty")
    if ok:
        cand = x0 + basis.T @ (sy + z)
        if A.shape[0] == 0 or (A @ cand - b).max() <= 1e-8 * scale:
            return cand
    return _project_polyhedron_activeset(poly, y, tols)


def _project_polyhedron_activeset(poly: Polyhedron, y: np.ndarray,
                                  tols: TolerancePolicy) -> np.ndarray:
    """Exact primal active-set projection fallback."""
    A, b, E, e = poly.A, poly.b, poly.E, poly.e
    n = poly.dim
    scale = 1.0 + float(np.linalg.norm(y))
    x = _feasible_point(poly, tols)
    work: list[int] = []
    max_outer = 12 * (A.shape[0] + E.shape[0]) + 48
    for _ in range(max_outer):
        C = np.vstack([E, A[work]]) if work or E.shape[0] else np.zeros((0, n))
        d = np.concatenate([e, b[work]]) if work or E.shape[0] else np.zeros(0)
        z = _project_affine(y, C, d)
        step = z - x
        alpha = 1.0
        blocker = -1
        if np.linalg.norm(step) > 1e-14 * scale:
            for i in range(A.shape[0]):
                if i in work:
                    continue
                ai = A[i]
                den = float(ai @ step)
                if den > 1e-14 * max(np.linalg.norm(ai) * np.linalg.norm(step), 1e-300):
                    cand = (b[i] - float(ai @ x)) / den
                    if cand < alpha:
                        alpha = max(cand, 0.0)
                        blocker = i
        if blocker >= 0:
            x = x + alpha * step
            work.append(blocker)
            continue
        x = z
        if not work:
            return x
        nu, *_ = np.linalg.lstsq(C.T, y - z, rcond=None)
        mults = nu[E.shape[0]:]
        if mults.size == 0 or mults.min() >= -1e-11 * scale:
            return x
        work.pop(int(np.argmin(mults)))
    raise NumericalFailure("polyhedron projection did not converge")


def _feasible_point(poly: Polyhedron, tols: TolerancePolicy) -> np.ndarray:
    n = poly.dim
    res = solve_lp(LinearProgram(np.zeros(n), A_ub=poly.A, b_ub=poly.b,
                                 A_eq=poly.E, b_eq=poly.e), tols)
    if res.status == "infeasible" or res.x is None:
        raise EmptySet("polyhedron is empty")
    return res.x


def project(spec: ConvexSetSpec, y, tols: TolerancePolicy = DEFAULT_TOLS) -> np.ndarray:
    """Euclidean projection onto a catalog set."""
    y = as_vector(y, spec.dim)
    if isinstance(spec, FullSpace):
        return y.copy()
    if isinstance(spec, Empty):
        raise EmptySet("cannot project onto the empty set")
    if isinstance(spec, SecondOrderCone):
        return soc_project(y)
    if isinstance(spec, Polyhedron):
        return _project_polyhedron(spec, y, tols)
    if isinstance(spec, Product):
        return np.concatenate([project(f, yi, tols)
                               for f, yi in zip(spec.factors, spec.split(y))])
    raise DimensionMismatch(f"cannot project onto {type(spec).__name__}")


def dist(spec: ConvexSetSpec, y, tols: TolerancePolicy = DEFAULT_TOLS) -> float:
    y = as_vector(y, spec.dim)
    if isinstance(spec, FullSpace):
        return 0.0
    if isinstance(spec, Empty):
        return float("inf")
    if isinstance(spec, SecondOrderCone):
        return float(soc_dist(y[None, :])[0])
    if isinstance(spec, Product):
        return float(np.sqrt(sum(dist(f, yi, tols) ** 2
                                 for f, yi in zip(spec.factors, spec.split(y)))))
    if isinstance(spec, Polyhedron):
        lower = batch_dist_lower(spec, y[None, :])[0]
        if lower <= 0.0:
            return 0.0
        return float(np.linalg.norm(y - project(spec, y, tols)))
    raise DimensionMismatch(f"no distance for {type(spec).__name__}")


def member(spec: ConvexSetSpec, y, tol: float = DEFAULT_TOLS.cone_tol,
           tols: TolerancePolicy = DEFAULT_TOLS) -> bool:
    """dist(y; set) <= tol, with the tolerance scaled by (1 + ||y||)."""
    y = as_vector(y, spec.dim)
    if isinstance(spec, Empty):
        return False
    thresh = tol * (1.0 + float(np.linalg.norm(y)))
    return batch_feasible(spec, y[None, :], thresh, tols)[0]


def batch_dist_lower(spec: ConvexSetSpec, Y: np.ndarray) -> np.ndarray:
    """Vectorized lower bound on distance (exact for SOC/full/product-of-such).

    For polyhedra the bound is the largest normalized halfspace violation,
    which is exact whenever it is zero.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if isinstance(spec, FullSpace):
        return np.zeros(Y.shape[0])
    if isinstance(spec, Empty):
        return np.full(Y.shape[0], np.inf)
    if isinstance(spec, SecondOrderCone):
        return soc_dist(Y)
    if isinstance(spec, Polyhedron):
        out = np.zeros(Y.shape[0])
        if spec.A.shape[0]:
            rn = np.maximum(np.linalg.norm(spec.A, axis=1), 1e-300)
            v = (Y @ spec.A.T - spec.b) / rn
            out = np.maximum(out, v.max(axis=1).clip(min=0.0))
        if spec.E.shape[0]:
            rn = np.maximum(np.linalg.norm(spec.E, axis=1), 1e-300)
            v = np.abs(Y @ spec.E.T - spec.e) / rn
            out = np.maximum(out, v.max(axis=1))
        return out
    if isinstance(spec, Product):
        k, total = 0, np.zeros(Y.shape[0])
        for f in spec.factors:
            total = total + batch_dist_lower(f, Y[:, k : k + f.dim]) ** 2
            k += f.dim
        return np.sqrt(total)
    raise DimensionMismatch(f"no batch distance for {type(spec).__name__}")


def batch_feasible(spec: ConvexSetSpec, Y: np.ndarray, thresh: float,
                   tols: TolerancePolicy = DEFAULT_TOLS) -> np.ndarray:
    """Exact mask of dist(row; set) <= thresh for every row of Y.

    Uses the vectorized lower bound to decide all clear-cut rows and exact
    projections only for the borderline ones.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    lower = batch_dist_lower(spec, Y)
    mask = lower <= 0.0
    exact_kinds = (SecondOrderCone, FullSpace, Empty)
    if isinstance(spec, exact_kinds) or _product_of(spec, exact_kinds):
        return lower <= thresh
    border = (~mask) & (lower <= thresh)
    for i in np.flatnonzero(border):
        mask[i] = dist(spec, Y[i], tols) <= thresh
    return mask


def _product_of(spec: ConvexSetSpec, kinds) -> bool:
    if not isinstance(spec, Product):
        return False
    return all(isinstance(f, kinds) or _product_of(f, kinds) for f in spec.factors)


# ---------------------------------------------------------------------------
# Support functions
# ---------------------------------------------------------------------------


def support_function(spec: ConvexSetSpec, v,
                     tols: TolerancePolicy = DEFAULT_TOLS) -> ExtReal:
    """sup <v, y> over the set; -inf on the empty set."""
    v = as_vector(v, spec.dim)
    if isinstance(spec, Empty):
        return NEG_INF
    if isinstance(spec, FullSpace):
        if np.linalg.norm(v) <= tols.cone_tol:
            return ExtReal.finite(0.0)
        return POS_INF
    if isinstance(spec, SecondOrderCone):
        # self-dual cone: support is 0 exactly on the polar -Q
        nv = float(np.linalg.norm(v))
        if np.linalg.norm(v[:-1]) <= -v[-1] + tols.cone_tol * (1.0 + nv):
            return ExtReal.finite(0.0)
        return POS_INF
    if isinstance(spec, Product):
        total = ExtReal.finite(0.0)
        for f, vi in zip(spec.factors, spec.split(v)):
            s = support_function(f, vi, tols)
            if s.is_neg_inf:
                return NEG_INF
            total = total + s
        return total
    if isinstance(spec, Polyhedron):
        res = solve_lp(LinearProgram(v, A_ub=spec.A, b_ub=spec.b,
                                     A_eq=spec.E, b_eq=spec.e, maximize=True), tols)
        if res.status == "infeasible":
            return NEG_INF
        if res.status == "unbounded":
            return POS_INF
        return res.value
    raise DimensionMismatch(f"no support function for {type(spec).__name__}")


# ---------------------------------------------------------------------------
# Vertex enumeration (small systems)
# ---------------------------------------------------------------------------


def enumerate_vertices(A_ub: np.ndarray, b_ub: np.ndarray,
                       A_eq: np.ndarray, b_eq: np.ndarray,
                       tol: float = 1e-9, max_combos: int = 20000) -> np.ndarray:
    """Vertices of {x: A_ub x <= b_ub, A_eq x = b_eq} by active-set
    enumeration; intended for small dimensions only."""
    from itertools import combinations

    A_ub = np.atleast_2d(np.asarray(A_ub, dtype=float))
    A_eq = np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_ub = np.asarray(b_ub, dtype=float).ravel()
    b_eq = np.asarray(b_eq, dtype=float).ravel()
    n = A_ub.shape[1] if A_ub.size else A_eq.shape[1]
    rank_eq = np.linalg.matrix_rank(A_eq) if A_eq.size else 0
    need = n - rank_eq
    m = A_ub.shape[0]
    if need < 0 or m < need:
        combos = [()] if need == 0 else []
    else:
        combos = list(combinations(range(m), need))
    if len(combos) > max_combos:
        raise NumericalFailure("vertex enumeration combinatorics too large")
    verts = []
    for comb in combos:
        C = np.vstack([A_eq, A_ub[list(comb)]]) if comb or A_eq.size else A_eq
        d = np.concatenate([b_eq, b_ub[list(comb)]]) if comb or A_eq.size else b_eq
        if C.size == 0:
            continue
        if np.linalg.matrix_rank(C) < n:
            continue
        x, *_ = np.linalg.lstsq(C, d, rcond=None)
        if np.linalg.norm(C @ x - d) > tol * (1.0 + np.linalg.norm(d)):
            continue
        if m and (A_ub @ x - b_ub).max() > tol * (1.0 + np.linalg.norm(x)):
            continue
        if not any(np.linalg.norm(x - v) <= 1e-8 * (1.0 + np.linalg.norm(x)) for v in verts):
            verts.append(x)
    return np.array(verts) if verts else np.zeros((0, n))
