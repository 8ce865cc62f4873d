"""Named fixture corpus used by the CLI, the tests, and the acceptance
suite.  Each fixture bundles a constraint system, a base pair, an optional
objective, and named probe directions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .constraint_system import ConstraintSystem, SmoothMap
from .set_catalog import (
    ConvexSetSpec,
    FullSpace,
    Polyhedron,
    Product,
    SecondOrderCone,
)

__all__ = ["Fixture", "list_fixtures", "make_fixture", "random_polyhedral_fixture"]


@dataclass
class Fixture:
    name: str
    cs: ConstraintSystem
    x: np.ndarray
    v: np.ndarray
    phi: Optional[SmoothMap] = None
    lam: Optional[np.ndarray] = None
    directions: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


def _orthant() -> Fixture:
    cs = ConstraintSystem(SmoothMap.identity(2), Polyhedron.orthant_nonpos(2))
    return Fixture(
        name="orthant",
        cs=cs,
        x=np.zeros(2),
        v=np.array([1.0, 0.0]),
        phi=SmoothMap.from_polynomial(2, [[(-1.0, (1, 0))]]),
        lam=np.array([1.0, 0.0]),
        directions={"critical": np.array([0.0, -1.0]),
                    "noncritical": np.array([1.0, 0.0])},
    )


def _parabola(c: float = 0.0) -> Fixture:
    phi = SmoothMap.from_polynomial(2, [[(1.0, (0, 1)), (float(c), (2, 0))]])
    f = SmoothMap.from_polynomial(2, [[(1.0, (2, 0)), (-1.0, (0, 1))]])
    cs = ConstraintSystem(f, Polyhedron.orthant_nonpos(1))
    return Fixture(
        name="parabola",
        cs=cs,
        x=np.zeros(2),
        v=np.array([0.0, -1.0]),
        phi=phi,
        lam=np.array([1.0]),
        directions={"critical": np.array([1.0, 0.0]),
                    "noncritical": np.array([0.0, 1.0])},
        params={"c": float(c)},
    )


def _soc_boundary() -> Fixture:
    cs = ConstraintSystem(SmoothMap.identity(3), SecondOrderCone(3))
    phi = SmoothMap.from_polynomial(3, [[(-1.0, (1, 0, 0)), (1.0, (0, 0, 1))]])
    return Fixture(
        name="soc_boundary",
        cs=cs,
        x=np.array([1.0, 0.0, 1.0]),
        v=np.array([1.0, 0.0, -1.0]),
        phi=phi,
        lam=np.array([1.0, 0.0, -1.0]),
        directions={"critical": np.array([1.0, 1.0, 1.0]),
                    "noncritical": np.array([1.0, 0.0, 0.0])},
    )


def _soc_vertex() -> Fixture:
    cs = ConstraintSystem(SmoothMap.identity(3), SecondOrderCone(3))
    phi = SmoothMap.from_polynomial(3, [[(-1.0, (1, 0, 0)), (1.0, (0, 0, 1))]])
    return Fixture(
        name="soc_vertex",
        cs=cs,
        x=np.zeros(3),
        v=np.array([1.0, 0.0, -1.0]),
        phi=phi,
        lam=np.array([1.0, 0.0, -1.0]),
        directions={"critical": np.array([1.0, 0.0, 1.0]),
                    "noncritical": np.array([0.0, 1.0, 0.0])},
    )


def _degenerate_multipliers() -> Fixture:
    f = SmoothMap.from_polynomial(1, [[(1.0, (1,))], [(1.0, (1,))]])
    cs = ConstraintSystem(f, Polyhedron.orthant_nonpos(2))
    phi = SmoothMap.from_polynomial(1, [[(-1.0, (1,))]])
    return Fixture(
        name="degenerate_multipliers",
        cs=cs,
        x=np.zeros(1),
        v=np.array([1.0]),
        phi=phi,
        lam=np.array([0.5, 0.5]),
        directions={"critical": np.array([0.0]),
                    "noncritical": np.array([1.0])},
    )


def _intersection_halfplanes() -> Fixture:
    h1 = Polyhedron.from_inequalities(np.array([[1.0, 0.0]]), np.zeros(1))
    h2 = Polyhedron.from_inequalities(np.array([[0.0, 1.0]]), np.zeros(1))
    f = SmoothMap.linear(np.vstack([np.eye(2), np.eye(2)]))
    cs = ConstraintSystem(f, Product((h1, h2)))
    return Fixture(
        name="intersection_halfplanes",
        cs=cs,
        x=np.zeros(2),
        v=np.array([1.0, 1.0]),
        lam=np.array([1.0, 0.0, 0.0, 1.0]),
        directions={"critical": np.array([0.0, 0.0]),
                    "noncritical": np.array([1.0, 0.0])},
        extra={"omega1": h1, "omega2": h2},
    )


def _epi_alpha(alpha: float = 1.5) -> Fixture:
    alpha = float(alpha)
    if not 1.0 < alpha < 2.0:
        raise ValueError("alpha must lie strictly between 1 and 2")
    if abs(alpha - 1.5) < 1e-12:
        # polynomial form: epi = {x: -x2 <= 0, x1^3 - x2^2 <= 0}
        f = SmoothMap.from_polynomial(
            2, [[(-1.0, (0, 1))], [(1.0, (3, 0)), (-1.0, (0, 2))]])
        cs = ConstraintSystem(f, Polyhedron.orthant_nonpos(2))
    else:
        def value(x):
            base = max(float(x[0]), 0.0) ** alpha
            return np.array([base - float(x[1])])

        def jacobian(x):
            g = alpha * max(float(x[0]), 0.0) ** (alpha - 1.0)
            return np.array([[g, -1.0]])

        f = SmoothMap(2, 1, value, jacobian)
        cs = ConstraintSystem(f, Polyhedron.orthant_nonpos(1))
    return Fixture(
        name="epi_alpha",
        cs=cs,
        x=np.zeros(2),
        v=np.array([0.0, -1.0]),
        lam=None,
        directions={"regular": np.array([-1.0, 0.0]),
                    "fails_t2": np.array([1.0, 0.0])},
        params={"alpha": alpha},
    )


def _strongly_convex() -> Fixture:
    phi = SmoothMap.from_polynomial(2, [[(1.0, (2, 0)), (1.0, (0, 2))]])
    cs = ConstraintSystem(SmoothMap.identity(2), FullSpace(2))
    return Fixture(
        name="strongly_convex",
        cs=cs,
        x=np.zeros(2),
        v=np.zeros(2),
        phi=phi,
        lam=np.zeros(2),
        directions={"critical": np.array([1.0, 0.0])},
    )


_BUILDERS: dict = {
    "orthant": _orthant,
    "parabola": _parabola,
    "soc_boundary": _soc_boundary,
    "soc_vertex": _soc_vertex,
    "degenerate_multipliers": _degenerate_multipliers,
    "intersection_halfplanes": _intersection_halfplanes,
    "epi_alpha": _epi_alpha,
    "strongly_convex": _strongly_convex,
}


def list_fixtures() -> list[str]:
    return sorted(_BUILDERS)


def make_fixture(name: str, **params) -> Fixture:
    if name not in _BUILDERS:
        raise KeyError(f"unknown fixture {name!r}; known: {list_fixtures()}")
    return _BUILDERS[name](**params)


def random_polyhedral_fixture(seed: int, n: int = 3, rows: int = 4) -> Fixture:
    """Random polyhedral target with the identity map: a boundary base
    point with a random active set and a normal built from it, guaranteed
    to leave a nontrivial critical cone."""
    rng = np.random.default_rng(seed)
    for _ in range(64):
        A = rng.standard_normal((rows, n))
        A /= np.linalg.norm(A, axis=1, keepdims=True)
        xbar = rng.standard_normal(n)
        n_active = int(rng.integers(1, min(rows, n - 1) + 1))
        active = rng.choice(rows, size=n_active, replace=False)
        b = A @ xbar + rng.random(rows) + 0.1
        b[active] = A[active] @ xbar
        mults = rng.random(n_active) + 0.2
        v = mults @ A[active]
        theta = Polyhedron.from_inequalities(A, b)
        cs = ConstraintSystem(SmoothMap.identity(n), theta)
        # critical cone must contain a nonzero direction
        from .set_catalog import critical_cone, cone_contains, cone_to_set
        from .convex_subproblems import project

        K = critical_cone(theta, xbar, v)
        found = None
        for _ in range(40):
            cand = rng.standard_normal(n)
            try:
                wk = project(cone_to_set(K), cand)
            except Exception:
                continue
            if np.linalg.norm(wk) > 1e-6:
                found = wk / np.linalg.norm(wk)
                break
        if found is None:
            continue
        noncrit = None
        for _ in range(40):
            cand = rng.standard_normal(n)
            cand /= np.linalg.norm(cand)
            if not cone_contains(K, cand):
                noncrit = cand
                break
        if noncrit is None:
            continue
        return Fixture(
            name=f"random_polyhedral_{seed}",
            cs=cs,
            x=xbar,
            v=v,
            lam=None,
            directions={"critical": found, "noncritical": noncrit},
            params={"seed": seed, "n": n, "rows": rows},
        )
    raise RuntimeError("could not build a random polyhedral fixture")
