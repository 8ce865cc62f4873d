"""Batch front end: problem-file ingestion, command dispatch, reports.

Problem files are JSON documents with polynomial objective/constraint data
(exact derivatives, language neutral) or a reference to a named fixture.
Reports are deterministic for a fixed seed: stdout carries the report
(text or ``--json``), wall time goes to stderr only.

Exit codes: 0 all certificates pass, 2 approximate-only certificates,
1 failure or violation found.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import fixtures as fixture_mod
from .auglag import d2_auglag, eval_auglag, growth_threshold
from .constraint_system import (
    BasePoint,
    ConstraintSystem,
    SmoothMap,
    cq_diagnostics,
    critical_cone_omega,
    multiplier_set,
    tangent_cone_omega,
)
from .errors import ParseError, PararegError
from .graphical_derivative import dn_omega_membership
from .numeric_core import DEFAULT_TOLS, TolerancePolicy
from .oracles import QuotientGrid, d2_quotient_estimate, t2_membership
from .optimality import OptProblem, growth_sample, kkt_check, second_order_conditions
from .second_subderivative import d2_delta_omega, dual_value, primal_value
from .set_catalog import (
    ConeRep,
    ConvexSetSpec,
    FullSpace,
    Polyhedron,
    Product,
    SecondOrderCone,
    SocCone,
    normal_cone,
)

__all__ = ["main", "run_command", "parse_problem_file", "serialize_problem"]

COMMANDS = ("cones", "subderivative", "optimality", "auglag", "gder", "oracle",
            "diagnose", "fixtures")

_FILE_FIELDS = {"n", "m", "f", "phi", "theta", "base_point", "multiplier",
                "directions", "tolerances", "seed", "fixture", "params"}
_TOL_FIELDS = {"eq_tol", "cone_tol", "oracle_tol", "lp_tol"}


# ---------------------------------------------------------------------------
# Problem files
# ---------------------------------------------------------------------------


def _poly_from_json(coords, n: int):
    out = []
    for coord in coords:
        mono = []
        for item in coord:
            if set(item) - {"coeff", "exps"}:
                raise ParseError(f"unknown monomial fields {sorted(set(item) - {'coeff', 'exps'})}")
            mono.append((float(item["coeff"]), tuple(int(e) for e in item["exps"])))
        out.append(tuple(mono))
    return SmoothMap.from_polynomial(n, tuple(out))


def _poly_to_json(sm: SmoothMap):
    if sm.polynomial is None:
        raise ParseError("only polynomial maps serialize to problem files")
    return [[{"coeff": c, "exps": list(e)} for c, e in coord]
            for coord in sm.polynomial]


def _theta_from_json(doc) -> ConvexSetSpec:
    variant = doc.get("variant")
    known = {"variant", "dim", "A", "b", "E", "e", "factors"}
    if set(doc) - known:
        raise ParseError(f"unknown theta fields {sorted(set(doc) - known)}")
    if variant == "orthant_nonpos":
        return Polyhedron.orthant_nonpos(int(doc["dim"]))
    if variant == "zero":
        return Polyhedron.zero(int(doc["dim"]))
    if variant == "polyhedron":
        n = len(doc["A"][0]) if doc.get("A") else len(doc["E"][0])
        A = np.asarray(doc.get("A", np.zeros((0, n))), dtype=float).reshape(-1, n)
        b = np.asarray(doc.get("b", []), dtype=float)
        E = np.asarray(doc.get("E", np.zeros((0, n))), dtype=float).reshape(-1, n)
        e = np.asarray(doc.get("e", []), dtype=float)
        return Polyhedron(A, b, E, e)
    if variant == "soc":
        return SecondOrderCone(int(doc["dim"]))
    if variant == "full":
        return FullSpace(int(doc["dim"]))
    if variant == "product":
        return Product(tuple(_theta_from_json(f) for f in doc["factors"]))
    raise ParseError(f"unknown theta variant {variant!r}")


def _theta_to_json(theta: ConvexSetSpec):
    if isinstance(theta, SecondOrderCone):
        return {"variant": "soc", "dim": theta.m}
    if isinstance(theta, FullSpace):
        return {"variant": "full", "dim": theta.n}
    if isinstance(theta, Product):
        return {"variant": "product",
                "factors": [_theta_to_json(f) for f in theta.factors]}
    if isinstance(theta, Polyhedron):
        return {"variant": "polyhedron", "A": theta.A.tolist(),
                "b": theta.b.tolist(), "E": theta.E.tolist(),
                "e": theta.e.tolist()}
    raise ParseError(f"cannot serialize {type(theta).__name__}")


@dataclass
class Problem:
    cs: ConstraintSystem
    x: np.ndarray
    v: Optional[np.ndarray]
    phi: Optional[SmoothMap]
    directions: list
    tols: TolerancePolicy
    seed: int
    source: dict
    lam: Optional[np.ndarray] = None

    def opt_problem(self) -> OptProblem:
        if self.phi is None:
            raise ParseError("this command needs an objective (phi) in the file")
        return OptProblem(self.phi, self.cs)

    def base_point(self) -> BasePoint:
        v = self.v
        if v is None:
            if self.phi is None:
                raise ParseError("no multiplier direction: give 'multiplier' or phi")
            v = -self.phi.jacobian(self.x)[0]
        return BasePoint(self.cs, self.x, v, tols=self.tols)


def parse_problem_dict(doc: dict) -> Problem:
    unknown = set(doc) - _FILE_FIELDS
    if unknown:
        raise ParseError(f"unknown problem fields {sorted(unknown)}")
    tols_doc = doc.get("tolerances", {})
    if set(tols_doc) - _TOL_FIELDS:
        raise ParseError(f"unknown tolerance fields {sorted(set(tols_doc) - _TOL_FIELDS)}")
    tols = TolerancePolicy(**{k: float(v) for k, v in tols_doc.items()}) \
        if tols_doc else DEFAULT_TOLS
    seed = int(doc.get("seed", 0))
    if "fixture" in doc:
        fx = fixture_mod.make_fixture(doc["fixture"], **doc.get("params", {}))
        x = np.asarray(doc.get("base_point", fx.x), dtype=float)
        mult = doc.get("multiplier")
        if mult == "from-phi" or mult is None:
            v = fx.v
        else:
            v = np.asarray(mult, dtype=float)
        dirs = [np.asarray(w, dtype=float) for w in doc.get("directions", [])]
        if not dirs:
            dirs = [w for w in fx.directions.values()]
        return Problem(fx.cs, x, v, fx.phi, dirs, tols, seed, doc, fx.lam)
    for req in ("n", "m", "f", "theta", "base_point"):
        if req not in doc:
            raise ParseError(f"missing required field {req!r}")
    n, m = int(doc["n"]), int(doc["m"])
    f = _poly_from_json(doc["f"], n)
    if f.m != m:
        raise ParseError("f coordinate count disagrees with m")
    theta = _theta_from_json(doc["theta"])
    cs = ConstraintSystem(f, theta)
    phi = _poly_from_json([doc["phi"]], n) if "phi" in doc else None
    x = np.asarray(doc["base_point"], dtype=float)
    mult = doc.get("multiplier")
    if mult == "from-phi":
        if phi is None:
            raise ParseError("'from-phi' multiplier needs phi")
        v = None
    elif mult is None:
        v = None
    else:
        v = np.asarray(mult, dtype=float)
    dirs = [np.asarray(w, dtype=float) for w in doc.get("directions", [])]
    return Problem(cs, x, v, phi, dirs, tols, seed, doc)


def parse_problem_file(path: str) -> Problem:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as ex:
        raise ParseError(f"{path}:{ex.lineno}:{ex.colno}: {ex.msg}") from ex
    except OSError as ex:
        raise ParseError(f"cannot read {path}: {ex}") from ex
    if not isinstance(doc, dict):
        raise ParseError("problem file must hold a JSON object")
    return parse_problem_dict(doc)


def serialize_problem(p: Problem) -> dict:
    """Round-trippable document for a polynomial problem."""
    if "fixture" in p.source:
        out = {"fixture": p.source["fixture"]}
        if p.source.get("params"):
            out["params"] = p.source["params"]
        if p.directions:
            out["directions"] = [list(map(float, w)) for w in p.directions]
        out["seed"] = p.seed
        return out
    out = {
        "n": p.cs.n,
        "m": p.cs.m,
        "f": _poly_to_json(p.cs.f),
        "theta": _theta_to_json(p.cs.theta),
        "base_point": [float(t) for t in p.x],
        "seed": p.seed,
    }
    if p.phi is not None:
        out["phi"] = _poly_to_json(p.phi)[0]
    if p.v is not None:
        out["multiplier"] = [float(t) for t in p.v]
    if p.directions:
        out["directions"] = [list(map(float, w)) for w in p.directions]
    return out


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return [_jsonable(t) for t in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(t) for t in obj]
    if hasattr(obj, "as_float"):
        f = obj.as_float()
        return f if np.isfinite(f) else ("+inf" if f > 0 else "-inf")
    return obj


@dataclass
class Report:
    command: str
    inputs: dict
    results: dict
    certificates: list = field(default_factory=list)  # (name, status) status in pass|approximate|fail
    oracle_crosscheck: Optional[dict] = None
    seed: int = 0

    def exit_code(self) -> int:
        statuses = [s for _, s in self.certificates]
        if any(s == "fail" for s in statuses):
            return 1
        if any(s == "approximate" for s in statuses):
            return 2
        return 0

    def to_json(self) -> str:
        doc = {
            "command": self.command,
            "inputs": _jsonable(self.inputs),
            "results": _jsonable(self.results),
            "certificates": [[n, s] for n, s in self.certificates],
            "oracle_crosscheck": _jsonable(self.oracle_crosscheck),
            "seed": self.seed,
            "exit_code": self.exit_code(),
        }
        return json.dumps(doc, sort_keys=True, indent=2)

    def to_text(self) -> str:
        lines = [f"parareg {self.command}  (seed {self.seed})"]
        lines.append("inputs:")
        for k, v in sorted(self.inputs.items()):
            lines.append(f"  {k}: {_fmt(v)}")
        lines.append("results:")
        for k, v in sorted(self.results.items()):
            lines.append(f"  {k}: {_fmt(v)}")
        if self.oracle_crosscheck is not None:
            lines.append("oracle cross-check:")
            for k, v in sorted(self.oracle_crosscheck.items()):
                lines.append(f"  {k}: {_fmt(v)}")
        if self.certificates:
            lines.append("certificates:")
            for name, status in self.certificates:
                lines.append(f"  [{status.upper():11s}] {name}")
        lines.append(f"exit code: {self.exit_code()}")
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    v = _jsonable(v)
    return json.dumps(v, sort_keys=True)


# ---------------------------------------------------------------------------
# Command handlers
# ---------------------------------------------------------------------------


def _cone_description(cone) -> dict:
    if isinstance(cone, ConeRep):
        out = {"kind": "polyhedral"}
        if cone.ineq is not None:
            out["ineq_rows"] = cone.ineq
        if cone.eq is not None:
            out["eq_rows"] = cone.eq
        if cone.rays is not None:
            out["rays"] = cone.rays
        if cone.lineality is not None:
            out["lineality"] = cone.lineality
        return out
    if isinstance(cone, SocCone):
        return {"kind": "second_order_cone", "dim": cone.dim, "sign": cone.sign}
    return {"kind": type(cone).__name__}


def _cmd_cones(p: Problem, args) -> Report:
    bp = p.base_point()
    t = tangent_cone_omega(p.cs, bp, p.tols)
    k = critical_cone_omega(p.cs, bp, p.tols)
    nth = normal_cone(p.cs.theta, bp.fx, p.tols)
    ms = multiplier_set(p.cs, bp, p.tols)
    results = {
        "tangent_cone": _cone_description(t),
        "critical_cone": _cone_description(k),
        "theta_normal_cone": _cone_description(nth),
        "multiplier_set_kind": ms.kind,
    }
    certs = [("multiplier set nonempty", "pass" if not ms.is_empty else "fail")]
    return Report("cones", {"x": bp.x, "v": bp.v}, results, certs, None, p.seed)


def _directions(p: Problem, args) -> list:
    dirs = []
    for spec in args.w or []:
        dirs.append(np.asarray([float(t) for t in spec.split(",")], dtype=float))
    if not dirs:
        dirs = list(p.directions)
    if not dirs:
        raise ParseError("no directions: pass --w or put 'directions' in the file")
    return dirs


def _cmd_subderivative(p: Problem, args) -> Report:
    bp = p.base_point()
    results = {}
    certs = []
    oracle_out = {} if args.oracle else None
    for i, w in enumerate(_directions(p, args)):
        key = f"w{i}=[" + ",".join(repr(float(t)) for t in w) + "]"
        d2 = d2_delta_omega(p.cs, bp, w, tols=p.tols)
        entry = {"value": d2.value, "certificate": d2.certificate, "gap": d2.gap}
        if d2.value.is_finite:
            pv = primal_value(p.cs, bp, w, p.tols)
            entry["primal"] = pv.value
            certs.append((f"no duality gap at {key}",
                          "pass" if d2.certificate == "exact" else "approximate"))
        results[key] = entry
        if args.oracle:
            grid = QuotientGrid(seed=p.seed)
            est = d2_quotient_estimate(p.cs, bp.x, bp.v, w, grid, p.tols)
            oracle_out[key] = {"estimate": est.value, "trend": est.trend}
            if d2.value.is_finite and est.value.is_finite:
                ok = abs(d2.value.value - est.value.value) <= \
                    p.tols.oracle_tol * (1 + abs(d2.value.value))
                certs.append((f"oracle agreement at {key}", "pass" if ok else "fail"))
            else:
                both_inf = (not d2.value.is_finite) and est.diverging
                certs.append((f"oracle agreement at {key}",
                              "pass" if both_inf else "fail"))
    return Report("subderivative", {"x": bp.x, "v": bp.v}, results, certs,
                  oracle_out, p.seed)


def _cmd_optimality(p: Problem, args) -> Report:
    prob = p.opt_problem()
    chk = kkt_check(prob, p.x, p.tols)
    cert = second_order_conditions(prob, p.x, seed=p.seed, tols=p.tols)
    results = {
        "kkt_residual": chk["residual"],
        "multiplier_kind": chk["multiplier_set"].kind,
        "necessary_holds": cert.necessary_holds,
        "sufficient_holds": cert.sufficient_holds,
        "ell_hat": cert.ell_hat,
        "method": cert.method,
    }
    if cert.worst_direction is not None:
        results["worst_direction"] = cert.worst_direction
    certs = [("kkt residual within tolerance",
              "pass" if chk["residual"] <= p.tols.eq_tol * (1 + np.linalg.norm(chk["v"])) else "fail"),
             ("second-order sufficient condition",
              "pass" if cert.sufficient_holds else "fail")]
    oracle_out = None
    if args.oracle and np.isfinite(cert.ell_hat) and cert.ell_hat > 0:
        g = growth_sample(prob, p.x, 0.9 * cert.ell_hat,
                          eps=args.eps, samples=args.samples, seed=p.seed,
                          tols=p.tols)
        oracle_out = {"growth_at_0.9_ell": "holds" if g.holds else "violated",
                      "largest_passing_ell": g.largest_passing_ell}
        certs.append(("sampled growth at 0.9*ell_hat",
                      "pass" if g.holds else "fail"))
    return Report("optimality", {"x": p.x}, results, certs, oracle_out, p.seed)


def _cmd_auglag(p: Problem, args) -> Report:
    prob = p.opt_problem()
    lam = p.lam
    if lam is None:
        chk = kkt_check(prob, p.x, p.tols)
        lam = chk["multiplier_set"].an_element(p.tols)
        if lam is None:
            raise ParseError("no multiplier available for the augmented Lagrangian")
    rho_grid = tuple(float(t) for t in args.rho_grid.split(",")) if args.rho_grid \
        else (1.0, 2.0, 5.0, 10.0, 50.0, 100.0)
    rep = growth_threshold(prob, p.x, lam, rho_grid, ell=args.ell, eps=args.eps,
                           samples=args.samples, seed=p.seed, tols=p.tols)
    results = {
        "rho_bar": rep.rho_bar if rep.rho_bar is not None else "none",
        "ell": rep.ell,
        "eps": rep.eps,
        "per_rho": {str(r): {"positivity": pos, "growth": g.holds}
                    for r, pos, g in rep.per_rho},
        "sufficient_without_cq": rep.sufficient_without_cq,
    }
    certs = [("equivalence of growth and sufficiency verdicts",
              "pass" if rep.consistent else "fail")]
    if rep.rho_bar is not None:
        certs.append(("grid threshold found", "pass"))
    return Report("auglag", {"x": p.x, "lam": lam}, results, certs, None, p.seed)


def _cmd_gder(p: Problem, args) -> Report:
    bp = p.base_point()
    if not args.w or not args.q:
        raise ParseError("gder needs --w and --q")
    w = np.asarray([float(t) for t in args.w[0].split(",")])
    q = np.asarray([float(t) for t in args.q.split(",")])
    ans = dn_omega_membership(p.cs, bp, w, q, seed=p.seed, tols=p.tols)
    results = {"membership": ans.membership, "method": ans.method}
    if ans.witness_multiplier is not None:
        results["witness_multiplier"] = ans.witness_multiplier
    if ans.witness_normal_component is not None:
        results["witness_eta"] = ans.witness_normal_component
    oracle_out = None
    certs = []
    if args.oracle:
        from .oracles import gph_normal_tangent_sample

        est = gph_normal_tangent_sample(p.cs, bp, w, q,
                                        QuotientGrid(seed=p.seed), p.tols)
        oracle_out = {"trend": est.trend}
        agree = (ans.membership and est.converged) or \
                (not ans.membership and est.diverging)
        certs.append(("oracle agreement", "pass" if agree else "fail"))
    certs.append(("method exact",
                  "pass" if ans.method == "unique_multiplier_exact" else "approximate"))
    return Report("gder", {"x": bp.x, "v": bp.v, "w": w, "q": q}, results,
                  certs, oracle_out, p.seed)


def _cmd_oracle(p: Problem, args) -> Report:
    grid = QuotientGrid(seed=p.seed)
    results = {}
    certs = []
    if args.t2:
        if not args.w:
            raise ParseError("oracle --t2 needs --w")
        w = np.asarray([float(t) for t in args.w[0].split(",")])
        if args.u:
            us = [np.asarray([float(t) for t in args.u.split(",")])]
        else:
            grid_1d = np.linspace(-10, 10, 5)
            us = [np.array([a, b]) for a in grid_1d for b in grid_1d] \
                if p.cs.n == 2 else [np.zeros(p.cs.n)]
        verdicts = {}
        for u in us:
            est = t2_membership(p.cs, p.x, w, u, grid, p.tols)
            verdicts[",".join(repr(float(t)) for t in u)] = est.trend
        results["t2"] = verdicts
        if all(v == "diverging_to_inf" for v in verdicts.values()):
            results["summary"] = "T2 empty (diverging)"
        certs.append(("oracle completed", "pass"))
    else:
        bp = p.base_point()
        for i, w in enumerate(_directions(p, args)):
            est = d2_quotient_estimate(p.cs, bp.x, bp.v, w, grid, p.tols)
            results[f"w{i}"] = {"estimate": est.value, "trend": est.trend}
        certs.append(("oracle completed", "pass"))
    return Report("oracle", {"x": p.x}, results, certs, None, p.seed)


def _cmd_diagnose(p: Problem, args) -> Report:
    bp = p.base_point()
    diag = cq_diagnostics(p.cs, bp, seed=p.seed, tols=p.tols)
    results = {
        "mrcq": diag["mrcq"],
        "mscq_estimate": "unbounded" if diag["mscq_unbounded"]
        else diag["mscq_estimate"],
    }
    certs = [("basic constraint qualification", "pass" if diag["mrcq"] else "fail"),
             ("mscq estimate bounded",
              "pass" if not diag["mscq_unbounded"] else "fail")]
    return Report("diagnose", {"x": bp.x}, results, certs, None, p.seed)


def _cmd_fixtures(args) -> Report:
    names = fixture_mod.list_fixtures()
    results = {"fixtures": names, "count": len(names)}
    if args.write_dir:
        import os

        os.makedirs(args.write_dir, exist_ok=True)
        for name in names:
            doc = {"fixture": name}
            if name == "parabola":
                doc["params"] = {"c": 0.0}
            if name == "epi_alpha":
                doc["params"] = {"alpha": 1.5}
            with open(os.path.join(args.write_dir, f"{name}.json"), "w",
                      encoding="utf-8") as fh:
                json.dump(doc, fh, sort_keys=True, indent=2)
        results["written_to"] = args.write_dir
    return Report("fixtures", {}, results, [("fixtures listed", "pass")], None, 0)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="parareg",
                                 description="second-order variational objects "
                                             "of constraint systems")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("file", nargs="?", help="problem file (JSON)")
    ap.add_argument("--w", action="append", help="direction, comma separated")
    ap.add_argument("--q", help="graphical-derivative candidate, comma separated")
    ap.add_argument("--u", help="second-order tangent candidate, comma separated")
    ap.add_argument("--t2", action="store_true", help="oracle: second-order tangency test")
    ap.add_argument("--rho-grid", dest="rho_grid", help="comma separated penalty grid")
    ap.add_argument("--eps", type=float, default=None)
    ap.add_argument("--ell", type=float, default=None)
    ap.add_argument("--samples", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--oracle", action="store_true",
                    help="append brute-force cross-checks")
    ap.add_argument("--json", action="store_true", help="machine-readable report")
    ap.add_argument("--c", type=float, default=None, help="parabola family parameter")
    ap.add_argument("--alpha", type=float, default=None, help="epigraph exponent")
    ap.add_argument("--write-dir", help="fixtures: write shipped problem files here")
    for name in sorted(_TOL_FIELDS):
        ap.add_argument(f"--tol-{name.replace('_tol', '')}", dest=name,
                        type=float, default=None)
    return ap


def run_command(argv) -> tuple[Report, int]:
    args = _build_parser().parse_args(argv)
    if args.command == "fixtures":
        rep = _cmd_fixtures(args)
        return rep, rep.exit_code()
    if not args.file:
        raise ParseError(f"command {args.command!r} needs a problem file")
    p = parse_problem_file(args.file)
    if args.seed is not None:
        p.seed = args.seed
    overrides = {k: getattr(args, k) for k in _TOL_FIELDS if getattr(args, k) is not None}
    if overrides:
        base = {k: getattr(p.tols, k) for k in _TOL_FIELDS}
        base.update(overrides)
        p.tols = TolerancePolicy(**base)
    if args.c is not None or args.alpha is not None:
        doc = dict(p.source)
        if "fixture" not in doc:
            raise ParseError("--c/--alpha apply to fixture-reference files only")
        params = dict(doc.get("params", {}))
        if args.c is not None:
            params["c"] = args.c
        if args.alpha is not None:
            params["alpha"] = args.alpha
        doc["params"] = params
        p = parse_problem_dict(doc)
        if args.seed is not None:
            p.seed = args.seed
    handler = {
        "cones": _cmd_cones,
        "subderivative": _cmd_subderivative,
        "optimality": _cmd_optimality,
        "auglag": _cmd_auglag,
        "gder": _cmd_gder,
        "oracle": _cmd_oracle,
        "diagnose": _cmd_diagnose,
    }[args.command]
    rep = handler(p, args)
    return rep, rep.exit_code()


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    t0 = time.monotonic()
    try:
        rep, code = run_command(argv)
    except ParseError as ex:
        print(f"parse error: {ex}", file=sys.stderr)
        return 1
    except PararegError as ex:
        print(f"error: {type(ex).__name__}: {ex}", file=sys.stderr)
        return 1
    want_json = "--json" in argv
    sys.stdout.write(rep.to_json() + "\n" if want_json else rep.to_text())
    print(f"wall time: {time.monotonic() - t0:.3f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
