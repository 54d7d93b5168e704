"""Command-line interface: ``gaussvp validate|solve|certify|exhaust|capacity PROBLEM``.

Exit codes: 0 success, 1 certification failure, 2 infeasible or invalid
input, 3 internal error.  Reports are JSON; per-node potentials, exhaustion
traces and solver iterates can also be written as CSV.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
import warnings
from dataclasses import asdict, replace
from types import SimpleNamespace

import numpy as np

from . import __version__
from .certify import certify_equilibrium, check_eta_certificate, scalar_equilibrium
from .condenser import check_cross_sup, check_mass_summability, make_exhaustion, validate_condenser
from .errors import (AllInfinite, DegenerateGram, DomainError, GaussVPError, Infeasible, InfeasibleInput,
                     MissingData, NotPositiveDefinite, ParseError, SchemaError, StepInfeasible,
                     ValidationError, ZeroRestrictedMass)
from .exhaust import run_exhaustion
from .kernel import check_positive_definite
from .measure import DiscreteVectorMeasure, weighted_potentials
from .problem import ProblemFile, canonical_json, parse_problem, to_jsonable
from .solver import check_feasibility, solve

log = logging.getLogger(__name__)

COMMANDS = ("validate", "solve", "certify", "exhaust", "capacity")
CSV_KINDS = ("potentials", "exhaustion_trace", "iterates")

EXIT_OK, EXIT_CERT, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3
# errors that mean "the input is invalid or infeasible"; anything else is internal
INPUT_ERRORS = (ParseError, SchemaError, ValidationError, Infeasible, InfeasibleInput, AllInfinite,
                StepInfeasible, ZeroRestrictedMass, DomainError, NotPositiveDefinite, DegenerateGram,
                MissingData)


def exit_code_for(exc: BaseException) -> int:
    return EXIT_INPUT if isinstance(exc, INPUT_ERRORS) else EXIT_INTERNAL


def diagnostic(exc: BaseException) -> dict:
    d = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("location", "field", "step", "plate"):
        if hasattr(exc, attr):
            d[attr] = getattr(exc, attr)
    if getattr(exc, "violations", None):
        d["violations"] = [v._asdict() for v in exc.violations]
    if getattr(exc, "reasons", None):
        d["reasons"] = [list(r) for r in exc.reasons]
    return d


def _flags(flags) -> SimpleNamespace:
    base = dict(seed=None, tol=1e-6, measure=None, plate=0, steps=None, order=None, trace=False, workers=1)
    if flags is None:
        return SimpleNamespace(**base)
    given = flags if isinstance(flags, dict) else vars(flags)
    base.update({k: v for k, v in given.items() if v is not None or k not in base})
    return SimpleNamespace(**base)


def _config(problem: ProblemFile, fl):
    cfg = problem.solver
    if fl.seed is not None:
        cfg = replace(cfg, seed=fl.seed)
    if fl.trace:
        cfg = replace(cfg, trace=True)
    return cfg


def _config_dict(cfg):
    return asdict(cfg)


def _equilibrium_dict(rep):
    return {"value": rep.value, "gap": rep.gap, "iters": rep.iters, "converged": rep.converged,
            "status": rep.status, "constants": rep.constants, "feasibility": rep.feasibility,
            "weights": [w for w in rep.lam.weights], "support": [s for s in rep.support]}


def _certificate_dict(cert):
    return {"ok": cert.ok, "value": cert.value, "value_identity_residual": cert.value_identity_residual,
            "value_identity_ok": cert.value_identity_ok, "tol": cert.tol, "eta": cert.eta,
            "cross_sup": cert.cross_sup._asdict(),
            "plates": [p._asdict() for p in cert.plates]}


def potential_rows(problem: ProblemFile, lam: DiscreteVectorMeasure, constants):
    """Per-node rows in (plate, node index) order."""
    k, c, f = problem.kernel, problem.condenser, problem.field
    rows = []
    for i, (p, W, w) in enumerate(zip(c.plates, weighted_potentials(k, lam, f), lam.weights)):
        C = float(constants[i])
        for j in range(p.n):
            rows.append({"plate": i, "node_index": j, "coords": p.nodes[j].tolist(), "weight": float(w[j]),
                         "W_value": float(W[j]), "C_over_g": C / p.g[j],
                         "residual": float(p.mass * W[j] - C * p.g[j])})
    return rows


def _load_measure(path, c):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as e:
        raise ParseError(str(path), f"cannot read file: {e.strerror}") from e
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}:{e.lineno}:{e.colno}", e.msg) from e
    if not isinstance(raw, dict) or "weights" not in raw:
        raise SchemaError("weights", "measure file needs a \"weights\" list (one list per plate)")
    try:
        mu = DiscreteVectorMeasure(c, tuple(np.asarray(w, dtype=float) for w in raw["weights"]))
    except (ValueError, TypeError) as e:
        raise SchemaError("weights", str(e)) from e
    return mu, raw.get("eta"), raw.get("value_bound")


def _cmd_validate(problem, fl, report):
    k, c, f = problem.kernel, problem.condenser, problem.field
    val = validate_condenser(c)
    report["validation"] = {"ok": val.ok, "violations": [v._asdict() for v in val.violations]}
    feas = check_feasibility(c, f, k)
    psd = check_positive_definite(c.gram(k), problem.solver.psd_tol)
    report["checks"] = {"feasible": feas.feasible, "reasons": [list(r) for r in feas.reasons],
                        "min_abs_field": feas.min_abs_field,
                        "mass_summability": check_mass_summability(c)._asdict(),
                        "cross_sup": check_cross_sup(c, k)._asdict(), "psd": psd._asdict()}
    return EXIT_OK if (val.ok and feas.feasible and psd.psd) else EXIT_INPUT


def _solve_and_certify(problem, fl, report):
    k, c, f = problem.kernel, problem.condenser, problem.field
    cfg = _config(problem, fl)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = solve(k, c, f, cfg)
    report["warnings"] = [str(w.message) for w in caught]
    report["equilibrium"] = _equilibrium_dict(rep)
    if rep.trace is not None:
        report["iterates"] = [r._asdict() for r in rep.trace]
    cert = certify_equilibrium(k, c, f, rep.lam, tol=fl.tol, support_threshold=cfg.support_threshold)
    report["certificate"] = _certificate_dict(cert)
    report["potentials"] = potential_rows(problem, rep.lam, cert.constants)
    return rep, cert


def _cmd_solve(problem, fl, report):
    _, cert = _solve_and_certify(problem, fl, report)
    return EXIT_OK if cert.ok else EXIT_CERT


def _cmd_certify(problem, fl, report):
    if not fl.measure:
        raise MissingData("certify needs a measure file (--measure)")
    k, c, f = problem.kernel, problem.condenser, problem.field
    mu, eta, bound = _load_measure(fl.measure, c)
    cert = certify_equilibrium(k, c, f, mu, tol=fl.tol, support_threshold=problem.solver.support_threshold,
                               eta=eta)
    report["certificate"] = _certificate_dict(cert)
    report["potentials"] = potential_rows(problem, mu, cert.constants)
    ok = cert.ok
    if eta is not None:
        ec = check_eta_certificate(k, c, f, mu, eta, bound, tol=fl.tol,
                                   support_threshold=problem.solver.support_threshold)
        report["eta_certificate"] = ec._asdict()
        ok = ok and ec.certified
    if not cert.ok:
        i, node, res = cert.worst()
        report["worst_residual"] = {"plate": i, "node": node, "residual": res}
    return EXIT_OK if ok else EXIT_CERT


def _cmd_exhaust(problem, fl, report):
    k, c, f = problem.kernel, problem.condenser, problem.field
    ex_doc = problem.exhaustion or {}
    steps = fl.steps or ex_doc.get("steps", 4)
    order = fl.order or ex_doc.get("order", "index")
    sched = make_exhaustion(c, steps, order)
    cfg = _config(problem, fl)
    ex = run_exhaustion(k, c, f, sched, cfg, tol=max(fl.tol, 1e-5), workers=fl.workers)
    report["exhaustion"] = {
        "steps": steps, "order": order, "monotone_ok": ex.monotone_ok, "converged": ex.converged,
        "final_distance": ex.final_distance, "final_pairing_residual": ex.final_pairing_residual,
        "final_constant_residual": ex.final_constant_residual, "final_value_residual": ex.final_value_residual,
        "trace": [{"step": s.step, "sizes": list(s.sizes), "value": s.value, "gap": s.gap,
                   "distance_to_final": s.distance_to_final, "field_pairing": s.field_pairing,
                   "constants": s.constants} for s in ex.steps]}
    report["equilibrium"] = _equilibrium_dict(ex.full)
    report["potentials"] = potential_rows(problem, ex.full.lam, ex.full.constants)
    return EXIT_OK if (ex.monotone_ok and ex.converged) else EXIT_CERT


def _cmd_capacity(problem, fl, report):
    c = problem.condenser
    if not 0 <= fl.plate < len(c.plates):
        raise MissingData(f"plate {fl.plate} does not exist (problem has {len(c.plates)} plates)")
    res = scalar_equilibrium(problem.kernel, c.plates[fl.plate].nodes)
    report["capacity"] = {"plate": fl.plate, "capacity": res.capacity, "robin_constant": res.robin_constant,
                          "energy": res.energy, "theta": res.theta, "mass_norm_residual": res.mass_norm_residual,
                          "min_potential": res.min_potential, "invariants_ok": res.invariants_ok}
    return EXIT_OK if res.invariants_ok else EXIT_CERT


_DISPATCH = {"validate": _cmd_validate, "solve": _cmd_solve, "certify": _cmd_certify,
             "exhaust": _cmd_exhaust, "capacity": _cmd_capacity}


def _base_report(command, problem, fl):
    rep = {"tool": "gaussvp", "version": __version__, "command": command, "diagnostics": []}
    if problem is not None:
        rep["problem"] = {"sha256": problem.digest(), "config": _config_dict(_config(problem, fl)),
                          "tol": fl.tol}
    return rep


def run(command: str, problem, flags=None):
    """Run one command; returns ``(report, exit_code)``.  Never raises for package errors."""
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    fl = _flags(flags)
    t0 = time.perf_counter()
    try:
        if not isinstance(problem, ProblemFile):
            problem = parse_problem(problem)
        report = _base_report(command, problem, fl)
        code = _DISPATCH[command](problem, fl, report)
    except Exception as exc:  # reported as a structured diagnostic
        if not isinstance(exc, GaussVPError):
            log.exception("internal error")
        report = _base_report(command, problem if isinstance(problem, ProblemFile) else None, fl)
        report["diagnostics"].append(diagnostic(exc))
        code = exit_code_for(exc)
    report["exit_code"] = code
    report["status"] = {EXIT_OK: "ok", EXIT_CERT: "check_failed", EXIT_INPUT: "invalid_input",
                        EXIT_INTERNAL: "internal_error"}[code]
    report["timing"] = {"seconds": time.perf_counter() - t0}
    return to_jsonable(report), code


def report_json(report, indent=2) -> str:
    return canonical_json(report, indent=indent)


def emit_csv(report: dict, kind: str, path) -> None:
    """Write one of the CSV views of a report."""
    if kind not in CSV_KINDS:
        raise ValueError(f"unknown CSV kind {kind!r}; expected one of {CSV_KINDS}")
    if kind == "potentials":
        rows = report.get("potentials")
        if not rows:
            raise MissingData("report has no per-node potentials")
        dim = len(rows[0]["coords"])
        header = ["plate", "node_index"] + [f"x{d}" for d in range(dim)] + \
                 ["weight", "W_value", "C_over_g", "residual"]
        body = [[r["plate"], r["node_index"], *r["coords"], r["weight"], r["W_value"], r["C_over_g"],
                 r["residual"]] for r in rows]
    elif kind == "exhaustion_trace":
        ex = report.get("exhaustion")
        if not ex:
            raise MissingData("report has no exhaustion trace")
        m = len(ex["trace"][0]["constants"])
        header = ["step", "value", "gap", "distance_to_final"] + [f"constant_{i}" for i in range(m)]
        body = [[s["step"], s["value"], s["gap"], s["distance_to_final"], *s["constants"]] for s in ex["trace"]]
    else:
        its = report.get("iterates")
        if not its:
            raise MissingData("report has no iterates; rerun with --trace")
        header = ["iteration", "value", "gap", "step"]
        body = [[r["iteration"], r["value"], r["gap"], r["step"]] for r in its]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows([[repr(x) if isinstance(x, float) else x for x in row] for row in body])


def _parse_csv_flag(text):
    kind, sep, path = text.partition("=")
    if not sep or kind not in CSV_KINDS or not path:
        raise argparse.ArgumentTypeError(f"expected KIND=PATH with KIND in {CSV_KINDS}, got {text!r}")
    return kind, path


def build_parser():
    ap = argparse.ArgumentParser(prog="gaussvp", description="Weighted vector equilibrium problems on finite condensers.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("problem", help="problem file (JSON)")
        p.add_argument("--out", help="write the JSON report here instead of stdout")
        p.add_argument("--csv", action="append", type=_parse_csv_flag, default=[], metavar="KIND=PATH",
                       help=f"also write a CSV view; KIND is one of {', '.join(CSV_KINDS)}")
        p.add_argument("--seed", type=int)
        p.add_argument("--tol", type=float, default=1e-6, help="certificate tolerance (default 1e-6)")
        p.add_argument("--trace", action="store_true", help="record solver iterates")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "certify":
            p.add_argument("--measure", required=True,
                           help="JSON file with \"weights\" (per plate) and optional \"eta\", \"value_bound\"")
        if name == "capacity":
            p.add_argument("--plate", type=int, default=0)
        if name == "exhaust":
            p.add_argument("--steps", type=int)
            p.add_argument("--order", choices=("index", "centroid"))
            p.add_argument("--workers", type=int, default=1)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    report, code = run(args.command, args.problem, args)
    for kind, path in args.csv:
        try:
            emit_csv(report, kind, path)
        except (MissingData, OSError) as e:
            print(f"gaussvp: cannot write {kind} CSV: {e}", file=sys.stderr)
            code = max(code, EXIT_INTERNAL if isinstance(e, OSError) else EXIT_INPUT)
    text = report_json(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    for d in report["diagnostics"]:
        print(f"gaussvp: {d['error']}: {d['message']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
