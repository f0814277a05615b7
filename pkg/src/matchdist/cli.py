"""Command-line driver.

Exit status: 0 on a valid/stable/certified result, 2 on an invalid or
blocked verdict, 1 on any error.  Reports go to ``--out-dir`` (default
``$MATCHDIST_OUT`` or ``./matchdist-out``) and are written atomically.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from fractions import Fraction

from . import approx, gallery, io, selftest
from .blocks import MAX_SHAPE_VERTICES, AuditTooLarge, audit_stability, audit_stability_mc
from .outcome import Outcome, validate_outcome
from .solver import SolverConfig, SolverGuardExceeded, brute_force_stable, certify, heuristic_stable

EXIT_OK, EXIT_ERROR, EXIT_VERDICT = 0, 1, 2
OUT_ENV = "MATCHDIST_OUT"
DEFAULT_OUT = "matchdist-out"
NAMED_OUTCOMES = ("diagonal", "antipodal")

log = logging.getLogger("matchdist")


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _common(sp, *, problem=True, outcome=False, audit=False, seed=False):
    if problem:
        sp.add_argument("--problem", required=True,
                        help="problem file, or a gallery id (assortative, cyclic)")
        sp.add_argument("--alpha", default="0", help="cyclic offset in [0, 1] (gallery problems)")
        sp.add_argument("--k", type=int, default=64, help="type atoms for gallery problems")
        sp.add_argument("--m", type=int, default=None, help="contract grid size (default k)")
    if outcome:
        sp.add_argument("--outcome", required=True,
                        help="outcome file, or diagonal/antipodal for gallery problems")
    if audit:
        sp.add_argument("--family", choices=("pairwise", "trees", "all"), default="trees")
        sp.add_argument("--n-max", type=int, default=4)
        sp.add_argument("--allow-all-graphs", action="store_true",
                        help="permit the family of all directed graphs")
        sp.add_argument("--eps-block", type=float, default=1e-9,
                        help="margin threshold for floating utilities")
    if seed:
        sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out-dir", default=None)
    sp.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="matchdist", description="Distributional many-to-many matching toolkit.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("validate", help="check the three outcome conditions")
    _common(sp, outcome=True)

    sp = sub.add_parser("audit", help="exhaustive (and optional Monte Carlo) stability audit")
    _common(sp, outcome=True, audit=True, seed=True)
    sp.add_argument("--samples", type=int, default=0, help="Monte Carlo samples per tuple size")

    sp = sub.add_parser("solve", help="search for a certified stable outcome")
    _common(sp, audit=True, seed=True)
    sp.add_argument("--method", choices=("heuristic", "brute"), default="heuristic")
    sp.add_argument("--D", type=int, default=2, help="weight resolution multiplier")
    sp.add_argument("--restarts", type=int, default=1)
    sp.add_argument("--max-iter", type=int, default=500)

    sp = sub.add_parser("approx", help="run the discretization pipeline on a gallery problem")
    sp.add_argument("--problem", required=True, choices=gallery.GALLERY_IDS)
    sp.add_argument("--alpha", default="0")
    sp.add_argument("--stages", default="4,8,16,32", help="comma-separated grid sizes (m = k)")
    sp.add_argument("--D", type=int, default=2)
    sp.add_argument("--max-iter", type=int, default=500)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--method", choices=("heuristic", "brute"), default="heuristic")
    sp.add_argument("--reference-resolution", type=int, default=256)
    sp.add_argument("--timing", action="store_true", help="add a runtime column to the trace")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out-dir", default=None)
    sp.add_argument("-v", "--verbose", action="store_true")

    sp = sub.add_parser("gallery", help="emit a gallery problem and its analytic outcomes")
    _common(sp)

    sp = sub.add_parser("selftest", help="metric and star-map property checks")
    sp.add_argument("--trials", type=int, default=500)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir", default=None)
    sp.add_argument("-v", "--verbose", action="store_true")
    return ap


# ---------------------------------------------------------------------------

def _alpha(args) -> Fraction:
    try:
        return gallery.as_alpha(Fraction(args.alpha))
    except (ValueError, ZeroDivisionError) as e:
        raise CliError(f"--alpha: {e}") from None


def _load_problem(args):
    if args.problem in gallery.GALLERY_IDS:
        return gallery.build(args.problem, _alpha(args), args.k, args.m), args.problem
    if not os.path.exists(args.problem):
        raise CliError(f"--problem: no such file or gallery id {args.problem!r}")
    return io.read_problem(args.problem), None


def _load_outcome(args, p, gid):
    if args.outcome in NAMED_OUTCOMES:
        if gid is None:
            raise CliError(f"--outcome {args.outcome} needs a gallery problem")
        if args.outcome == "diagonal":
            return gallery.diagonal_outcome(p)
        if gid != "cyclic":
            raise CliError("antipodal outcomes exist only for the cyclic problem")
        return gallery.antipodal_outcome(p)
    if not os.path.exists(args.outcome):
        raise CliError(f"--outcome: no such file {args.outcome!r}")
    return io.read_outcome_measure(args.outcome)


def _out_dir(args) -> str:
    return args.out_dir or os.environ.get(OUT_ENV) or DEFAULT_OUT


def _config(args) -> dict:
    skip = {"workers", "out_dir", "verbose", "timing"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit(args, name: str, doc: dict) -> str:
    path = os.path.join(_out_dir(args), name)
    io.write_atomic(path, io.dumps(doc))
    return path


def _check_family(args):
    if args.family == "all" and not args.allow_all_graphs:
        raise CliError("--family all is combinatorially expensive; pass --allow-all-graphs")
    if not 2 <= args.n_max <= MAX_SHAPE_VERTICES:
        raise CliError(f"--n-max must lie in [2, {MAX_SHAPE_VERTICES}]")


# ---------------------------------------------------------------------------
# commands

def cmd_validate(args) -> int:
    p, gid = _load_problem(args)
    o = _load_outcome(args, p, gid)
    m = o.measure if isinstance(o, Outcome) else o
    report = validate_outcome(p, m)
    path = _emit(args, "validation.json", {
        "kind": "validation", "config": _config(args), "validation": io.validation_to_doc(report),
    })
    print(f"{report.summary()} -> {path}")
    return EXIT_OK if report.valid else EXIT_VERDICT


def cmd_audit(args) -> int:
    _check_family(args)
    p, gid = _load_problem(args)
    o = _load_outcome(args, p, gid)
    m = o.measure if isinstance(o, Outcome) else o
    report = validate_outcome(p, m)
    doc = {"kind": "audit", "config": _config(args), "validation": io.validation_to_doc(report)}
    if not report.valid:
        path = _emit(args, "audit.json", doc)
        print(f"invalid outcome: {report.summary()} -> {path}")
        return EXIT_VERDICT
    outcome = Outcome(p, m)
    try:
        audit = audit_stability(outcome, args.family, args.n_max, eps=args.eps_block,
                                workers=args.workers)
        doc["audit"] = io.audit_to_doc(audit)
    except AuditTooLarge as e:
        if not args.samples:
            raise CliError(f"{e}; rerun with --samples for a Monte Carlo audit") from None
        audit = None
        doc["audit"] = {"verdict": "skipped", "reason": str(e)}
    stable = audit is None or audit.stable
    if args.samples:
        mc = audit_stability_mc(outcome, args.family, args.n_max, samples=args.samples,
                                seed=args.seed, eps=args.eps_block, workers=args.workers)
        doc["monte_carlo"] = io.mc_to_doc(mc)
        stable = stable and mc.stable
    path = _emit(args, "audit.json", doc)
    print(f"{'stable' if stable else 'blocked'} -> {path}")
    return EXIT_OK if stable else EXIT_VERDICT


def cmd_solve(args) -> int:
    _check_family(args)
    p, _ = _load_problem(args)
    cfg = SolverConfig(D=args.D, restarts=args.restarts, max_iter=args.max_iter, seed=args.seed,
                       family=args.family, n_max=args.n_max, eps=args.eps_block,
                       workers=args.workers)
    doc = {"kind": "solve", "config": _config(args)}
    if args.method == "brute":
        try:
            o = brute_force_stable(p, cfg)
        except SolverGuardExceeded as e:
            raise CliError(str(e)) from None
        if o is None:
            doc["status"] = f"no stable outcome at resolution D={args.D}"
            path = _emit(args, "solve.json", doc)
            print(f"{doc['status']} -> {path}")
            return EXIT_VERDICT
        cert = certify(p, o, cfg.family, cfg.n_max, cfg.eps, cfg.workers)
    else:
        res = heuristic_stable(p, cfg)
        o, cert = res.outcome, res.certification
        doc["iterations"] = res.iterations
        doc["converged"] = res.converged
        doc["restarts"] = [
            {**r, "blocked_mass": io.rational(r["blocked_mass"])} for r in res.restarts
        ]
    doc["status"] = cert.status
    doc["validation"] = io.validation_to_doc(cert.validation)
    doc["audit"] = io.audit_to_doc(cert.audit) if cert.audit else None
    _emit(args, "outcome.json", io.outcome_to_doc(o))
    path = _emit(args, "solve.json", doc)
    print(f"{cert.status} -> {path}")
    return EXIT_OK if cert.certified else EXIT_VERDICT


def cmd_approx(args) -> int:
    try:
        sizes = [int(s) for s in args.stages.split(",") if s.strip()]
        cfg = SolverConfig(D=args.D, max_iter=args.max_iter, seed=args.seed, workers=args.workers)
        schedule = approx.ApproximationSchedule.doubling(
            sizes, solver=cfg, method=args.method, reference_resolution=args.reference_resolution,
        )
    except ValueError as e:
        raise CliError(f"--stages: {e}") from None
    trace = approx.run_pipeline(schedule, args.problem, _alpha(args))
    out = _out_dir(args)
    io.write_atomic(os.path.join(out, "trace.csv"), trace.to_csv(timing=args.timing))
    if trace.outcomes:
        _emit(args, "outcome.json", io.outcome_to_doc(trace.outcomes[-1]))
    path = _emit(args, "approx.json", {
        "kind": "approx",
        "config": _config(args),
        "reference": trace.reference,
        "monotone_ok": trace.monotone_ok,
        "flagged": [[m, k, why] for m, k, why in trace.flagged],
        "final_audit": io.audit_to_doc(trace.final_audit) if trace.final_audit else None,
        "ok": trace.ok,
    })
    print(trace.to_csv(timing=args.timing), end="")
    print(f"{'converged' if trace.ok else 'flagged'} -> {path}")
    return EXIT_OK if trace.ok else EXIT_VERDICT


def cmd_gallery(args) -> int:
    if args.problem not in gallery.GALLERY_IDS:
        raise CliError(f"--problem must be one of {', '.join(gallery.GALLERY_IDS)}")
    alpha = _alpha(args)
    p = gallery.build(args.problem, alpha, args.k, args.m)
    _emit(args, "problem.json", io.problem_to_doc(p))
    label, outs = gallery.analytic_outcome(args.problem, alpha, args.k, p)
    for name, o in outs:
        _emit(args, f"outcome-{name}.json", io.outcome_to_doc(o))
    path = _emit(args, "gallery.json", {
        "kind": "gallery", "config": _config(args), "case": label,
        "outcomes": [name for name, _ in outs],
    })
    print(f"{label}: {', '.join(n for n, _ in outs)} -> {path}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    results = selftest.run_all(args.trials, args.seed)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    _emit(args, "selftest.json", {
        "kind": "selftest", "config": _config(args),
        "results": [{"check": n, "ok": ok, "detail": d} for n, ok, d in results],
    })
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_VERDICT


COMMANDS = {
    "validate": cmd_validate, "audit": cmd_audit, "solve": cmd_solve,
    "approx": cmd_approx, "gallery": cmd_gallery, "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (CliError, io.ParseError, OSError) as e:
        print(f"matchdist: error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, KeyError) as e:
        print(f"matchdist: error: {e}", file=sys.stderr)
        return EXIT_ERROR
