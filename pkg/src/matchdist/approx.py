"""Discretization pipeline for the gallery problems.

Each stage fixes a contract grid and a midpoint population, solves the finite
problem, certifies the result and measures how far its partner coupling sits
from the previous stage and from the analytic limit.  Contract grids are
nested: the stage-``m`` grid is the prefix of ``dense_contract_sequence``
covering the coordinates ``j / 2m``.
"""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from . import gallery
from .blocks import AuditReport, audit_stability
from .market import MatchingProblem
from .measure import DiscreteMeasure, w1_distance
from .outcome import Outcome, validate_outcome
from .solver import SolverConfig, brute_force_stable, certify, heuristic_stable

SCHEMA = "matchdist/1"
MONOTONE_TOL = 1e-12


@dataclass(frozen=True)
class ApproximationSchedule:
    stages: tuple = ((4, 4), (8, 8), (16, 16), (32, 32))
    solver: SolverConfig = SolverConfig(D=2, family="trees", n_max=3)
    method: str = "heuristic"
    reference_resolution: int = 256
    refine: int = 2

    def __post_init__(self):
        ms = [m for m, _ in self.stages]
        ks = [k for _, k in self.stages]
        if not self.stages:
            raise ValueError("schedule needs at least one stage")
        if any(b <= a for a, b in zip(ms, ms[1:])) or any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("grid sizes must increase from stage to stage")
        if any(b % a for a, b in zip(ms, ms[1:])):
            raise ValueError("contract grids must be nested: each m must divide the next")
        if self.method not in ("heuristic", "brute"):
            raise ValueError(f"unknown solve method {self.method!r}")

    @classmethod
    def doubling(cls, sizes, **kw) -> "ApproximationSchedule":
        return cls(stages=tuple((s, s) for s in sizes), **kw)


def _gid(p: MatchingProblem) -> str:
    gid = getattr(p.utility, "gid", None)
    if gid not in gallery.GALLERY_IDS:
        raise ValueError("contract discretization needs a gallery problem")
    return gid


def discretize_contracts(p: MatchingProblem, m: int) -> MatchingProblem:
    """Restrict a continuum gallery problem to the first ``m`` entries of its
    dense contract sequence; the first entry is the empty choice."""
    if m < 1:
        raise ValueError("m must be >= 1")
    gid = _gid(p)
    allowed = frozenset(y for y in gallery.dense_contract_sequence(gid, m) if y is not None)
    return gallery._problem(gid, p.utility.alpha, p.types, p.population, allowed, allowed, False)


def discretize_population(gid: str, k: int) -> DiscreteMeasure:
    gallery.type_space_for(gid)
    return gallery.midpoint_population(k)


def grid_prefix_length(gid: str, m: int) -> int:
    """Length of the dense-sequence prefix that equals the stage-``m`` grid."""
    n = len(gallery.coordinate_grid(gid, m))
    return 1 + n * n


@dataclass
class StageRow:
    m: int
    k: int
    verdict: str
    w1_prev: Optional[float]
    w1_limit: Optional[float]
    mass_captured: Fraction
    valid: bool
    iterations: int
    runtime: float


@dataclass
class PipelineTrace:
    gid: str
    alpha: Fraction
    reference: str
    rows: list = field(default_factory=list)
    outcomes: list = field(default_factory=list)
    final_audit: Optional[AuditReport] = None
    monotone_ok: bool = True
    flagged: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (
            self.monotone_ok and not self.flagged
            and self.final_audit is not None and self.final_audit.stable
        )

    def to_csv(self, timing: bool = False) -> str:
        buf = io.StringIO()
        buf.write(f"# {SCHEMA}\n")
        w = csv.writer(buf, lineterminator="\n")
        head = ["stage", "m", "k", "verdict", "valid", "w1_prev", "w1_limit", "mass_captured", "iterations"]
        if timing:
            head.append("runtime")
        w.writerow(head)
        for i, r in enumerate(self.rows):
            row = [i + 1, r.m, r.k, r.verdict, int(r.valid), _fmt(r.w1_prev), _fmt(r.w1_limit),
                   str(r.mass_captured), r.iterations]
            if timing:
                row.append(f"{r.runtime:.3f}")
            w.writerow(row)
        return buf.getvalue()


def _fmt(x) -> str:
    return "" if x is None else repr(round(float(x), 12))


def _solve(p, schedule):
    cfg = schedule.solver
    if schedule.method == "brute":
        o = brute_force_stable(p, cfg)
        if o is None:
            return None, None, 0
        return o, certify(p, o, cfg.family, cfg.n_max, cfg.eps, cfg.workers), 0
    res = heuristic_stable(p, cfg)
    return res.outcome, res.certification, res.iterations


def run_pipeline(schedule: ApproximationSchedule, gid: str, alpha=0,
                 reference: Optional[str] = None) -> PipelineTrace:
    alpha = gallery.as_alpha(alpha)
    ref = gallery.reference_coupling(gid, alpha, schedule.reference_resolution, reference)
    ref_name = reference or (
        "antipodal" if gid == "cyclic" and gallery.cyclic_case(alpha).startswith("case 2") else "diagonal"
    )
    metric = gallery.coupling_metric(gid)
    trace = PipelineTrace(gid, alpha, ref_name)
    prev = None
    last = None
    for m, k in schedule.stages:
        start = time.perf_counter()
        p = gallery.build(gid, alpha, k, m)
        o, cert, iters = _solve(p, schedule)
        if o is None:
            trace.flagged.append((m, k, "no outcome at this resolution"))
            trace.rows.append(StageRow(m, k, "unsolved", None, None, Fraction(0), False, iters,
                                       time.perf_counter() - start))
            continue
        valid = validate_outcome(p, o.measure).valid
        coupling = gallery.partner_coupling(o)
        w1_prev = None if prev is None else w1_distance(coupling, prev, metric)
        w1_limit = w1_distance(coupling, ref, metric)
        on_grid = sum((w for (t, _), w in o.measure.atoms if t in set(p.types)), Fraction(0))
        verdict = cert.status
        if verdict != "certified":
            trace.flagged.append((m, k, verdict))
        trace.rows.append(StageRow(m, k, verdict, w1_prev, w1_limit, on_grid, valid, iters,
                                   time.perf_counter() - start))
        trace.outcomes.append(o)
        prev = coupling
        last = (m, k, o)

    gaps = [r.w1_prev for r in trace.rows if r.w1_prev is not None]
    # consecutive distances are compared from the second one onward
    trace.monotone_ok = all(b <= a + MONOTONE_TOL for a, b in zip(gaps, gaps[1:]))

    if last is not None:
        m, k, o = last
        fine = gallery.build(gid, alpha, k, schedule.refine * m)
        search = [(a, b) for a in gallery.coordinate_grid(gid, schedule.refine * m)
                  for b in gallery.coordinate_grid(gid, schedule.refine * m)]
        trace.final_audit = audit_stability(Outcome(fine, o.measure), "pairwise", 2,
                                            contract_search=search, eps=schedule.solver.eps)
    return trace
