"""Search for tree-stable outcomes of finite matching problems.

Existence is known for finite problems but no construction is; both
searches here are therefore post-certified by the exhaustive auditor.

``brute_force_stable`` is ground truth at a fixed weight resolution: it
enumerates every outcome whose weights are multiples of the quantum
``1 / (D * lcm(population denominators))``.  ``heuristic_stable`` iterates
block responses: shift one quantum from the blocking matched types to their
improving contract sets, then drop the abandoned counterparts' contracts
until every contract is balanced again.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .blocks import DEFAULT_EPS, AuditReport, audit_stability
from .market import MatchedType, MatchingProblem
from .measure import DiscreteMeasure
from .multispace import EMPTY, Multiset, point_key
from .outcome import Outcome, ValidationReport, validate_outcome

log = logging.getLogger(__name__)

MAX_UNIVERSE = 24
MAX_D = 12
MAX_CANDIDATES = 5_000_000


class SolverGuardExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    D: int = 2
    restarts: int = 1
    max_iter: int = 500
    seed: int = 0
    family: str = "trees"
    n_max: int = 3
    eps: float = DEFAULT_EPS
    workers: int = 1

    def __post_init__(self):
        if self.D < 1:
            raise ValueError("D must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


@dataclass
class Certification:
    validation: ValidationReport
    audit: Optional[AuditReport]

    @property
    def certified(self) -> bool:
        return (
            self.validation.valid and self.audit is not None
            and self.audit.exhaustive and self.audit.stable
        )

    @property
    def status(self) -> str:
        if not self.validation.valid:
            return "invalid"
        return "certified" if self.certified else "blocked"


def certify(p: MatchingProblem, o, family: str = "trees", n_max: int = 3,
            eps=DEFAULT_EPS, workers: int = 1, contract_search=None) -> Certification:
    measure = o.measure if isinstance(o, Outcome) else o
    report = validate_outcome(p, measure)
    if not report.valid:
        return Certification(report, None)
    audit = audit_stability(Outcome(p, measure), family, n_max, contract_search=contract_search,
                            eps=eps, workers=workers)
    return Certification(report, audit)


def quantum(p: MatchingProblem, D: int) -> Fraction:
    lcm = 1
    for _, w in p.population.atoms:
        lcm = lcm * w.denominator // math.gcd(lcm, w.denominator)
    return Fraction(1, D * lcm)


def matched_universe(p: MatchingProblem) -> list:
    return [MatchedType(t, m) for t in p.population.support() for m in p.choices(t)]


# ---------------------------------------------------------------------------
# exhaustive search

def _compositions(total: int, bins: int):
    """Nonnegative integer vectors of length ``bins`` summing to ``total``."""
    if bins == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, bins - 1):
            yield (first,) + rest


def _balance(choices, counts) -> tuple:
    vec: dict = {}
    for m, c in zip(choices, counts):
        if not c:
            continue
        for x, mult in m.items:
            vec[x.contract] = vec.get(x.contract, 0) + (c * mult if x.side == 1 else -c * mult)
    return tuple(sorted(((y, v) for y, v in vec.items() if v), key=lambda kv: point_key(kv[0])))


def _add_balance(a: tuple, b: tuple) -> tuple:
    vec = dict(a)
    for y, v in b:
        vec[y] = vec.get(y, 0) + v
    return tuple(sorted(((y, v) for y, v in vec.items() if v), key=lambda kv: point_key(kv[0])))


def _negate(a: tuple) -> tuple:
    return tuple((y, -v) for y, v in a)


def brute_force_stable(p: MatchingProblem, cfg: SolverConfig = SolverConfig()) -> Optional[Outcome]:
    """First outcome at resolution ``cfg.D`` that passes the exhaustive audit.

    Returns ``None`` when no outcome at this resolution is stable for the
    configured family; finer resolutions may still contain one.
    """
    universe = matched_universe(p)
    if len(universe) > MAX_UNIVERSE or cfg.D > MAX_D:
        raise SolverGuardExceeded(
            f"{len(universe)} matched types at D={cfg.D} exceeds the brute-force guard"
        )
    q = quantum(p, cfg.D)
    types = list(p.population.support())
    per_type = []
    size = 1
    for t in types:
        units = p.population[t] / q
        assert units.denominator == 1
        choices = p.choices(t)
        size *= math.comb(int(units) + len(choices) - 1, len(choices) - 1)
        per_type.append((t, choices, int(units)))
    if size > MAX_CANDIDATES:
        raise SolverGuardExceeded(f"{size} candidate outcomes exceed the brute-force guard")

    options = []
    for t, choices, units in per_type:
        opts = [(counts, _balance(choices, counts)) for counts in _compositions(units, len(choices))]
        options.append(opts)

    # meet in the middle on the last type: index its options by balance vector
    last_index: dict = {}
    for i, (_, bal) in enumerate(options[-1]):
        last_index.setdefault(bal, []).append(i)

    for head in itertools.product(*options[:-1]):
        bal: tuple = ()
        for _, b in head:
            bal = _add_balance(bal, b)
        for i in last_index.get(_negate(bal), ()):
            combo = list(head) + [options[-1][i]]
            atoms = []
            for (t, choices, _), (counts, _) in zip(per_type, combo):
                for m, c in zip(choices, counts):
                    if c:
                        atoms.append((MatchedType(t, m), c * q))
            o = Outcome(p, DiscreteMeasure(atoms))
            audit = audit_stability(o, cfg.family, cfg.n_max, eps=cfg.eps, first_only=True)
            if audit.stable:
                return o
    return None


# ---------------------------------------------------------------------------
# block-response heuristic

@dataclass
class HeuristicResult:
    outcome: Outcome
    certification: Certification
    iterations: int
    restart: int
    converged: bool
    restarts: list = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.certification.certified


def _deficits(weights: dict) -> dict:
    out: dict = {}
    for (t, ms), w in weights.items():
        for x, c in ms.items:
            d = w * c if x.side == 1 else -w * c
            out[x.contract] = out.get(x.contract, 0) + d
    return {y: d for y, d in out.items() if d}


def _shift(weights: dict, src, dst, q):
    weights[src] -= q
    if weights[src] == 0:
        del weights[src]
    weights[dst] = weights.get(dst, 0) + q


def _apply_moves(weights: dict, moves, q):
    """Shift ``q`` along each ``(subtype, W)`` move, then rebalance."""
    fresh = set()
    for s, W in moves:
        dst = MatchedType(s.t, W)
        _shift(weights, s, dst, q)
        fresh.add(dst)
    while True:
        deficits = _deficits(weights)
        if not deficits:
            return
        y, d = min(deficits.items(), key=lambda kv: point_key(kv[0]))
        side = 1 if d > 0 else 2
        holders = sorted(
            (s for s in weights if any(x.contract == y and x.side == side for x in s.choice.support())),
            key=lambda s: (s in fresh, point_key(s)),
        )
        holder = holders[0]
        dropped = holder.choice - Multiset.of((y, side))
        _shift(weights, holder, MatchedType(holder.t, dropped), q)


def _capacity_filter(weights: dict, q):
    def ok(tup):
        counts: dict = {}
        for s in tup:
            counts[s] = counts.get(s, 0) + 1
        return all(weights.get(s, 0) >= c * q for s, c in counts.items())
    return ok


def _run_restart(p, cfg, restart, q, callback):
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(restart,)))
    weights = {MatchedType(t, EMPTY): w for t, w in p.population.atoms}
    iterations = 0
    converged = False
    for iterations in range(cfg.max_iter + 1):
        measure = DiscreteMeasure(weights.items())
        o = Outcome(p, measure)
        if callback is not None:
            callback(iterations, o)
        if iterations == cfg.max_iter:
            break
        order = None
        if restart > 0:
            order = [int(i) for i in rng.permutation(len(measure))]
        audit = audit_stability(
            o, cfg.family, cfg.n_max, eps=cfg.eps, first_only=restart > 0,
            tuple_filter=_capacity_filter(weights, q), order=order, workers=cfg.workers,
        )
        if audit.individual_block is not None:
            s, W, _ = audit.individual_block
            _apply_moves(weights, [(MatchedType(*s), W)], q)
        elif audit.certificate is not None:
            cert = audit.certificate
            _apply_moves(weights, list(zip(cert.vertex_subtypes, cert.improving_sets)), q)
        else:
            converged = True
            break
    o = Outcome(p, DiscreteMeasure(weights.items()))
    return o, iterations, converged


def heuristic_stable(p: MatchingProblem, cfg: SolverConfig = SolverConfig(),
                     callback: Optional[Callable] = None) -> HeuristicResult:
    """Iterated block response from the all-unmatched outcome.

    Restart 0 always applies the largest-margin block; later restarts scan
    matched types in a seeded random order and apply the first block found.
    Certified results win; otherwise the smallest exact blocked mass wins.
    """
    q = quantum(p, cfg.D)
    best = None
    summary = []
    for r in range(cfg.restarts):
        o, iters, converged = _run_restart(p, cfg, r, q, callback)
        cert = certify(p, o, cfg.family, cfg.n_max, cfg.eps, cfg.workers)
        mass = sum(cert.audit.blocked_mass.values(), Fraction(0)) if cert.audit else Fraction(1)
        summary.append({"restart": r, "iterations": iters, "converged": converged,
                        "status": cert.status, "blocked_mass": mass})
        log.info("restart %d: %s after %d iterations", r, cert.status, iters)
        key = (not cert.certified, mass)
        if best is None or key < best[0]:
            best = (key, HeuristicResult(o, cert, iters, r, converged))
    result = best[1]
    result.restarts = summary
    return result
