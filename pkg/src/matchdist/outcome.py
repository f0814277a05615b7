"""Outcomes: probability measures over matched types, validated exactly."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .market import MatchedType, MatchingProblem
from .measure import DiscreteMeasure, marginal, star_measure
from .multispace import Multiset, point_key


class InvalidOutcome(ValueError):
    def __init__(self, report: "ValidationReport"):
        super().__init__(report.summary())
        self.report = report


@dataclass
class ValidationReport:
    marginal_ok: bool
    feasible_ok: bool
    balance_ok: bool
    marginal_errors: list = field(default_factory=list)
    infeasible_atoms: list = field(default_factory=list)
    deficits: dict = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return self.marginal_ok and self.feasible_ok and self.balance_ok

    def summary(self) -> str:
        if self.valid:
            return "valid outcome"
        parts = []
        if not self.marginal_ok:
            parts.append(f"type marginal differs at {len(self.marginal_errors)} point(s)")
        if not self.feasible_ok:
            parts.append(f"{len(self.infeasible_atoms)} infeasible matched type(s)")
        if not self.balance_ok:
            bad = sum(1 for d in self.deficits.values() if d)
            parts.append(f"{bad} contract(s) unbalanced across sides")
        return "; ".join(parts)


def _check_points(m: DiscreteMeasure):
    for point, _ in m.atoms:
        if not (isinstance(point, tuple) and len(point) == 2 and isinstance(point[1], Multiset)):
            raise TypeError(f"outcome atoms must be (type, multiset) pairs, got {point!r}")


def balance_deficit(p: MatchingProblem, m: DiscreteMeasure) -> dict:
    """Side-1 minus side-2 counting mass for every contract that appears."""
    _check_points(m)
    star = star_measure(m)
    out: dict = {}
    for x, w in star.atoms:
        out[x.contract] = out.get(x.contract, Fraction(0)) + (w if x.side == 1 else -w)
    return dict(sorted(out.items(), key=lambda kv: point_key(kv[0])))


def validate_outcome(p: MatchingProblem, m: DiscreteMeasure) -> ValidationReport:
    _check_points(m)
    types_marginal = marginal(m, 0)
    marginal_errors = []
    for t in sorted(set(types_marginal.support()) | set(p.population.support()), key=point_key):
        if types_marginal[t] != p.population[t]:
            marginal_errors.append((t, types_marginal[t], p.population[t]))
    infeasible = []
    for (t, ms), _ in m.atoms:
        try:
            ok = p.is_feasible_choice(t, ms)
        except KeyError:
            ok = False
        if not ok:
            infeasible.append((t, ms))
    deficits = balance_deficit(p, m)
    return ValidationReport(
        marginal_ok=not marginal_errors,
        feasible_ok=not infeasible,
        balance_ok=all(d == 0 for d in deficits.values()),
        marginal_errors=marginal_errors,
        infeasible_atoms=infeasible,
        deficits=deficits,
    )


@dataclass(frozen=True, eq=False)
class Outcome:
    problem: MatchingProblem
    measure: DiscreteMeasure

    @classmethod
    def of(cls, problem: MatchingProblem, measure, check: bool = True) -> "Outcome":
        if not isinstance(measure, DiscreteMeasure):
            measure = DiscreteMeasure(
                (MatchedType(t, ms), w) for (t, ms), w in
                (measure.items() if isinstance(measure, dict) else measure)
            )
        if check:
            report = validate_outcome(problem, measure)
            if not report.valid:
                raise InvalidOutcome(report)
        return cls(problem, measure)

    def positive_mass_subtypes(self) -> list:
        return positive_mass_subtypes(self)

    def __eq__(self, other):
        return isinstance(other, Outcome) and self.measure == other.measure

    __hash__ = object.__hash__


def positive_mass_subtypes(o) -> list:
    """Matched types carrying positive weight, in canonical order."""
    m = o.measure if isinstance(o, Outcome) else o
    return [(MatchedType(*point), w) for point, w in m.atoms if w > 0]
