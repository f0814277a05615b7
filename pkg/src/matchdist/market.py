"""Finite matching problems: types, contracts, feasibility and utilities."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, NamedTuple, Optional

from .measure import DiscreteMeasure
from .multispace import (
    EMPTY,
    Multiset,
    SidedContract,
    multisets_up_to,
    point_key,
    sided,
)


class MatchedType(NamedTuple):
    """A type point together with the multiset of contracts it holds."""

    t: object
    choice: Multiset


class InfeasibleChoice(ValueError):
    pass


class UnknownType(KeyError):
    pass


# ---------------------------------------------------------------------------
# pair feasibility (the contract sets available to an ordered pair of types)

class TableFeasibility:
    """Explicit table ``(t, t') -> contracts``; missing pairs are empty."""

    def __init__(self, table: dict):
        self._table = {
            pair: frozenset(ys) for pair, ys in table.items() if ys
        }

    def __call__(self, t, t2) -> frozenset:
        return self._table.get((t, t2), frozenset())

    def pairs(self) -> list:
        return sorted(self._table.items(), key=lambda kv: point_key(kv[0]))

    def __eq__(self, other):
        return isinstance(other, TableFeasibility) and self._table == other._table

    def __hash__(self):
        return hash(frozenset(self._table.items()))


class AllFeasible:
    """Every contract is available to every ordered pair of types."""

    def __init__(self, contracts):
        self.contracts = frozenset(contracts)

    def __call__(self, t, t2) -> frozenset:
        return self.contracts

    def __eq__(self, other):
        return isinstance(other, AllFeasible) and self.contracts == other.contracts

    def __hash__(self):
        return hash(self.contracts)


class TabulatedUtility:
    """Utility given by a table ``(t, multiset) -> value``."""

    def __init__(self, table: dict):
        self.table = dict(table)

    def __call__(self, t, m: Multiset):
        try:
            return self.table[(t, m)]
        except KeyError:
            raise InfeasibleChoice(f"no utility tabulated for type {t!r} and {m!r}") from None

    def __eq__(self, other):
        return isinstance(other, TabulatedUtility) and self.table == other.table

    def __hash__(self):
        return hash(frozenset(self.table.items()))


# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MatchingProblem:
    """A matching problem with finitely many type and contract points.

    ``chi_bar(t, t')`` gives the contracts an agent of type ``t`` (side 1)
    and an agent of type ``t'`` (side 2) may sign together.  ``sided_rule``,
    when given, decides membership of a sided contract in the feasible set of
    an arbitrary type point; this is how continuum problems are evaluated off
    the type grid.
    """

    type_space: object
    contract_space: object
    types: tuple
    contracts: tuple
    population: DiscreteMeasure
    N: int
    chi_bar: Callable
    utility: Callable
    lipschitz: Optional[Fraction] = None
    name: str = ""
    sided_rule: Optional[Callable] = None
    perturb: Optional[Callable] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("contract bound N must be positive")
        if not self.population.is_probability():
            raise ValueError("population must be a probability measure")
        known = set(self.types)
        stray = [t for t in self.population.support() if t not in known]
        if stray:
            raise ValueError(f"population charges points outside the type grid: {stray[:3]}")

    # -- feasibility -------------------------------------------------------
    def feasible_contracts(self, t) -> frozenset:
        cache = self._cache.setdefault("X", {})
        if t in cache:
            return cache[t]
        if t not in set(self.types):
            raise UnknownType(t)
        xs = set()
        for t2 in self.types:
            xs.update(sided(y, 1) for y in self.chi_bar(t, t2))
            xs.update(sided(y, 2) for y in self.chi_bar(t2, t))
        cache[t] = frozenset(xs)
        return cache[t]

    def sided_feasible(self, t, x: SidedContract) -> bool:
        if self.sided_rule is not None:
            return self.sided_rule(t, x)
        return x in self.feasible_contracts(t)

    def is_feasible_choice(self, t, m: Multiset) -> bool:
        if len(m) > self.N:
            return False
        return all(self.sided_feasible(t, x) for x in m.support())

    def pair_contracts(self, t, t2) -> frozenset:
        return frozenset(self.chi_bar(t, t2))

    def partner_set(self, t) -> tuple:
        return tuple(
            t2 for t2 in self.types if self.chi_bar(t, t2) or self.chi_bar(t2, t)
        )

    def choices(self, t) -> list:
        """All feasible multisets for ``t`` (the finite set chi(t))."""
        cache = self._cache.setdefault("choices", {})
        if t not in cache:
            cache[t] = multisets_up_to(self.feasible_contracts(t), self.N)
        return cache[t]

    # -- preferences -------------------------------------------------------
    def u(self, t, m: Multiset):
        """Unchecked utility evaluation (hot path)."""
        return self.utility(t, m)

    def utility_of(self, t, m: Multiset):
        if not self.is_feasible_choice(t, m):
            raise InfeasibleChoice(f"{m!r} is not feasible for type {t!r}")
        return self.utility(t, m)

    def with_population(self, population: DiscreteMeasure, types=None) -> "MatchingProblem":
        return MatchingProblem(
            self.type_space, self.contract_space,
            tuple(types) if types is not None else self.types,
            self.contracts, population, self.N, self.chi_bar, self.utility,
            self.lipschitz, self.name, self.sided_rule, self.perturb,
        )

    def __eq__(self, other):
        if not isinstance(other, MatchingProblem):
            return NotImplemented
        return (
            self.type_space == other.type_space
            and self.contract_space == other.contract_space
            and self.types == other.types
            and self.contracts == other.contracts
            and self.population == other.population
            and self.N == other.N
            and all(
                self.chi_bar(a, b) == other.chi_bar(a, b)
                for a in self.types for b in self.types
            )
            and all(
                self.u(t, m) == other.u(t, m) for t in self.types for m in self.choices(t)
            )
            and self.lipschitz == other.lipschitz
        )

    __hash__ = object.__hash__


def feasible_contracts(p: MatchingProblem, t) -> frozenset:
    return p.feasible_contracts(t)


def is_feasible_choice(p: MatchingProblem, t, m: Multiset) -> bool:
    return p.is_feasible_choice(t, m)


def utility(p: MatchingProblem, t, m: Multiset):
    return p.utility_of(t, m)


def finite_problem(types, contracts, population, N, feasibility, utility_table,
                   *, type_space=None, contract_space=None, lipschitz=None, name=""):
    """Convenience constructor for problems over atom labels.

    ``feasibility`` is either the string ``"all"`` or a dict
    ``(t, t') -> iterable of contracts``.
    """
    from .multispace import AtomSpace

    types = tuple(types)
    contracts = tuple(contracts)
    if feasibility == "all":
        chi = AllFeasible(contracts)
    else:
        chi = TableFeasibility(feasibility)
    if not isinstance(population, DiscreteMeasure):
        population = DiscreteMeasure(population)
    return MatchingProblem(
        type_space or AtomSpace(), contract_space or AtomSpace(), types, contracts,
        population, N, chi, TabulatedUtility(utility_table), lipschitz, name,
    )


__all__ = [
    "EMPTY", "MatchedType", "MatchingProblem", "TableFeasibility", "AllFeasible", "TabulatedUtility",
    "InfeasibleChoice", "UnknownType", "feasible_contracts", "is_feasible_choice",
    "utility", "finite_problem",
]
