"""Ground metric spaces, sided contracts and bounded multisets.

A multiset of sided contracts is stored in canonical form: a sorted tuple of
``(SidedContract, multiplicity)`` pairs.  Two multisets that differ only by the
order in which their elements were listed are therefore the same object as far
as ``==`` and ``hash`` are concerned.

The metric on multisets of equal cardinality is the bottleneck distance

    d*(a, b) = min over pairings of max pairwise ground distance,

with ground distances capped at 1 and distance 2 between multisets of
different cardinality.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from numbers import Number
from typing import Callable, Iterable, NamedTuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

CROSS_CARDINALITY_DISTANCE = 2
COMPONENT_CAP = 1


# ---------------------------------------------------------------------------
# ground spaces

_PLAIN_NUMBERS = (int, Fraction, float)


def point_key(p):
    """Total order key over atoms, reals and tuples of those."""
    if type(p) in _PLAIN_NUMBERS:
        return (0, p)
    if isinstance(p, tuple):
        return (2, tuple(point_key(q) for q in p))
    if isinstance(p, Number):
        return (0, p)
    if hasattr(p, "sort_key"):
        return (3, p.sort_key())
    if p is None:
        return (-1,)
    return (1, str(p))


@dataclass(frozen=True)
class AtomSpace:
    """Finite set of labels with the discrete metric."""

    kind = "atoms"

    def dist(self, a, b):
        return 0 if a == b else 1


@dataclass(frozen=True)
class IntervalSpace:
    """The unit interval with |x - y|."""

    kind = "interval"

    def dist(self, a, b):
        return abs(a - b)


@dataclass(frozen=True)
class CircleSpace:
    """[0, 1) glued at the ends: d(x, y) = min(|x - y|, 1 - |x - y|)."""

    kind = "circle"

    def dist(self, a, b):
        d = abs(a - b) % 1
        return min(d, 1 - d)

    @staticmethod
    def wrap(x):
        return x % 1


@dataclass(frozen=True)
class ProductSpace:
    """Finite product with the max metric."""

    factors: tuple

    kind = "product"

    def dist(self, a, b):
        return max(f.dist(x, y) for f, x, y in zip(self.factors, a, b))


def space_from_kind(kind: str, factors=()):
    if kind == "atoms":
        return AtomSpace()
    if kind == "interval":
        return IntervalSpace()
    if kind == "circle":
        return CircleSpace()
    if kind == "product":
        return ProductSpace(tuple(factors))
    raise ValueError(f"unknown space kind {kind!r}")


# ---------------------------------------------------------------------------
# sided contracts and multisets

class SidedContract(NamedTuple):
    contract: object
    side: int

    def sort_key(self):
        return (point_key(self.contract), self.side)


def sided(contract, side: int) -> SidedContract:
    if side not in (1, 2):
        raise ValueError(f"side must be 1 or 2, got {side!r}")
    return SidedContract(contract, side)


def sided_distance(contract_space, x: SidedContract, y: SidedContract):
    """Max of the contract distance and the discrete side distance, capped at 1."""
    if x.side != y.side:
        return COMPONENT_CAP
    d = contract_space.dist(x.contract, y.contract)
    return d if d < COMPONENT_CAP else COMPONENT_CAP


class Multiset:
    """Finite multiset of sided contracts, immutable and canonically ordered."""

    __slots__ = ("_items", "_hash", "_card", "_key")

    def __init__(self, counts=None):
        if counts is None:
            counts = {}
        elif not isinstance(counts, dict):
            tally: dict = {}
            for x in counts:
                tally[x] = tally.get(x, 0) + 1
            counts = tally
        items = []
        for x, c in counts.items():
            if c < 0:
                raise ValueError("negative multiplicity")
            if c:
                if not isinstance(x, SidedContract):
                    x = sided(*x)
                items.append((x, int(c)))
        items.sort(key=lambda xc: xc[0].sort_key())
        self._items = tuple(items)
        self._hash = hash(self._items)
        self._card = sum(c for _, c in items)
        self._key = None

    @classmethod
    def of(cls, *elements) -> "Multiset":
        """Build from sided contracts (or ``(contract, side)`` pairs) with repetition."""
        return cls([e if isinstance(e, SidedContract) else sided(*e) for e in elements])

    @property
    def items(self) -> tuple:
        return self._items

    def __len__(self) -> int:
        return self._card

    def __iter__(self):
        return iter(self.elements())

    def __bool__(self) -> bool:
        return bool(self._items)

    def count(self, x) -> int:
        for y, c in self._items:
            if y == x:
                return c
        return 0

    def support(self) -> tuple:
        return tuple(x for x, _ in self._items)

    def elements(self) -> tuple:
        """Canonical representative in X^n (the measurable section)."""
        return tuple(x for x, c in self._items for _ in range(c))

    def as_dict(self) -> dict:
        return dict(self._items)

    def sort_key(self):
        if self._key is None:
            self._key = tuple((x.sort_key(), c) for x, c in self._items)
        return self._key

    def __eq__(self, other):
        return isinstance(other, Multiset) and self._items == other._items

    def __hash__(self):
        return self._hash

    def __add__(self, other: "Multiset") -> "Multiset":
        return union(self, other)

    def __sub__(self, other: "Multiset") -> "Multiset":
        d = self.as_dict()
        for x, c in other.items:
            left = d.get(x, 0) - c
            if left < 0:
                raise ValueError("difference is not a multiset")
            d[x] = left
        return Multiset(d)

    def __repr__(self):
        body = ", ".join(
            f"({x.contract!s},{x.side})" + (f"x{c}" if c > 1 else "") for x, c in self._items
        )
        return "{" + body + "}"


EMPTY = Multiset()


def canonicalize(m) -> Multiset:
    """Canonical multiset for a list of sided contracts (or an existing multiset)."""
    if isinstance(m, Multiset):
        return Multiset(m.as_dict())
    return Multiset([x if isinstance(x, SidedContract) else sided(*x) for x in m])


def is_submultiset(a: Multiset, b: Multiset, strict: bool = False) -> bool:
    bd = b.as_dict()
    if any(c > bd.get(x, 0) for x, c in a.items):
        return False
    return not (strict and a == b)


def union(a: Multiset, b: Multiset) -> Multiset:
    d = a.as_dict()
    for x, c in b.items:
        d[x] = d.get(x, 0) + c
    return Multiset(d)


def enumerate_submultisets(m: Multiset) -> list:
    """All multisubsets of ``m`` (including the empty one and ``m`` itself).

    Order is lexicographic in the per-element multiplicities, so ``EMPTY``
    comes first and ``m`` last.
    """
    support = [x for x, _ in m.items]
    ranges = [range(c + 1) for _, c in m.items]
    return [Multiset(dict(zip(support, combo))) for combo in itertools.product(*ranges)]


def multisets_up_to(elements: Iterable[SidedContract], n_max: int) -> list:
    """Every multiset over ``elements`` with cardinality at most ``n_max``."""
    elements = sorted(set(elements), key=SidedContract.sort_key)
    out = []
    for n in range(n_max + 1):
        for combo in itertools.combinations_with_replacement(elements, n):
            out.append(Multiset(combo))
    return out


# ---------------------------------------------------------------------------
# bottleneck metric

def _perfect_matching_exists(ok: np.ndarray) -> bool:
    match = maximum_bipartite_matching(csr_matrix(ok.astype(np.int8)), perm_type="column")
    return bool(np.all(match >= 0))


def bottleneck_assignment(xs, ys, dist: Callable) -> tuple:
    """Minimise the largest pairwise cost over bijections ``xs -> ys``.

    Returns ``(value, perm)`` with ``ys[perm[i]]`` paired to ``xs[i]``.
    Threshold search over the sorted distinct costs; feasibility of a
    threshold is a perfect-matching check on the bipartite graph of allowed
    pairs.
    """
    n = len(xs)
    if n != len(ys):
        raise ValueError("bottleneck assignment needs equal sizes")
    if n == 0:
        return 0, ()
    cost = [[dist(x, y) for y in ys] for x in xs]
    if n == 1:
        return cost[0][0], (0,)
    values = sorted(set(v for row in cost for v in row))
    lo, hi = 0, len(values) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        ok = np.array([[c <= values[mid] for c in row] for row in cost])
        if _perfect_matching_exists(ok):
            hi = mid
        else:
            lo = mid + 1
    best = values[lo]
    ok = np.array([[c <= best for c in row] for row in cost]).astype(np.int8)
    match = maximum_bipartite_matching(csr_matrix(ok), perm_type="column")
    return best, tuple(int(j) for j in match)


def d_star(a: Multiset, b: Multiset, contract_space) -> Number:
    """Quotient bottleneck distance on multisets of sided contracts."""
    if len(a) != len(b):
        return CROSS_CARDINALITY_DISTANCE
    if a == b:
        return 0
    value, _ = bottleneck_assignment(
        a.elements(), b.elements(), lambda x, y: sided_distance(contract_space, x, y)
    )
    return value


def d_star_bruteforce(a: Multiset, b: Multiset, contract_space) -> Number:
    """Minimum over all n! orderings; only for small n."""
    if len(a) != len(b):
        return CROSS_CARDINALITY_DISTANCE
    xs, ys = a.elements(), b.elements()
    if not xs:
        return 0
    return min(
        max(sided_distance(contract_space, x, y) for x, y in zip(xs, perm))
        for perm in itertools.permutations(ys)
    )


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(x).limit_denominator(10**12) if isinstance(x, float) else Fraction(x)
