"""Finite-support measures with exact rational weights."""
from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix, vstack

from .multispace import Multiset, point_key


class DiscreteMeasure:
    """Nonnegative finite-support measure.

    Atoms at equal points are merged and zero weights are dropped, so the
    stored atom list is a canonical form: two measures compare equal iff they
    put the same weight on every point.
    """

    __slots__ = ("_atoms", "_index")

    def __init__(self, atoms: Iterable = ()):
        if isinstance(atoms, dict):
            atoms = atoms.items()
        merged: dict = {}
        for point, w in atoms:
            w = Fraction(w)
            if w < 0:
                raise ValueError(f"negative weight {w} at {point!r}")
            merged[point] = merged.get(point, 0) + w
        items = [(p, w) for p, w in merged.items() if w != 0]
        items.sort(key=lambda pw: point_key(pw[0]))
        self._atoms = tuple(items)
        self._index = dict(items)

    @property
    def atoms(self) -> tuple:
        return self._atoms

    def __iter__(self):
        return iter(self._atoms)

    def __len__(self):
        return len(self._atoms)

    def __getitem__(self, point) -> Fraction:
        return self._index.get(point, Fraction(0))

    def __eq__(self, other):
        return isinstance(other, DiscreteMeasure) and self._atoms == other._atoms

    def __hash__(self):
        return hash(self._atoms)

    def __add__(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        return DiscreteMeasure(self._atoms + other._atoms)

    def scale(self, c) -> "DiscreteMeasure":
        c = Fraction(c)
        return DiscreteMeasure((p, c * w) for p, w in self._atoms)

    def support(self) -> tuple:
        return tuple(p for p, _ in self._atoms)

    @property
    def total_mass(self) -> Fraction:
        return sum((w for _, w in self._atoms), Fraction(0))

    def is_probability(self) -> bool:
        return self.total_mass == 1

    def pushforward(self, f: Callable) -> "DiscreteMeasure":
        return DiscreteMeasure((f(p), w) for p, w in self._atoms)

    def integrate(self, f: Callable):
        return sum(w * f(p) for p, w in self._atoms)

    def __repr__(self):
        body = ", ".join(f"{p!r}: {w}" for p, w in self._atoms)
        return f"DiscreteMeasure({{{body}}})"


class CountingMeasure(DiscreteMeasure):
    """Measure on sided contracts counting multiplicities; not normalised."""

    __slots__ = ()


def dirac(point) -> DiscreteMeasure:
    return DiscreteMeasure([(point, 1)])


def uniform(points) -> DiscreteMeasure:
    points = list(points)
    return DiscreteMeasure((p, Fraction(1, len(points))) for p in points)


def marginal(m: DiscreteMeasure, coordinate: int) -> DiscreteMeasure:
    """Pushforward under the projection onto one coordinate of a product."""
    if not m.atoms:
        return DiscreteMeasure()
    width = len(m.atoms[0][0])
    if not 0 <= coordinate < width:
        raise IndexError(f"coordinate {coordinate} out of range for {width}-fold product")
    return m.pushforward(lambda p: p[coordinate])


def product(*ms: DiscreteMeasure) -> DiscreteMeasure:
    atoms = []
    for combo in itertools.product(*(m.atoms for m in ms)):
        w = Fraction(1)
        for _, wi in combo:
            w *= wi
        atoms.append((tuple(p for p, _ in combo), w))
    return DiscreteMeasure(atoms)


def product_power(m: DiscreteMeasure, n: int) -> DiscreteMeasure:
    if n < 1:
        raise ValueError("product power needs n >= 1")
    return product(*([m] * n))


def star_measure(t: DiscreteMeasure) -> CountingMeasure:
    """Counting measure on sided contracts induced by a measure on multisets.

    Each atom ``(m, w)`` puts ``w * m(x)`` on every ``x`` in the support of
    ``m``.  Atoms may also be ``(type, multiset)`` pairs, in which case the
    multiset coordinate is used.
    """
    out: dict = {}
    for point, w in t.atoms:
        ms = point if isinstance(point, Multiset) else point[1]
        for x, c in ms.items:
            out[x] = out.get(x, 0) + w * c
    return CountingMeasure(out)


def w1_distance(a: DiscreteMeasure, b: DiscreteMeasure, dist: Callable) -> float:
    """Exact optimal-transport cost between two measures of equal mass."""
    if a.total_mass != b.total_mass:
        raise ValueError(f"mass mismatch: {a.total_mass} vs {b.total_mass}")
    if a == b or not a.atoms:
        return 0.0
    xs, wa = zip(*a.atoms)
    ys, wb = zip(*b.atoms)
    if len(xs) == 1 or len(ys) == 1:
        return float(sum(
            wx * wy * dist(x, y) for x, wx in a.atoms for y, wy in b.atoms
        ) / a.total_mass)
    n, k = len(xs), len(ys)
    cost = np.array([[float(dist(x, y)) for y in ys] for x in xs]).ravel()
    rows = np.repeat(np.arange(n), k)
    cols = np.arange(n * k)
    a_rows = coo_matrix((np.ones(n * k), (rows, cols)), shape=(n, n * k))
    b_rows = coo_matrix(
        (np.ones(n * k), (np.tile(np.arange(k), n), cols)), shape=(k, n * k)
    )
    a_eq = vstack([a_rows, b_rows]).tocsr()
    b_eq = np.concatenate([[float(w) for w in wa], [float(w) for w in wb]])
    res = linprog(cost, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"transport solve failed: {res.message}")
    return max(float(res.fun), 0.0)
