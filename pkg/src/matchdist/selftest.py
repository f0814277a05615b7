"""Seeded property checks for the metric and the star map, run by ``selftest``."""
from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np

from .measure import DiscreteMeasure, star_measure
from .multispace import AtomSpace, IntervalSpace, Multiset, d_star, d_star_bruteforce, sided


def _random_multiset(rng, n, labels, floating):
    xs = []
    for _ in range(n):
        y = float(rng.random()) if floating else labels[int(rng.integers(len(labels)))]
        xs.append(sided(y, int(rng.integers(1, 3))))
    return Multiset(xs)


def metric_suite(trials: int = 500, seed: int = 0) -> list:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
    labels = list("abcde")
    results = []
    for floating, space, tol in ((False, AtomSpace(), 0), (True, IntervalSpace(), 1e-12)):
        bad = 0
        for _ in range(trials):
            ms = [_random_multiset(rng, int(rng.integers(0, 5)), labels, floating) for _ in range(3)]
            a, b, c = ms
            dab, dba = d_star(a, b, space), d_star(b, a, space)
            ok = (
                (dab == 0) == (a == b)
                and abs(dab - dba) <= tol
                and d_star(a, c, space) <= dab + d_star(b, c, space) + tol
            )
            bad += not ok
        results.append((f"metric axioms ({'floating' if floating else 'atomic'})", bad == 0,
                        f"{bad} violations in {trials}"))
    bad = 0
    for _ in range(trials):
        n = int(rng.integers(1, 6))
        a = _random_multiset(rng, n, labels, True)
        b = _random_multiset(rng, n, labels, True)
        bad += d_star(a, b, IntervalSpace()) != d_star_bruteforce(a, b, IntervalSpace())
    results.append(("bottleneck equals permutation brute force", bad == 0, f"{bad} mismatches in {trials}"))
    return results


def star_suite(trials: int = 500, seed: int = 0) -> list:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2,)))
    labels = list("abc")

    def random_measure():
        atoms = []
        for _ in range(int(rng.integers(1, 5))):
            m = _random_multiset(rng, int(rng.integers(0, 4)), labels, False)
            atoms.append((m, Fraction(int(rng.integers(1, 10)), int(rng.integers(1, 10)))))
        return DiscreteMeasure(atoms)

    bad_mass = bad_linear = 0
    for _ in range(trials):
        a, b = random_measure(), random_measure()
        c = Fraction(int(rng.integers(1, 7)), int(rng.integers(1, 7)))
        expected = sum((w * len(m) for m, w in a.atoms), Fraction(0))
        bad_mass += star_measure(a).total_mass != expected
        lhs = star_measure(a + b.scale(c))
        rhs = star_measure(a) + star_measure(b).scale(c)
        bad_linear += DiscreteMeasure(lhs.atoms) != DiscreteMeasure(rhs.atoms)
    return [
        ("star map total mass", bad_mass == 0, f"{bad_mass} mismatches in {trials}"),
        ("star map linearity", bad_linear == 0, f"{bad_linear} mismatches in {trials}"),
    ]


def run_all(trials: int = 500, seed: int = 0) -> list:
    return list(itertools.chain(metric_suite(trials, seed), star_suite(trials, seed)))
