import random
from fractions import Fraction as F

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from matchdist.measure import (
    CountingMeasure,
    DiscreteMeasure,
    dirac,
    marginal,
    product,
    product_power,
    star_measure,
    uniform,
    w1_distance,
)
from matchdist.multispace import EMPTY, Multiset, sided


def line(a, b):
    return abs(a - b)


def random_measure(rng, n_points=4, labels="abcdef"):
    return DiscreteMeasure(
        (rng.choice(labels), F(rng.randint(1, 9), rng.randint(1, 9))) for _ in range(n_points)
    )


def test_atoms_merge_and_drop_zeros():
    m = DiscreteMeasure([("a", F(1, 4)), ("b", 0), ("a", F(1, 4))])
    assert m.atoms == (("a", F(1, 2)),)
    assert m["b"] == 0


def test_negative_weight_rejected():
    with pytest.raises(ValueError):
        DiscreteMeasure([("a", -1)])


def test_marginal_projects():
    m = DiscreteMeasure([(("a", "u"), F(1, 2)), (("b", "v"), F(1, 2))])
    assert marginal(m, 0) == DiscreteMeasure([("a", F(1, 2)), ("b", F(1, 2))])


def test_marginal_of_product():
    a = DiscreteMeasure([("x", F(1, 3)), ("y", F(2, 3))])
    b = DiscreteMeasure([(1, F(1, 4)), (2, F(3, 4))])
    assert marginal(product(a, b), 0) == a
    assert marginal(product(a, b), 1) == b


def test_marginal_coordinate_out_of_range():
    with pytest.raises(IndexError):
        marginal(DiscreteMeasure([(("a", "u"), 1)]), 2)


def test_marginal_preserves_mass():
    rng = random.Random(1)
    for _ in range(1000):
        m = DiscreteMeasure(
            ((rng.choice("ab"), rng.choice("uvw")), F(rng.randint(1, 9), rng.randint(1, 9)))
            for _ in range(5)
        )
        assert marginal(m, 0).total_mass == m.total_mass
        assert marginal(m, 1).total_mass == m.total_mass


def test_product_power_examples():
    m = DiscreteMeasure([("A", F(1, 2)), ("B", F(1, 2))])
    sq = product_power(m, 2)
    assert len(sq) == 4 and all(w == F(1, 4) for _, w in sq.atoms)
    assert product_power(dirac("x"), 3) == dirac(("x", "x", "x"))
    with pytest.raises(ValueError):
        product_power(m, 0)


def test_product_power_mass_and_marginals():
    rng = random.Random(2)
    for _ in range(50):
        m = random_measure(rng)
        m = m.scale(1 / m.total_mass)
        for n in range(1, 5):
            p = product_power(m, n)
            assert p.total_mass == 1
            assert len(p) == len(m) ** n
            for c in range(n):
                assert marginal(p, c) == m


def test_star_measure_examples():
    y = sided("y", 1)
    assert star_measure(dirac(Multiset({y: 2}))) == CountingMeasure([(y, 2)])
    half = DiscreteMeasure([(Multiset.of(("y", 1)), F(1, 2)), (EMPTY, F(1, 2))])
    assert star_measure(half) == CountingMeasure([(y, F(1, 2))])


def test_star_measure_total_mass_against_projections():
    m2 = Multiset.of(("y", 1), ("z", 2))
    m1 = Multiset.of(("y", 2))
    t = DiscreteMeasure([(m2, F(1, 3)), (m1, F(2, 3))])
    assert star_measure(t).total_mass == F(4, 3)
    # sum over coordinate projections of the canonical representative
    by_projection = {}
    for n in (1, 2):
        for i in range(n):
            for m, w in t.atoms:
                if len(m) == n:
                    x = m.elements()[i]
                    by_projection[x] = by_projection.get(x, 0) + w
    assert star_measure(t) == CountingMeasure(by_projection)


def test_star_measure_accepts_matched_type_points():
    t = DiscreteMeasure([(("t", Multiset.of(("y", 1))), F(1, 2)), (("s", EMPTY), F(1, 2))])
    assert star_measure(t) == CountingMeasure([(sided("y", 1), F(1, 2))])


def test_star_measure_linear():
    rng = random.Random(3)
    labels = ["y", "z"]

    def rand():
        return DiscreteMeasure(
            (Multiset([sided(rng.choice(labels), rng.choice((1, 2))) for _ in range(rng.randint(0, 3))]),
             F(rng.randint(1, 9), rng.randint(1, 9))) for _ in range(3)
        )

    for _ in range(300):
        a, b, c = rand(), rand(), F(rng.randint(1, 5), rng.randint(1, 5))
        lhs = star_measure(a + b.scale(c))
        rhs = star_measure(a) + star_measure(b).scale(c)
        assert lhs.atoms == rhs.atoms


def test_w1_examples():
    a = DiscreteMeasure([(0, F(1, 2)), (1, F(1, 2))])
    assert w1_distance(a, a, line) == 0
    assert w1_distance(dirac(F(1, 5)), dirac(F(7, 10)), line) == pytest.approx(0.5)
    assert w1_distance(a, dirac(0), line) == pytest.approx(0.5)


def test_w1_mass_mismatch():
    with pytest.raises(ValueError):
        w1_distance(dirac(0), DiscreteMeasure([(0, F(1, 2))]), line)


def test_w1_matches_assignment_on_uniform_measures():
    rng = np.random.default_rng(4)
    for _ in range(30):
        n = 6
        xs = [F(int(v), 100) for v in rng.integers(0, 100, n)]
        ys = [F(int(v), 100) for v in rng.integers(0, 100, n)]
        cost = np.array([[float(abs(x - y)) for y in ys] for x in xs])
        r, c = linear_sum_assignment(cost)
        expected = cost[r, c].sum() / n
        got = w1_distance(uniform(xs), uniform(ys), line)
        assert got == pytest.approx(expected, abs=1e-9)


def test_w1_metric_axioms():
    rng = random.Random(5)
    pts = [F(i, 10) for i in range(11)]

    def rand():
        atoms = [(rng.choice(pts), rng.randint(1, 5)) for _ in range(4)]
        total = sum(w for _, w in atoms)
        return DiscreteMeasure((p, F(w, total)) for p, w in atoms)

    for _ in range(100):
        a, b, c = rand(), rand(), rand()
        ab, ba = w1_distance(a, b, line), w1_distance(b, a, line)
        assert ab == pytest.approx(ba, abs=1e-9)
        assert w1_distance(a, c, line) <= ab + w1_distance(b, c, line) + 1e-9
        assert (ab < 1e-12) == (a == b)


def test_star_integrals_follow_w1_convergence():
    base = [(F(1, 4), F(1, 2)), (F(3, 4), F(1, 2))]

    def tau(shift):
        return DiscreteMeasure(
            (Multiset.of((x + shift, 1), (x, 2)), w) for x, w in base
        )

    panel = [lambda x: float(x.contract), lambda x: float(abs(x.contract - F(1, 2))),
             lambda x: float(x.side == 1)]
    limit = star_measure(tau(0))
    errs = []
    for k in (1, 10, 100, 1000, 10_000):
        star_k = star_measure(tau(F(1, k)))
        errs.append(max(abs(star_k.integrate(f) - limit.integrate(f)) for f in panel))
    assert errs == sorted(errs, reverse=True)
    assert errs[-1] < 1e-3
    assert max(abs(star_measure(tau(F(1, 10**12))).integrate(f) - limit.integrate(f))
               for f in panel) < 1e-9
