import random
from fractions import Fraction as F

import pytest

from matchdist import gallery
from matchdist.market import (
    InfeasibleChoice,
    UnknownType,
    feasible_contracts,
    finite_problem,
    is_feasible_choice,
    utility,
)
from matchdist.multispace import EMPTY, CircleSpace, IntervalSpace, Multiset, ProductSpace, d_star, sided

from markets import random_market


def small(table):
    util = {}
    p = finite_problem(("s", "t"), ("y0", "y1"), {"s": F(1, 2), "t": F(1, 2)}, 1, table, util)
    return p


def test_empty_pair_table_gives_no_contracts():
    p = small({})
    assert feasible_contracts(p, "s") == frozenset()
    assert feasible_contracts(p, "t") == frozenset()


def test_single_pair_contract_sides():
    p = small({("s", "t"): ["y0"]})
    assert feasible_contracts(p, "s") == {sided("y0", 1)}
    assert feasible_contracts(p, "t") == {sided("y0", 2)}


def test_unknown_type_rejected():
    with pytest.raises(UnknownType):
        feasible_contracts(small({}), "u")


def test_assortative_contract_sets():
    p = gallery.build("assortative", 0, 4)
    t = p.types[1]
    xs = feasible_contracts(p, t)
    assert xs == {sided((t, s), 1) for s in p.types} | {sided((s, t), 2) for s in p.types}


def test_feasible_choice_rules():
    p = small({("s", "t"): ["y0"]})
    assert is_feasible_choice(p, "s", EMPTY)
    assert is_feasible_choice(p, "s", Multiset.of(("y0", 1)))
    assert not is_feasible_choice(p, "s", Multiset.of(("y0", 1), ("y0", 1)))
    assert not is_feasible_choice(p, "s", Multiset.of(("y0", 2)))
    assert not is_feasible_choice(p, "s", Multiset.of(("y1", 1)))


def test_gallery_utilities_closed_form():
    p = gallery.build("assortative", 0, 8)
    t, s = p.types[2], p.types[5]
    assert utility(p, t, Multiset.of(((t, s), 1))) == s
    assert utility(p, t, Multiset.of(((s, t), 2))) == s
    assert utility(p, t, EMPTY) == -1
    c = gallery.build("cyclic", F(1, 4), 8)
    t, s = c.types[0], c.types[2]
    assert utility(c, t, Multiset.of(((t, s), 1))) == -CircleSpace().dist(t + F(1, 4), s)
    assert utility(c, t, Multiset.of(((t, s), 1))) == 0


def test_utility_rejects_infeasible_choice():
    p = gallery.build("assortative", 0, 4)
    t, s = p.types[0], p.types[1]
    with pytest.raises(InfeasibleChoice):
        utility(p, t, Multiset.of(((s, s), 1)))


def test_contracts_only_between_partners():
    for seed in range(20):
        p, _ = random_market(seed)
        for t in p.types:
            partners = set(p.partner_set(t))
            for t2 in p.types:
                if t2 not in partners:
                    assert not p.chi_bar(t, t2) and not p.chi_bar(t2, t)


def test_feasible_contracts_monotone_in_pair_table():
    rng = random.Random(8)
    types = ("a", "b", "c")
    ys = ("y0", "y1", "y2")
    for _ in range(100):
        table = {(a, b): [y for y in ys if rng.random() < 0.3] for a in types for b in types}
        bigger = {k: v + [y for y in ys if rng.random() < 0.3] for k, v in table.items()}
        pop = {t: F(1, 3) for t in types}
        p = finite_problem(types, ys, pop, 1, table, {})
        q = finite_problem(types, ys, pop, 1, bigger, {})
        for t in types:
            assert feasible_contracts(p, t) <= feasible_contracts(q, t)


@pytest.mark.parametrize("gid,space", [("assortative", IntervalSpace()), ("cyclic", CircleSpace())])
def test_gallery_lipschitz_bound(gid, space):
    rng = random.Random(9)
    p = gallery.continuum(gid, F(3, 10), 8)
    L = p.lipschitz
    grid = [F(i, 40) for i in range(40)]
    cs = space if gid == "cyclic" else IntervalSpace()
    contract_space = ProductSpace((cs, cs))
    for _ in range(10_000):
        t, t2, s, s2 = (rng.choice(grid) for _ in range(4))
        m = Multiset.of(((t, s), 1))
        m2 = Multiset.of(((t2, s2), 1)) if rng.random() < 0.8 else Multiset.of(((s2, t2), 2))
        if rng.random() < 0.05:
            m2 = EMPTY
        lhs = abs(p.utility_of(t, m) - p.utility_of(t2, m2))
        rhs = L * max(space.dist(t, t2), d_star(m, m2, contract_space))
        assert lhs <= rhs


def test_cyclic_utility_moves_twice_as_fast_as_the_type():
    p = gallery.continuum("cyclic", F(0), 8)
    t, t2 = F(0), F(1, 10)
    # own type and partner move in opposite directions by 1/10 each
    m, m2 = Multiset.of(((t, F(1, 2)), 1)), Multiset.of(((t2, F(2, 5)), 1))
    gap = abs(p.utility_of(t, m) - p.utility_of(t2, m2))
    dist = max(CircleSpace().dist(t, t2), F(1, 10))
    assert gap == 2 * dist
    assert p.lipschitz == 2
