"""The two roommate economies on a continuum of types.

Both use ``N = 1`` and contracts that name the two types signing them: the
contract ``(a, b)`` is signed on side 1 by type ``a`` and on side 2 by type
``b``.  A type values a contract only through its partner coordinate, so the
side it signs is irrelevant to it.

* ``assortative``: types in [0, 1], partner ``t'`` is worth ``t'``.
* ``cyclic``: types on the circle of circumference 1, partner ``t'`` is worth
  ``-d(t + alpha, t')``.

Being unmatched is worth -1 in both.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .market import InfeasibleChoice, MatchedType, MatchingProblem
from .measure import DiscreteMeasure
from .multispace import (
    CircleSpace,
    IntervalSpace,
    Multiset,
    ProductSpace,
    SidedContract,
    point_key,
    sided,
)
from .outcome import Outcome

GALLERY_IDS = ("assortative", "cyclic")
UNMATCHED = Fraction(-1)
_PERTURB_RESOLUTION = 10**6


def as_alpha(alpha) -> Fraction:
    a = Fraction(str(alpha)) if isinstance(alpha, float) else Fraction(alpha)
    if not 0 <= a <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return a


def type_space_for(gid: str):
    if gid == "assortative":
        return IntervalSpace()
    if gid == "cyclic":
        return CircleSpace()
    raise ValueError(f"unknown gallery problem {gid!r}")


def midpoints(k: int) -> tuple:
    if k < 1:
        raise ValueError("need at least one type atom")
    return tuple(Fraction(2 * i + 1, 2 * k) for i in range(k))


def midpoint_population(k: int) -> DiscreteMeasure:
    return DiscreteMeasure((t, Fraction(1, k)) for t in midpoints(k))


def coordinate_grid(gid: str, m: int) -> tuple:
    """Contract coordinates ``j / 2m``; nested under doubling, contains the
    ``m``-point midpoint grid."""
    if m < 1:
        raise ValueError("contract grid needs m >= 1")
    top = 2 * m if gid == "cyclic" else 2 * m + 1
    return tuple(Fraction(j, 2 * m) for j in range(top))


def partner(x: SidedContract):
    a, b = x.contract
    return b if x.side == 1 else a


@dataclass(frozen=True)
class GalleryUtility:
    gid: str
    alpha: Fraction = Fraction(0)

    def __call__(self, t, m: Multiset):
        if len(m) == 0:
            return UNMATCHED
        if len(m) > 1:
            raise InfeasibleChoice("gallery agents sign at most one contract")
        q = partner(m.items[0][0])
        if self.gid == "assortative":
            return Fraction(q)
        return -CircleSpace().dist(t + self.alpha, q)


@dataclass(frozen=True)
class GalleryFeasibility:
    """``chi_bar(t, t') = {(t, t')}``, optionally intersected with a grid."""

    allowed: Optional[frozenset] = None

    def __call__(self, t, t2) -> frozenset:
        y = (t, t2)
        if self.allowed is not None and y not in self.allowed:
            return frozenset()
        return frozenset((y,))


def _continuum_rule(gid):
    def rule(t, x: SidedContract) -> bool:
        a, b = x.contract
        own, other = (a, b) if x.side == 1 else (b, a)
        if own != t:
            return False
        return 0 <= other < 1 if gid == "cyclic" else 0 <= other <= 1
    return rule


def _perturber(gid):
    def move(v, delta):
        v = v + delta
        if gid == "cyclic":
            return v % 1
        return min(max(v, Fraction(0)), Fraction(1))

    def perturb(t, Y: Multiset, radius, rng):
        radius = Fraction(radius)

        def draw():
            return Fraction(int(rng.integers(-_PERTURB_RESOLUTION, _PERTURB_RESOLUTION + 1)),
                            _PERTURB_RESOLUTION) * radius

        t2 = move(t, draw())
        xs = []
        for x in Y.elements():
            a, b = x.contract
            if x.side == 1:
                xs.append(sided((t2, move(b, draw())), 1))
            else:
                xs.append(sided((move(a, draw()), t2), 2))
        return t2, Multiset(xs)

    return perturb


def lipschitz_constant(gid: str) -> Fraction:
    # cyclic utility moves with both the own type and the partner coordinate
    return Fraction(1) if gid == "assortative" else Fraction(2)


def _problem(gid, alpha, types, population, contracts, allowed, continuum):
    space = type_space_for(gid)
    return MatchingProblem(
        type_space=space,
        contract_space=ProductSpace((space, space)),
        types=tuple(types),
        contracts=tuple(sorted(contracts, key=point_key)),
        population=population,
        N=1,
        chi_bar=GalleryFeasibility(allowed),
        utility=GalleryUtility(gid, alpha if gid == "cyclic" else Fraction(0)),
        lipschitz=lipschitz_constant(gid),
        name=f"{gid}" + (f"(alpha={alpha})" if gid == "cyclic" else ""),
        sided_rule=_continuum_rule(gid) if continuum else None,
        perturb=_perturber(gid),
    )


def build(gid: str, alpha=0, k: int = 8, m: Optional[int] = None) -> MatchingProblem:
    """Problem on ``k`` midpoint types with contracts on an ``m``-grid.

    The contract set is all ordered pairs of the coordinates
    ``coordinate_grid(gid, m)``; ``m`` defaults to ``k``.
    """
    alpha = as_alpha(alpha)
    type_space_for(gid)
    m = k if m is None else m
    coords = coordinate_grid(gid, m)
    contracts = frozenset((a, b) for a in coords for b in coords)
    return _problem(gid, alpha, midpoints(k), midpoint_population(k), contracts, contracts, False)


def from_types(gid: str, types, alpha=0, population=None) -> MatchingProblem:
    """Problem on an explicit type grid; contracts are all pairs of types."""
    alpha = as_alpha(alpha)
    types = tuple(sorted(Fraction(t) for t in types))
    if population is None:
        population = DiscreteMeasure((t, Fraction(1, len(types))) for t in types)
    contracts = frozenset((a, b) for a in types for b in types)
    return _problem(gid, alpha, types, population, contracts, contracts, False)


def continuum(gid: str, alpha=0, k: int = 8) -> MatchingProblem:
    """Unrestricted contracts and closed-form feasibility; the ``k`` grid only
    carries the population, so off-grid samples can be evaluated."""
    alpha = as_alpha(alpha)
    types = midpoints(k)
    contracts = frozenset((a, b) for a in types for b in types)
    return _problem(gid, alpha, types, midpoint_population(k), contracts, None, True)


# ---------------------------------------------------------------------------
# analytic outcomes

def diagonal_outcome(p: MatchingProblem) -> Outcome:
    """Every type matched with its own type, half on each side."""
    atoms = []
    for t, w in p.population.atoms:
        atoms.append((MatchedType(t, Multiset.of(((t, t), 1))), w / 2))
        atoms.append((MatchedType(t, Multiset.of(((t, t), 2))), w / 2))
    return Outcome.of(p, DiscreteMeasure(atoms))


def antipodal_outcome(p: MatchingProblem) -> Outcome:
    """Every type matched with the type half a turn away."""
    types = set(p.types)
    atoms = []
    for t, w in p.population.atoms:
        o = (t + Fraction(1, 2)) % 1
        if o not in types:
            raise ValueError("antipodal outcome needs an even midpoint grid")
        atoms.append((MatchedType(t, Multiset.of(((t, o), 1))), w / 2))
        atoms.append((MatchedType(t, Multiset.of(((o, t), 2))), w / 2))
    return Outcome.of(p, DiscreteMeasure(atoms))


def cyclic_case(alpha) -> str:
    a = as_alpha(alpha)
    q = Fraction(1, 4)
    if a < q:
        return "case 1"
    if a in (q, 3 * q):
        return "case 4"
    if a > 3 * q:
        return "case 3"
    if a < 2 * q:
        return "case 2"
    if a == 2 * q:
        return "boundary 1/2"
    return "case 2 (mirrored)"


def analytic_outcome(gid: str, alpha=0, k: int = 8, problem=None):
    """Candidate stable outcome(s) on the ``k`` grid with their case label.

    Returns ``(label, [(name, Outcome), ...])``.  At ``alpha`` in
    {1/4, 1/2, 3/4} both the diagonal and the antipodal coupling are returned.
    """
    p = problem if problem is not None else build(gid, alpha, k)
    if gid == "assortative":
        return "assortative", [("diagonal", diagonal_outcome(p))]
    label = cyclic_case(alpha)
    if label in ("case 1", "case 3"):
        return label, [("diagonal", diagonal_outcome(p))]
    if k % 2:
        raise ValueError("antipodal outcomes need an even number of type atoms")
    if label in ("case 2", "case 2 (mirrored)"):
        return label, [("antipodal", antipodal_outcome(p))]
    return label, [("diagonal", diagonal_outcome(p)), ("antipodal", antipodal_outcome(p))]


# ---------------------------------------------------------------------------
# couplings

def partner_coupling(o) -> DiscreteMeasure:
    """Project an outcome onto (type, partner type); ``None`` when unmatched."""
    m = o.measure if isinstance(o, Outcome) else o
    atoms = []
    for (t, ms), w in m.atoms:
        if len(ms) == 0:
            atoms.append(((t, None), w))
        else:
            for x, c in ms.items:
                atoms.append(((t, partner(x)), w * c / len(ms)))
    return DiscreteMeasure(atoms)


def coupling_metric(gid: str):
    space = type_space_for(gid)

    def dist(a, b):
        dt = space.dist(a[0], b[0])
        if a[1] is None or b[1] is None:
            return max(dt, 0 if a[1] == b[1] else 1)
        return max(dt, space.dist(a[1], b[1]))

    return dist


def reference_coupling(gid: str, alpha, resolution: int, name: Optional[str] = None):
    """Fine-grid stand-in for the continuum diagonal or antipodal coupling."""
    if name is None:
        label = "assortative" if gid == "assortative" else cyclic_case(alpha)
        name = "antipodal" if label.startswith("case 2") else "diagonal"
    ts = midpoints(resolution)
    if name == "diagonal":
        pts = [(t, t) for t in ts]
    elif name == "antipodal":
        if resolution % 2:
            raise ValueError("antipodal reference needs even resolution")
        pts = [(t, (t + Fraction(1, 2)) % 1) for t in ts]
    else:
        raise ValueError(f"unknown coupling {name!r}")
    return DiscreteMeasure((q, Fraction(1, resolution)) for q in pts)


def dense_contract_sequence(gid: str, length: int) -> list:
    """First ``length`` entries of a dense contract sequence, ``None`` first.

    ``None`` stands for the empty choice.  Later entries list the pairs of
    the dyadic coordinates ``j / 2**L`` level by level.
    """
    seq: list = [None]
    seen = set()
    level = 0
    while len(seq) < length:
        n = 2**level
        top = n if gid == "cyclic" else n + 1
        coords = [Fraction(j, n) for j in range(top)]
        for a in coords:
            for b in coords:
                if (a, b) not in seen:
                    seen.add((a, b))
                    seq.append((a, b))
        level += 1
    return seq[:length]
