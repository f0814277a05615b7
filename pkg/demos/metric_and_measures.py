"""Bounded multisets, the quotient metric and the star map on small inputs."""
from fractions import Fraction as F

from matchdist.measure import DiscreteMeasure, star_measure
from matchdist.multispace import IntervalSpace, Multiset, d_star

R = IntervalSpace()


def ms(*xs):
    return Multiset.of(*((x, 1) for x in xs))


print("permuted lists are the same point:", d_star(ms(F(1, 5), F(7, 10)), ms(F(7, 10), F(1, 5)), R))
print("best pairing beats the naive one:", d_star(ms(0, F(1, 2)), ms(F(1, 10), F(2, 5)), R))
print("different sizes sit at distance", d_star(ms(0, 1), ms(0), R))

# two contracts merging into one double contract: the distance shrinks, the size stays 2
for k in (1, 10, 100, 1000):
    print(f"  k={k:>4}: d*({{0, 1/k}}, {{0, 0}}) = {d_star(ms(0, F(1, k)), ms(0, 0), R)}")

tau = DiscreteMeasure([(ms("y", "y"), F(1, 3)), (ms("z"), F(2, 3))])
star = star_measure(tau)
print("star map:", dict(star.atoms), "total", star.total_mass)
