"""Exhaustive search and the local-improvement heuristic on small problems."""
from fractions import Fraction as F

from matchdist import gallery
from matchdist.solver import SolverConfig, brute_force_stable, heuristic_stable

three = gallery.from_types("cyclic", [0, F(1, 3), F(2, 3)], F(1, 10))
for D in (1, 2, 3):
    o = brute_force_stable(three, SolverConfig(D=D))
    print(f"three types, weights in multiples of 1/{3 * D}:", "none" if o is None else "found")
# a self-matched type must split its mass evenly over the two sides of its contract,
# so odd multiples of 1/9 never work

p = gallery.build("cyclic", F(3, 10), 8)


runs = []


def show(i, o):
    # later restarts are summarised by the final status only
    if i == 0:
        runs.append(i)
    if len(runs) > 1:
        return
    unmatched = sum((w for (t, m), w in o.measure.atoms if not m), F(0))
    print(f"  step {i:>2}: {len(o.measure):>3} atoms, unmatched mass {unmatched}")


res = heuristic_stable(p, SolverConfig(D=2, restarts=2, family="trees", n_max=3), callback=show)
print("heuristic on cyclic alpha=3/10, k=8:", res.certification.status, "after", res.iterations, "steps")
print("partner offsets:", sorted({str((s - t) % 1) for (t, s), _ in gallery.partner_coupling(res.outcome).atoms}))
