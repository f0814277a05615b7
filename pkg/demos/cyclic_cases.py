"""Audit the diagonal and antipodal couplings of the cyclic problem across alpha."""
from fractions import Fraction as F

from matchdist import gallery
from matchdist.blocks import audit_stability

K = 16

print(f"{'alpha':>6}  {'case':<18} {'diagonal':<9} {'antipodal':<9}")
for alpha in (F(1, 10), F(1, 5), F(1, 4), F(3, 10), F(2, 5), F(1, 2), F(3, 4), F(4, 5), F(9, 10)):
    p = gallery.build("cyclic", alpha, K)
    row = []
    for o in (gallery.diagonal_outcome(p), gallery.antipodal_outcome(p)):
        row.append(audit_stability(o, "trees", 3).verdict)
    print(f"{str(alpha):>6}  {gallery.cyclic_case(alpha):<18} {row[0]:<9} {row[1]:<9}")

p = gallery.build("cyclic", F(3, 10), K)
c = audit_stability(gallery.diagonal_outcome(p), "pairwise", 2).certificate
a, b = (s.t for s in c.vertex_subtypes)
print(f"\nalpha=3/10 diagonal is blocked by types {a} and {b} on contract ({a}, {b})")
print("margins", tuple(str(m) for m in c.margins), "improving sets", [sorted((f"({x.contract[0]}, {x.contract[1]})", x.side) for x, _ in w.items) for w in c.improving_sets])
