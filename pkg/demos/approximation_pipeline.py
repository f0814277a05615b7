"""Refine type and contract grids together and watch the solved couplings settle."""
from fractions import Fraction as F

from matchdist.approx import ApproximationSchedule, run_pipeline

schedule = ApproximationSchedule.doubling([2, 4, 8, 16])
for gid, alpha in (("assortative", 0), ("cyclic", F(3, 10))):
    trace = run_pipeline(schedule, gid, alpha)
    print(f"{gid} (reference: {trace.reference})")
    print(trace.to_csv(timing=True))
    print("refined audit:", trace.final_audit.verdict, "| monotone:", trace.monotone_ok, "\n")
