"""Second-class particles: the merge projection and overtaking counts.

Start with 0's on the left, 2's on the right and 1's sprinkled between.
M_s counts 0's to the right of the leftmost 2.  Deleting the 1's and
re-centering gives a two-type configuration whose leftmost 2 sits at -M_s.
"""
import numpy as np

from aseplab.config import LineConfig, leftmost_second_class
from aseplab.dynamics import evolve, merge_projection
from aseplab.experiments import overtake_tail
from aseplab.observables import overtake_count
from aseplab.rng import ClockField

eta = LineConfig(0, 1, [0, 1, 0, 1, 1, 2, 1, 2, 2], 2)
tr = evolve(eta, ClockField(4, 0.75), 25.0)
rows = tr.states()
lo = tr.plan.base + 1
swaps = np.flatnonzero(tr.events.action[:, 0] == 1)
print("times where M changes:   M   -L2(eta*)")
last = 0
for r in swaps:
    cfg = LineConfig(0, lo, rows[r + 1][1:-1], 2)
    m = overtake_count(cfg, 2, 0)
    if m != last:
        star = merge_projection(cfg).config
        print(f"t={tr.events.time[r]:7.2f}  {cfg.literal():22s} {m:2d}  {-leftmost_second_class(star):2d}")
        last = m

for N in (64, 256):
    est = overtake_tail("thm61", N, 0.75, float(N), N ** 0.4, 500, seed=N)
    print(f"N={N:4d}: P(sup M > N^0.4) ~ {est.value:.3f} [{est.ci[0]:.3f}, {est.ci[1]:.3f}]")
