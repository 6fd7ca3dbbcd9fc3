"""One-point height fluctuations for step and flat initial data.

Step data at KPZ time 1 should look like Tracy-Widom GUE.  For flat data
the rescaling carried through literally predicts F_GOE(2^(1/3) s); the
simulation sits on F_GOE(2 s) instead.
"""
import numpy as np

from aseplab.experiments import kpz_onepoint_run, load_ref_cdf

N, M = 120, 600
step = kpz_onepoint_run("step", N, M, seed=0)
flat = kpz_onepoint_run("flat", N, M, seed=1)

gue, goe = load_ref_cdf("GUE"), load_ref_cdf("GOE")
print(f"step  mean {step.values.mean():+.3f} sd {step.values.std():.3f}   "
      f"GUE mean {gue.mean():+.3f}   KS {step.ks:.3f}")
print(f"flat  KS vs {flat.reference}: {flat.ks:.3f}   KS vs {flat.alt_reference}: {flat.alt_ks:.3f}")

grid = np.linspace(-4, 2, 7)
print("\n   s   ECDF flat  F_GOE(2^(1/3)s)  F_GOE(2s)")
for s, e in zip(grid, flat.ecdf(grid)):
    print(f"{s:+5.1f}  {e:9.3f}  {goe(2 ** (1 / 3) * s):15.3f}  {goe(2 * s):9.3f}")
