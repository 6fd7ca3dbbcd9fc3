"""A cutoff profile band for flat initial data at modest N.

For each c the table shows the simulated lower bound, the hitting-time
upper proxy and the limiting curve.  The last column is the curve implied
by the flat one-point law actually observed (see kpz_one_point.py).
"""
from aseplab.experiments import profile_run, theory_profile

rows = profile_run("flat", 96, 0.75, [-4, -2, -1, 0, 1, 2, 4], trials=1500, seed=3)
print(f"{'c':>4} {'t':>7} {'lower':>6} {'upper':>6} {'theory':>7} {'corrected':>9}")
for r in rows:
    corr = theory_profile("flat", r["c"], corrected=True)
    print(f"{r['c']:+4.0f} {r['t']:7.1f} {r['lower']:6.3f} {r['upper']:6.3f} {r['theory']:7.3f} {corr:9.3f}")
