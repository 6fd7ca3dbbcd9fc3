"""The ten acceptance checks as plain functions.

Each ``criterion_<n>()`` runs one check at its stated size and tolerance and
returns an :class:`Outcome`.  Diagnostics that are not part of the decision
(corrected targets, raw KS values) are reported in ``detail``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _engine as eng
from .config import (LineConfig, SegmentConfig, assign_labels, build_extension,
                     leftmost_second_class)
from .dynamics import CensorScheme, RunSpec, evolve, evolve_coupled, merge_projection
from .experiments import (batch, block_tail, kpz_onepoint_run, overtake_tail, profile_run,
                          side_events, theory_profile)
from .observables import LabelObserver, coupled_hitting, overtake_count
from .oracle import (StateSpace, distribution_at, distribution_expm, exact_tv,
                     stationary_vector)
from .rng import ClockField
from .stationary import sample_stationary_array, stationary_event_A
from .stats import bonferroni_z, wilson

TITLES = {
    1: "oracle cross-validation",
    2: "Monte Carlo vs oracle",
    3: "per-trajectory invariants",
    4: "censoring dominance",
    5: "tail checks",
    6: "stationary event tail",
    7: "KPZ one-point GUE (step)",
    8: "KPZ one-point GOE (flat)",
    9: "cutoff profiles (flat, step)",
    10: "half-flat consistency",
}


@dataclass
class Outcome:
    number: int
    passed: bool
    summary: str
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def title(self) -> str:
        return TITLES[self.number]

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"criterion {self.number:2d} {verdict}  {self.title}: {self.summary} ({self.seconds:.0f}s)"


# -- 1 -------------------------------------------------------------------------------------

def criterion_1() -> Outcome:
    worst_pi = worst_l1 = 0.0
    for n, k in ((6, 3), (8, 4)):
        for p in (0.6, 0.75):
            space = StateSpace(n, 1, k, p)
            worst_pi = max(worst_pi, float(np.abs(space.closed_form() - stationary_vector(space)).max()))
            init = SegmentConfig(1, n, [1] * k + [0] * (n - k))
            for t in (1, 2, 4, 8):
                d = np.abs(distribution_at(space, init, t) - distribution_expm(space, init, t)).sum()
                worst_l1 = max(worst_l1, float(d))
    ok = worst_pi <= 1e-10 and worst_l1 <= 1e-8
    return Outcome(1, ok, f"closed form vs null vector {worst_pi:.1e} (<=1e-10), "
                          f"uniformization vs expm L1 {worst_l1:.1e} (<=1e-8)",
                   dict(pi_maxnorm=worst_pi, l1=worst_l1))


# -- 2 -------------------------------------------------------------------------------------

def criterion_2(trials: int = 200_000, seed: int = 2) -> Outcome:
    from .experiments import tv_lower_estimate
    p, t = 0.75, 4.0
    xi = SegmentConfig.parse("111000")
    space = StateSpace(6, 1, 3, p)
    res = batch([xi], ClockField(seed, p), t, trials, RunSpec(checkpoints=[t], snapshot=(1, 6)))
    counts = np.bincount(space.rank_rows(res.snapshot[:, 0, 0, :]), minlength=space.size)
    law = distribution_at(space, xi, t)
    sd = np.sqrt(trials * law * (1 - law))
    z = np.abs(counts - trials * law) / np.where(sd > 0, sd, 1)
    est = tv_lower_estimate(xi, [t], p, "full_config", trials, seed + 1)[0]
    exact = exact_tv(space, xi, t)
    ok = bool(z.max() <= 3) and abs(est.value - exact) <= 0.02
    return Outcome(2, ok, f"max |count - mean|/sd {z.max():.2f} (<=3) over {space.size} states; "
                          f"TV estimate {est.value:.4f} vs exact {exact:.4f} (<=0.02)",
                   dict(max_z=float(z.max()), tv_est=est.value, tv_exact=exact))


# -- 3 -------------------------------------------------------------------------------------

def _random_segment(rng, n_max=50, n_min=2):
    n = int(rng.integers(n_min, n_max + 1))
    k = int(rng.integers(1, n))
    occ = np.zeros(n, np.int8)
    occ[rng.choice(n, k, replace=False)] = 1
    return SegmentConfig(1, n, occ)


def _push_right(rng, occ):
    """A configuration with weakly more mass to the right (random right moves)."""
    occ = occ.copy()
    for _ in range(int(rng.integers(0, 3 * occ.size))):
        i = int(rng.integers(0, occ.size - 1))
        if occ[i] == 1 and occ[i + 1] == 0:
            occ[i], occ[i + 1] = 0, 1
    return occ


def _order_runs(runs, rng, horizon):
    """Pointwise order and particle conservation on coupled segment pairs."""
    bad_order = bad_mass = 0
    for m in range(runs):
        xi = _random_segment(rng)
        extra = np.flatnonzero(xi.occ == 0)
        occ = xi.occ.copy()
        occ[rng.choice(extra, int(rng.integers(0, extra.size)), replace=False)] = 1
        eta = SegmentConfig(1, xi.b, occ)
        a, b = evolve_coupled([xi, eta], ClockField(10_000 + m, 0.75), horizon)
        ra, rb = a.states(), b.states()
        bad_order += int(np.any(ra > rb))
        bad_mass += int(np.any((ra == 1).sum(axis=1) != xi.k)
                        or np.any((rb == 1).sum(axis=1) != eta.k))
    return bad_order, bad_mass


def _height_runs(runs, rng, horizon):
    """⪯-attractivity, checked on the counting functions after every event."""
    bad = 0
    for m in range(runs):
        n = int(rng.integers(2, 31))
        occ = (rng.random(n) < 0.5).astype(np.int8)
        right = int(rng.integers(0, 2))
        x = LineConfig(0, 1, occ, right)
        y = LineConfig(0, 1, _push_right(rng, occ), right)
        a, b = evolve_coupled([x, y], ClockField(20_000 + m, 0.75), horizon)
        cx = np.cumsum(a.states() == 1, axis=1, dtype=np.int16)
        cy = np.cumsum(b.states() == 1, axis=1, dtype=np.int16)
        bad += int(np.any(cy > cx))
    return bad


def _label_runs(runs, rng, horizon):
    bad = 0
    for m in range(runs):
        xi = _random_segment(rng)
        eta = build_extension("xi_bar", xi)
        ob = LabelObserver(assign_labels(eta, xi.b, xi.k))
        evolve(eta, ClockField(30_000 + m, 0.75), horizon, [ob])
        bad += int(ob.violations > 0)
    return bad


def _hitting_runs(groups, per_group, rng, horizon):
    bad = 0
    for g in range(groups):
        xi = _random_segment(rng)
        n, k = xi.n_sites, xi.k

        def rows(m, n=n, k=k, g=g):
            r = np.random.default_rng((g, m))
            occ = np.zeros(n, np.int8)
            occ[r.choice(n, k, replace=False)] = 1
            return SegmentConfig(1, n, occ)
        gt, H = coupled_hitting(xi, ClockField(40_000 + g, 0.75), horizon, per_group,
                                init_rows=rows, check=False)
        bad += int(np.count_nonzero(np.isfinite(H) & ~(gt <= H)))
    return bad


def _species_line(rng):
    n = int(rng.integers(2, 21))
    w = rng.choice(np.array([0, 1, 2], np.int8), size=n, p=[0.3, 0.4, 0.3])
    zeros, twos = int((w == 0).sum()), int((w == 2).sum())
    mid = w[w == 1].copy()
    body = np.concatenate([np.zeros(zeros, np.int8), mid, np.full(twos, 2, np.int8)])
    # scatter the 1's through the body without breaking "0's left of 2's"
    ones = np.flatnonzero(body == 1)
    nonone = body[body != 1]
    slots = np.sort(rng.integers(0, nonone.size + 1, size=ones.size))
    body = np.insert(nonone, slots, 1)
    if not np.any(body == 2):
        body = np.append(body, 1)
    return LineConfig(0, 1, body, 2)


def _merge_runs(runs, rng, horizon):
    """M_s = -L^2(eta*_s) after every swap (other events leave the state alone)."""
    bad = checked = 0
    for m in range(runs):
        eta = _species_line(rng)
        tr = evolve(eta, ClockField(50_000 + m, 0.75), horizon)
        plan = tr.plan
        row = plan.lat0[0].copy()
        lo = plan.base + 1
        ev = tr.events
        sw = np.flatnonzero(ev.action[:, 0] == eng.ACT_SWAP)

        def check(r):
            cfg = LineConfig(0, lo, r[1:-1], 2)
            star = merge_projection(cfg).config
            return overtake_count(cfg, 2, 0) == -leftmost_second_class(star)
        bad += int(not check(row))
        for e in sw:
            i = int(ev.edge[e]) - plan.base
            row[i], row[i + 1] = row[i + 1], row[i]
            checked += 1
            if not check(row):
                bad += 1
                break
    return bad, checked


def criterion_3(runs: int = 1000, horizon: float = 100.0, seed: int = 3) -> Outcome:
    rng = np.random.default_rng(seed)
    order, mass = _order_runs(runs, rng, horizon)
    height = _height_runs(runs, rng, horizon)
    labels = _label_runs(runs, rng, horizon)
    hit = _hitting_runs(50, runs // 50, rng, horizon)
    merge, checked = _merge_runs(runs, rng, horizon)
    counts = dict(pointwise_order=order, conservation=mass, height_order=height,
                  label_order=labels, g_le_H=hit, merge_identity=merge)
    ok = all(v == 0 for v in counts.values())
    text = ", ".join(f"{k} {v}" for k, v in counts.items())
    return Outcome(3, ok, f"violations over {runs} runs each: {text} "
                          f"({checked} merge states checked)", dict(counts, merge_states=checked))


# -- 4 -------------------------------------------------------------------------------------

def criterion_4(trials: int = 20_000, t: float = 50.0, edge: int = -2, seed: int = 4) -> Outcome:
    eta = build_extension("reversed_step", Z=0)
    clocks = ClockField(seed, 0.75)
    free = batch([eta], clocks, t, trials, RunSpec(checkpoints=[t]))
    cens = batch([eta], clocks, t, trials,
                 RunSpec(checkpoints=[t], censor=CensorScheme.static([edge])), trial0=trials)
    L0, L1 = free.leftmost[:, 0, 0], cens.leftmost[:, 0, 0]
    grid = np.arange(-10, 10)
    z = bonferroni_z(2)
    ok, gap, spread = True, math.inf, 0.0
    for x in grid:
        n0, n1 = int(np.count_nonzero(L0 <= x)), int(np.count_nonzero(L1 <= x))
        lo0, hi0 = wilson(n0, trials, z)
        lo1, hi1 = wilson(n1, trials, z)
        # fails only if the uncensored interval lies wholly below the censored one
        ok &= hi0 >= lo1
        gap = min(gap, (n0 - n1) / trials)
        spread = max(spread, (n0 - n1) / trials)
    return Outcome(4, bool(ok), f"P(L<=x) uncensored minus censored over 20 x: min {gap:+.4f}, "
                                f"max {spread:+.4f}; dominance within joint CI {ok}; "
                                f"censored edge ({edge},{edge + 1})", dict(min_gap=gap, max_gap=spread))


# -- 5 -------------------------------------------------------------------------------------

def criterion_5(seed: int = 5) -> Outcome:
    t = 1000.0
    blk = block_tail(t, 0.75, 10_000, seed)
    thr = t ** 0.4
    m61 = overtake_tail("thm61", 512, 0.75, t, thr, 2000, seed + 1)
    N = 512
    m62 = overtake_tail("cor62", N, 0.75, float(N), N ** 0.4, 2000, seed + 2)
    vals = dict(block=blk.value, thm61=m61.value, cor62=m62.value)
    ok = all(v <= 0.01 for v in vals.values())
    return Outcome(5, ok, f"P(L < -t^0.4) {blk.value:.4f}, P(sup M > t^0.4) {m61.value:.4f}, "
                          f"P(sup M' > N^0.4) {m62.value:.4f} (each <=0.01)", vals)


# -- 6 -------------------------------------------------------------------------------------

def criterion_6(samples: int = 10**6, seed: int = 6) -> Outcome:
    b, k, p = 24, 12, 0.75
    rows = sample_stationary_array(b, 1, k, p, samples, seed)
    left = rows.argmax(axis=1) + 1
    ls = np.arange(1, 9)
    est, lo, hi = [], [], []
    for l in ls:
        n = int(np.count_nonzero(left < b - k - l))
        a, c = wilson(n, samples)
        est.append(n / samples)
        lo.append(a)
        hi.append(c)
    est, lo, hi = map(np.asarray, (est, lo, hi))
    # guaranteed drop per step: next upper bound against this lower bound, on the log scale
    drops = np.log(lo[:-1]) - np.log(hi[1:])
    exact = np.array([stationary_event_A(b, 1, k, int(l), p) for l in ls])
    covered = bool(np.all((lo <= exact) & (exact <= hi)))
    ok = bool(np.all(drops > 0))
    return Outcome(6, ok, f"smallest CI-separated log drop {drops.min():.3f} (>0), so "
                          f"log pi(A(l)) <= log pi(A(1)) - {drops.min():.3f}(l-1); "
                          f"exact values inside the CIs: {covered}",
                   dict(estimates=est.tolist(), exact=exact.tolist(), min_drop=float(drops.min())))


# -- 7, 8 ----------------------------------------------------------------------------------

def criterion_7(N: int = 200, trials: int = 2000, seed: int = 7) -> Outcome:
    r = kpz_onepoint_run("step", N, trials, seed)
    ok = r.ks <= 0.08
    return Outcome(7, ok, f"KS vs F_GUE {r.ks:.4f} (<=0.08; raw KS {r.ks_raw:.4f})",
                   dict(ks=r.ks, ks_raw=r.ks_raw))


def criterion_8(N: int = 200, trials: int = 2000, seed: int = 8) -> Outcome:
    r = kpz_onepoint_run("flat", N, trials, seed)
    ok = r.ks <= 0.08
    return Outcome(8, ok, f"KS vs {r.reference} {r.ks:.4f} (<=0.08); diagnostic KS vs "
                          f"{r.alt_reference} {r.alt_ks:.4f}",
                   dict(ks=r.ks, ks_raw=r.ks_raw, alt_ks=r.alt_ks))


# -- 9 -------------------------------------------------------------------------------------

def _band_checks(rows, family):
    c = [r["c"] for r in rows]
    mono = all(rows[j + 1][f"{s}_ci_lo"] <= rows[j][f"{s}_ci_hi"]
               for j in range(len(rows) - 1) for s in ("lower", "upper"))
    inside = all(r["lower"] - 0.07 <= r["theory"] <= r["upper"] + 0.07 for r in rows)
    ends = True
    if family == "flat":
        # the whole band: lower edge at c=-4, upper edge at c=+4
        ends = rows[c.index(-4.0)]["lower"] >= 0.9 and rows[c.index(4.0)]["upper"] <= 0.15
    return mono, inside, ends


def criterion_9(N: int = 256, trials: int = 2000, seed: int = 9) -> Outcome:
    grid = [-4, -2, 0, 2, 4]
    parts, detail, ok = [], {}, True
    for family in ("flat", "step"):
        rows = profile_run(family, N, 0.75, grid, trials, seed)
        mono, inside, ends = _band_checks(rows, family)
        ok &= mono and inside and ends
        miss = max(max(r["lower"] - 0.07 - r["theory"], r["theory"] - r["upper"] - 0.07, 0.0)
                   for r in rows)
        msg = f"{family}: monotone {mono}, theory in band+-0.07 {inside} (worst miss {miss:.3f})"
        if family == "flat":
            corr = theory_profile("flat", np.array(grid, float), corrected=True)
            inside_c = all(r["lower"] - 0.07 <= v <= r["upper"] + 0.07 for r, v in zip(rows, corr))
            msg += f", ends {ends}; corrected curve in band {inside_c}"
            detail["flat_corrected_inside"] = inside_c
        parts.append(msg)
        detail[family] = rows
    return Outcome(9, ok, "; ".join(parts), detail)


# -- 10 ------------------------------------------------------------------------------------

def criterion_10(trials: int = 2000, seed: int = 10) -> Outcome:
    grid = [-4, -2, 0, 2, 4]
    agree, mirrored, at0, detail = True, True, {}, {}
    z = bonferroni_z(2)
    for N in (128, 256):
        s = side_events("half_flat", N, 0.75, grid, trials, seed + N)
        for j in range(len(grid)):
            n1 = round(s.particle[j] * trials)
            n2 = round(s.hole[j] * trials)
            lo1, hi1 = wilson(n1, trials, z)
            lo2, hi2 = wilson(n2, trials, z)
            if hi1 < lo2 or hi2 < lo1:
                agree = False
                detail.setdefault("disagree", []).append((N, grid[j], s.particle[j], s.hole[j]))
            lo3, hi3 = wilson(round(s.hole_mirror[j] * trials), trials, z)
            if hi1 < lo3 or hi3 < lo1:
                mirrored = False
        j0 = grid.index(0)
        at0[N] = 0.5 * (s.particle[j0] + s.hole[j0])
        detail[N] = dict(particle=s.particle.tolist(), hole=s.hole.tolist(),
                         hole_mirror=s.hole_mirror.tolist())
    gap = abs(at0[128] - at0[256])
    ok = agree and gap <= 0.05
    return Outcome(10, ok, f"particle/hole joint CIs overlap at every (N, c): {agree}; "
                           f"c=0 value {at0[128]:.3f} (N=128) vs {at0[256]:.3f} (N=256), "
                           f"gap {gap:.3f} (<=0.05); diagnostic with the hole threshold "
                           f"shifted one site: overlap {mirrored}", detail)


CRITERIA = {n: globals()[f"criterion_{n}"] for n in range(1, 11)}


def run(number: int) -> Outcome:
    t0 = time.perf_counter()
    out = CRITERIA[number]()
    out.seconds = time.perf_counter() - t0
    return out
