"""Cutoff-profile and KPZ experiments at finite N.

Times follow g = (D N + c N^(1/3)) / (p - q).  Lower bounds on the total
variation distance come from pushing both laws through a statistic; the
upper proxy is the two-term hitting bound P(H(zeta) > t) + P(H(pi_0) > t).
"""
from __future__ import annotations

import dataclasses
import hashlib
import math
import multiprocessing as mp
import os
import pathlib
import warnings
from dataclasses import dataclass

import numpy as np

from .config import LineConfig, SegmentConfig, build_extension, reflect_dual
from .dynamics import BatchResult, RunSpec, run_batch
from .observables import kappa as kappa_of
from .observables import zeta_max_of
from .oracle import MAX_STATES, StateSpace, exact_tv
from .rng import ClockField
from .stationary import log_normalizer, sample_stationary_array, stationary_event_A
from .stats import Z95, bonferroni_z, bootstrap_tv, ks_distance, wilson

DATA_DIR = pathlib.Path(__file__).resolve().parent / "data"


class TableChecksumError(ValueError):
    """A reference table is missing or does not match its checksum."""


# -- scaling ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScaleSpec:
    p: float
    N: float
    D: float = 1.0
    c: float = 0.0
    rho: float | None = None
    alpha: float | None = None
    delta: float | None = None
    kappa: float | None = None
    k_N: int | None = None
    b_N: int | None = None

    def __post_init__(self):
        if not 0.5 < self.p <= 1.0:
            raise ValueError("need p > q, i.e. p in (1/2, 1]")
        if self.D <= 0:
            raise ValueError("D must be positive")
        for name in ("delta", "kappa"):
            v = getattr(self, name)
            if v is not None and not 0 < v < 1 / 3:
                raise ValueError(f"{name} must lie in (0, 1/3)")

    @property
    def q(self) -> float:
        return 1.0 - self.p

    @property
    def gamma(self) -> float:
        return self.p - self.q

    def with_c(self, c: float) -> "ScaleSpec":
        return dataclasses.replace(self, c=float(c))


def g_time(spec: ScaleSpec) -> float:
    return (spec.D * spec.N + spec.c * spec.N ** (1 / 3)) / spec.gamma


def step_D(alpha: float) -> float:
    return (math.sqrt(alpha) + math.sqrt(1 - alpha)) ** 2


def f_alpha(alpha: float) -> float:
    return (alpha * (1 - alpha)) ** (1 / 6) / (math.sqrt(alpha) + math.sqrt(1 - alpha)) ** (4 / 3)


def scale_constants(x: float) -> tuple[float, float]:
    """(kappa(x), f(x)) for x in (0, 1)."""
    if not 0 < x < 1:
        raise ValueError("argument must lie in (0, 1)")
    return kappa_of(x), f_alpha(x)


# -- reference laws ----------------------------------------------------------------------

@dataclass(frozen=True)
class RefCDF:
    name: str
    grid: np.ndarray
    values: np.ndarray
    source: str = ""

    def __call__(self, s):
        out = np.interp(s, self.grid, self.values, left=0.0, right=1.0)
        return float(out) if np.ndim(out) == 0 else out

    def quantile(self, u: float) -> float:
        i = int(np.searchsorted(self.values, u))
        if i == 0:
            return float(self.grid[0])
        x0, x1 = self.grid[i - 1], self.grid[i]
        v0, v1 = self.values[i - 1], self.values[i]
        return float(x0 + (u - v0) * (x1 - x0) / (v1 - v0)) if v1 > v0 else float(x0)

    def mean(self) -> float:
        # integral of s dF by parts over the table range
        g, v = self.grid, self.values
        return float(g[-1] - np.sum(np.diff(g) * (v[1:] + v[:-1]) / 2))


_TABLES: dict = {}


def _table_dir() -> pathlib.Path:
    env = os.environ.get("ASEPLAB_TABLE_DIR")
    return pathlib.Path(env) if env else DATA_DIR


def load_ref_cdf(name: str) -> RefCDF:
    """Tracy-Widom table ``GUE`` or ``GOE``, checked against its checksum."""
    name = name.upper()
    if name not in ("GUE", "GOE"):
        raise ValueError(f"unknown reference {name!r}")
    path = _table_dir() / f"tw_{name.lower()}.txt"
    key = (str(path), name)
    if key in _TABLES:
        return _TABLES[key]
    try:
        text = path.read_text()
    except OSError as exc:
        raise TableChecksumError(f"cannot read {path}: {exc}") from None
    header, _, body = text.partition("\n")
    fields = dict(f.split("=", 1) for f in header.lstrip("# ").split() if "=" in f)
    if fields.get("name") != name:
        raise TableChecksumError(f"{path} is not the {name} table")
    if hashlib.sha256(body.encode()).hexdigest() != fields.get("checksum"):
        raise TableChecksumError(f"checksum mismatch in {path}")
    data = np.loadtxt(body.splitlines())
    grid, vals = data[:, 0], data[:, 1]
    if np.any(np.diff(grid) <= 0) or np.any(np.diff(vals) < 0):
        raise TableChecksumError(f"{path} is not a monotone table")
    ref = RefCDF(name, grid, vals, fields.get("source", ""))
    _TABLES[key] = ref
    return ref


FAMILIES = ("flat", "step", "maxTV")


def theory_profile(family: str, c, rho: float = 0.5, alpha: float = 0.5,
                   corrected: bool = False):
    """Limiting profile 1 - F at c.

    flat(rho): 1 - F_GOE((rho(1-rho))^(1/3) c); step(alpha) and maxTV(alpha):
    1 - F_GUE(c f(alpha)).  ``corrected`` applies the extra factor 2^(2/3)
    in the flat argument that the flat-TASEP one-point law requires.
    """
    c = np.asarray(c, dtype=float)
    if family == "flat":
        arg = (rho * (1 - rho)) ** (1 / 3) * c
        if corrected:
            arg = 2 ** (2 / 3) * arg
        out = 1 - load_ref_cdf("GOE")(arg)
    elif family in ("step", "maxTV"):
        out = 1 - load_ref_cdf("GUE")(c * f_alpha(alpha))
    elif family in ("half_flat", "halfflat"):
        raise ValueError("no numeric theory curve for half-flat data")
    else:
        raise ValueError(f"unknown family {family!r}")
    return float(out) if np.ndim(out) == 0 else np.asarray(out)


# -- trial-parallel batches ------------------------------------------------------------

_TASK = None


def _chunk(args):
    trial0, count = args
    inits, clocks, horizon, spec, init_rows = _TASK
    rows = None if init_rows is None else (lambda m: init_rows(trial0 + m))
    return run_batch(inits, clocks, horizon, count, spec=spec, trial0=trial0, init_rows=rows)


def _merge(parts: list[BatchResult]) -> BatchResult:
    if len(parts) == 1:
        return parts[0]
    first = parts[0]
    cat = {}
    for f in dataclasses.fields(BatchResult):
        v = getattr(first, f.name)
        if f.name in ("checkpoints", "plan", "trial0"):
            cat[f.name] = v
        elif f.name == "trials":
            cat[f.name] = sum(p.trials for p in parts)
        elif v is None:
            cat[f.name] = None
        else:
            cat[f.name] = np.concatenate([getattr(p, f.name) for p in parts])
    return BatchResult(**cat)


def batch(inits, clocks: ClockField, horizon: float, trials: int, spec: RunSpec,
          trial0: int = 0, init_rows=None, jobs: int = 1, chunk: int = 250) -> BatchResult:
    """run_batch split into chunks of trials, optionally over ``jobs``
    forked workers.  ``init_rows`` takes the absolute trial index.  The
    result does not depend on ``jobs``."""
    global _TASK
    trials = int(trials)
    starts = list(range(trial0, trial0 + trials, chunk)) or [trial0]
    work = [(s, min(chunk, trial0 + trials - s)) for s in starts]
    _TASK = (list(inits), clocks, horizon, spec, init_rows)
    try:
        if jobs > 1 and len(work) > 1:
            with mp.get_context("fork").Pool(jobs) as pool:
                parts = pool.map(_chunk, work)
        else:
            parts = [_chunk(w) for w in work]
    finally:
        _TASK = None
    return _merge(parts)


# -- families ----------------------------------------------------------------------------

def family_config(family: str, N: int, alpha: float = 0.5) -> tuple[SegmentConfig, float]:
    """(xi^N, D) for flat 1_{2Z} on [1; N], half-flat 1_{2Z<=0} on
    [-N/2; N/4], step 1_{[1; k_N]} on [1; N]."""
    N = int(N)
    if family == "flat":
        occ = (np.arange(1, N + 1) % 2 == 0).astype(np.int8)
        return SegmentConfig(1, N, occ), 1.0
    if family in ("half_flat", "halfflat"):
        if N % 4:
            raise ValueError("half-flat needs N divisible by 4")
        sites = np.arange(-N // 2, N // 4 + 1)
        occ = ((sites <= 0) & (sites % 2 == 0)).astype(np.int8)
        return SegmentConfig(-N // 2, N // 4, occ), 1.0
    if family == "step":
        k = int(round(alpha * N))
        if not 0 < k < N:
            raise ValueError("alpha N must lie strictly between 0 and N")
        occ = (np.arange(1, N + 1) <= k).astype(np.int8)
        return SegmentConfig(1, N, occ), step_D(k / N)
    raise ValueError(f"unknown family {family!r}")


def flat_reach(p: float, horizon: float) -> int:
    """Half-width of a truncated 1_{2Z} that agrees with the infinite one
    near the origin up to ``horizon`` (influence spreads at rate p per site)."""
    pt = p * horizon
    return int(math.ceil(pt + 6 * math.sqrt(pt) + 32))


# -- lower bounds -------------------------------------------------------------------------

@dataclass(frozen=True)
class Estimate:
    value: float
    ci: tuple[float, float]
    flagged: bool = False
    note: str = ""


def _abs_diff_ci(lo: float, hi: float, target: float) -> tuple[float, float]:
    if lo <= target <= hi:
        return 0.0, max(target - lo, hi - target)
    a, b = abs(lo - target), abs(hi - target)
    return min(a, b), max(a, b)


def lr_pair_law(b: int, a: int, k: int, p: float) -> dict:
    """Exact stationary law of (leftmost particle, rightmost hole)."""
    if not 0 < k < b - a + 1:
        raise ValueError("L and R need at least one particle and one hole")
    log_r = math.log(p / (1 - p)) if p < 1 else math.inf
    if p == 1:
        return {(b - k + 1, b - k): 1.0}
    logZ = log_normalizer(b, a, k, p)
    # xi_max is the only state with L > R
    out = {(b - k + 1, b - k): math.exp(log_r * k * (2 * b - k + 1) / 2 - logZ)}
    for y in range(a, b + 1):                  # rightmost hole at y, (y; b] full
        right = b - y
        if right > k - 1:
            continue
        inner = k - right                      # particles left of y, leftmost at x
        w_right = log_r * (right * (y + 1 + b) / 2)
        for x in range(a, y):
            if y - 1 - x < inner - 1:
                break
            rest = log_normalizer(y - 1, x + 1, inner - 1, p) if inner > 1 else 0.0
            out[(x, y)] = math.exp(x * log_r + w_right + rest - logZ)
    return out


def _warn_cells(expected: np.ndarray):
    if np.any(expected < 5):
        warnings.warn("statistic is under-sampled: some cell expectations are below 5",
                      stacklevel=3)


def tv_lower_estimate(xi: SegmentConfig, times, p: float, statistic: str = "event_A",
                      trials: int = 2000, seed: int = 0, l: int | None = None,
                      resamples: int = 1000, jobs: int = 1, trial0: int = 0) -> list[Estimate]:
    """Lower estimates of d_xi(t) for each t in ``times`` through a statistic.

    event_A: the indicator of {leftmost particle < b - k - l}, Wilson CI;
    full_config (at most 24 sites) and L_R_pair: bootstrap CI of the TV
    between the empirical pushforward and the exact stationary one.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    b, a, k = xi.b, xi.a, xi.k
    clocks = ClockField(seed, p)
    if statistic == "event_A":
        if l is None:
            raise ValueError("event_A needs l")
        x = b - k - int(l)
        piA = stationary_event_A(b, a, k, int(l), p)
        if times.size == 1 and times[0] == 0:
            left = xi.positions()[0] if k else math.inf
            v = abs(float(left < x) - piA)
            return [Estimate(v, (v, v))]
        res = batch([xi], clocks, float(times.max()), trials, RunSpec(checkpoints=times),
                    trial0=trial0, jobs=jobs)
        hits = np.count_nonzero(res.leftmost[:, :, 0] < x, axis=0)
        out = []
        for h in hits:
            lo, hi = wilson(h, trials)
            out.append(Estimate(float(abs(h / trials - piA)), _abs_diff_ci(lo, hi, piA)))
        return out
    if statistic == "full_config":
        n = b - a + 1
        if n > 24:
            raise ValueError("full_config is limited to 24 sites")
        space = StateSpace(b, a, k, p)
        probs = space.closed_form()
        _warn_cells(trials * probs)
        res = batch([xi], clocks, float(times.max()),
                    trials, RunSpec(checkpoints=times, snapshot=(a, b)), trial0=trial0, jobs=jobs)
        out = []
        for j in range(times.size):
            ranks = space.rank_rows(res.snapshot[:, j, 0, :])
            est, ci = bootstrap_tv(ranks, probs, resamples, seed=seed + j)
            out.append(Estimate(est, ci))
        return out
    if statistic == "L_R_pair":
        law = lr_pair_law(b, a, k, p)
        keys = list(law)
        probs = np.array([law[q] for q in keys])
        index = {q: i for i, q in enumerate(keys)}
        _warn_cells(trials * probs)
        res = batch([xi], clocks, float(times.max()), trials, RunSpec(checkpoints=times),
                    trial0=trial0, jobs=jobs)
        out = []
        for j in range(times.size):
            L = res.leftmost[:, j, 0].astype(int)
            R = res.rightmost_hole[:, j, 0].astype(int)
            extra = len(keys)
            labels = np.array([index.get((x, y), extra) for x, y in zip(L, R)])
            est, ci = bootstrap_tv(labels, np.append(probs, 0.0), resamples, seed=seed + j)
            out.append(Estimate(est, ci))
        return out
    raise ValueError(f"unknown statistic {statistic!r}")


# -- upper proxy ----------------------------------------------------------------------------

def _pi_rows(xi: SegmentConfig, p: float, seed: int):
    b, a, k = xi.b, xi.a, xi.k

    def rows(m):
        occ = sample_stationary_array(b, a, k, p, 1, seed, m)[0]
        return [build_extension("pi_ext", SegmentConfig(a, b, occ))]
    return rows


def hitting_H_samples(xi: SegmentConfig, p: float, horizon: float, trials: int, seed: int,
                      stationary: bool = False, trial0: int = 0, jobs: int = 1) -> np.ndarray:
    """H over ``trials`` runs of zeta^N (or of the extension of a stationary
    draw); nan when not hit by ``horizon``."""
    spec = RunSpec(targets={0: zeta_max_of(xi)}, stop_on_hit=True)
    rows = _pi_rows(xi, p, seed) if stationary else None
    res = batch([build_extension("zeta", xi)], ClockField(seed, p), horizon, trials, spec,
                trial0=trial0, init_rows=rows, jobs=jobs)
    return res.hit_time[:, 0]


def tv_upper_estimate(xi: SegmentConfig, times, p: float, trials: int = 2000, seed: int = 0,
                      horizon: float | None = None, jobs: int = 1) -> list[Estimate]:
    """P(H(zeta^N) > t) + P(H(pi_0 extension) > t), an asymptotic upper proxy.

    The two arms use disjoint trial ranges.  If t exceeds the horizon the
    estimate is only a lower bound on that probability and is flagged.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    horizon = float(times.max()) if horizon is None else float(horizon)
    H1 = hitting_H_samples(xi, p, horizon, trials, seed, False, 0, jobs)
    H2 = hitting_H_samples(xi, p, horizon, trials, seed, True, trials, jobs)
    z = bonferroni_z(2)
    out = []
    for t in times:
        n1 = int(np.count_nonzero(~(H1 <= t)))
        n2 = int(np.count_nonzero(~(H2 <= t)))
        l1, h1 = wilson(n1, trials, z)
        l2, h2 = wilson(n2, trials, z)
        est = min((n1 + n2) / trials, 1.0)
        flagged = bool(t > horizon)
        out.append(Estimate(est, (min(l1 + l2, 1.0), min(h1 + h2, 1.0)), flagged,
                            "censored at horizon" if flagged else ""))
    return out


# -- profiles ---------------------------------------------------------------------------------

PROFILE_COLUMNS = ("family", "N", "p", "c", "t", "lower", "lower_ci_lo", "lower_ci_hi",
                   "upper", "upper_ci_lo", "upper_ci_hi", "exact", "theory", "trials", "seed")


def profile_run(family: str, N: int, p: float, c_grid, trials: int, seed: int,
                alpha: float = 0.5, exact: bool | None = None, statistic: str = "event_A",
                l: int | None = None, jobs: int = 1) -> list[dict]:
    """One TVBand row per c: lower and upper estimates with CIs, the exact
    distance when the state space is small enough, and the theory value."""
    xi, D = family_config(family, N, alpha)
    c_grid = np.asarray(sorted(c_grid), dtype=float)
    spec = ScaleSpec(p=p, N=N, D=D, alpha=alpha if family == "step" else None,
                     k_N=xi.k, b_N=xi.b)
    # tiny N can give g < 0 at negative c; the distance is evaluated at 0 there
    times = np.maximum([g_time(spec.with_c(c)) for c in c_grid], 0.0)
    if l is None:
        l = int(math.floor(N ** 0.2))
    lower = tv_lower_estimate(xi, times, p, statistic, trials, seed, l=l, jobs=jobs)
    horizon = float(g_time(spec.with_c(c_grid.max()))) + 10 * N ** (1 / 3) / spec.gamma
    upper = tv_upper_estimate(xi, times, p, trials, seed + 1, horizon=horizon, jobs=jobs)
    size = math.comb(xi.b - xi.a + 1, xi.k)
    if exact is None:
        exact = size <= 2000
    ex = [None] * times.size
    if exact and size <= MAX_STATES:
        space = StateSpace(xi.b, xi.a, xi.k, p)
        ex = [exact_tv(space, xi, float(t)) for t in times]
    rows = []
    for j, c in enumerate(c_grid):
        if family in ("half_flat", "halfflat"):
            th = None
        else:
            th = theory_profile(family, c, alpha=alpha)
        rows.append(dict(family=family, N=N, p=p, c=float(c), t=float(times[j]),
                         lower=lower[j].value, lower_ci_lo=lower[j].ci[0],
                         lower_ci_hi=lower[j].ci[1], upper=upper[j].value,
                         upper_ci_lo=upper[j].ci[0], upper_ci_hi=upper[j].ci[1],
                         exact=ex[j], theory=th, trials=trials, seed=seed))
    return rows


@dataclass(frozen=True)
class SideEstimates:
    c: np.ndarray
    t: np.ndarray
    particle: np.ndarray
    particle_ci: np.ndarray       # (C, 2)
    hole: np.ndarray
    hole_ci: np.ndarray
    threshold: float
    hole_mirror: np.ndarray | None = None    # hole event one site further right, the reflection of the particle event


def side_events(family: str, N: int, p: float, c_grid, trials: int, seed: int,
                kappa_exp: float = 0.2, alpha: float = 0.5, j: int = 0,
                jobs: int = 1) -> SideEstimates:
    """P(X_{k+j}(g) <= b-k-N^kappa) and P(H_{b-k+j}(g) >= b-k+N^kappa) on the
    infinite extension of the family (flat/half-flat truncated far away)."""
    xi, D = family_config(family, N, alpha)
    c_grid = np.asarray(sorted(c_grid), dtype=float)
    spec = ScaleSpec(p=p, N=N, D=D, kappa=kappa_exp)
    times = np.array([g_time(spec.with_c(c)) for c in c_grid])
    T = float(times.max())
    reach = flat_reach(p, T)
    a, b, k = xi.a, xi.b, xi.k
    if family == "flat":
        eta = build_extension("periodic", xi, reach=reach)
    elif family in ("half_flat", "halfflat"):
        eta = build_extension("half_flat", reach=reach - a)
    elif family == "step":
        eta = build_extension("step", at=k)
    else:
        raise ValueError(f"unknown family {family!r}")
    occ = eta.values(a - 1 - 4 * abs(j), b + 1 + 4 * abs(j))
    sites = np.arange(a - 1 - 4 * abs(j), b + 2 + 4 * abs(j))
    ps = sites[occ == 1][::-1]          # particles right to left
    hs = sites[occ == 0]                 # holes left to right
    left = int(np.flatnonzero(ps == xi.positions()[0])[0])
    right = int(np.flatnonzero(hs == a + int(np.flatnonzero(xi.occ == 0)[-1]))[0])
    psite = int(ps[left + j])            # X_{k+j}: j further particles to the left
    hsite = int(hs[right + j])           # H_{b-k+j}: j further holes to the right
    res = batch([eta], ClockField(seed, p), T, trials,
                RunSpec(checkpoints=times, tracers=[(0, psite), (0, hsite)]), jobs=jobs)
    thr = N ** kappa_exp
    xp = res.tracer[:, :, 0]
    xh = res.tracer[:, :, 1]
    pc = np.count_nonzero(xp <= b - k - thr, axis=0)
    hc = np.count_nonzero(xh >= b - k + thr, axis=0)
    mc = np.count_nonzero(xh >= b - k + 1 + thr, axis=0)
    plo, phi = wilson(pc, trials)
    hlo, hhi = wilson(hc, trials)
    return SideEstimates(c_grid, times, pc / trials, np.column_stack([plo, phi]),
                         hc / trials, np.column_stack([hlo, hhi]), thr, mc / trials)


# -- KPZ one-point laws -------------------------------------------------------------------------

@dataclass(frozen=True)
class KPZResult:
    init_class: str
    N: int
    p: float
    t: float
    values: np.ndarray
    spacing: float
    reference: str | None
    ks: float | None
    ks_raw: float | None
    alt_reference: str | None = None
    alt_ks: float | None = None

    def ecdf(self, grid):
        x = np.sort(self.values)
        return np.searchsorted(x, grid, side="right") / x.size


def kpz_onepoint_run(init_class: str, N: int, trials: int, seed: int, p: float = 0.75,
                     rho: float = 0.5, jobs: int = 1) -> KPZResult:
    """Rescaled height at x = 0 over independent runs.

    step: t = 1, reference F_GUE.  flat (rho = 1/2): t = 1/2, reference
    F_GOE(2^(1/3) s) from the stated scaling chain, with F_GOE(2 s) as the
    alternative.  half-flat: t = 1/2, no reference.
    """
    from .observables import height_query, rescaled_height
    if rho != 0.5:
        raise ValueError("only rho = 1/2 initial data are implemented")
    t = 1.0 if init_class == "step" else 0.5
    site, T = height_query(rho, N, 0.0, t, p)
    if init_class == "step":
        eta = build_extension("step", at=0)
    elif init_class == "flat":
        eta = build_extension("flat", reach=flat_reach(p, T))
    elif init_class in ("half_flat", "halfflat"):
        eta = build_extension("half_flat", reach=flat_reach(p, T))
    else:
        raise ValueError(f"unknown initial class {init_class!r}")
    res = batch([eta], ClockField(seed, p), T, trials,
                RunSpec(checkpoints=[T], flux_edges=[site]), jobs=jobs)
    from .config import height_from_config
    h = height_from_config(eta)(site) + res.flux[:, 0, 0, 0]
    vals = rescaled_height(h, rho, N, 0.0, t, p)
    spacing = (rho * (1 - rho)) ** (-2 / 3) / (2 * N) ** (1 / 3)
    if init_class == "step":
        ref = load_ref_cdf("GUE")
        return KPZResult("step", N, p, t, vals, spacing, "GUE",
                         ks_distance(vals, ref, spacing), ks_distance(vals, ref))
    if init_class == "flat":
        goe = load_ref_cdf("GOE")
        stated = lambda s: goe(2 ** (1 / 3) * np.asarray(s))
        alt = lambda s: goe(2 * np.asarray(s))
        return KPZResult("flat", N, p, t, vals, spacing, "GOE(2^(1/3)s)",
                         ks_distance(vals, stated, spacing), ks_distance(vals, stated),
                         "GOE(2s)", ks_distance(vals, alt, spacing))
    return KPZResult("half_flat", N, p, t, vals, spacing, None, None, None)


# -- overtaking tails -----------------------------------------------------------------------

def overtake_family(kind: str, N: int) -> LineConfig:
    """Test configurations for the overtaking bounds, built from flat xi^N:
    ``thm61`` is zeta^{2,N} (0's left of all 2's), ``cor62`` its reflected
    dual (2's left of all 1's)."""
    xi, _ = family_config("flat", N)
    zeta2 = build_extension("zeta2", xi)
    if kind == "thm61":
        return zeta2
    if kind == "cor62":
        return reflect_dual(zeta2, xi.b)
    raise ValueError(f"unknown overtaking family {kind!r}")


def overtake_tail(kind: str, N: int, p: float, horizon: float, threshold: float,
                  trials: int, seed: int, jobs: int = 1) -> Estimate:
    """P(sup_{s <= horizon} M_s > threshold) (M'_s for ``cor62``)."""
    from .observables import overtake_sups
    eta = overtake_family(kind, N)
    which = "M" if kind == "thm61" else "Mprime"
    sups = overtake_sups(eta, ClockField(seed, p), horizon, trials, which)
    n = int(np.count_nonzero(sups > threshold))
    return Estimate(n / trials, wilson(n, trials))


def block_tail(t: float, p: float, trials: int, seed: int, exponent: float = 0.4,
               jobs: int = 1) -> Estimate:
    """P(leftmost particle of the reversed step at time t < -t^exponent)."""
    eta = build_extension("reversed_step", Z=0)
    res = batch([eta], ClockField(seed, p), t, trials, RunSpec(checkpoints=[t]), jobs=jobs)
    n = int(np.count_nonzero(res.leftmost[:, 0, 0] < -t ** exponent))
    return Estimate(n / trials, wilson(n, trials))
