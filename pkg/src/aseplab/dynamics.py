"""Graphical construction of ASEP: evolution, basic coupling, censoring."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _engine as eng
from .config import (EMPTY, FULL, NEG_INF, POS_INF, SECOND, ConfigError,
                     LineConfig, SegmentConfig)
from .rng import ClockField

WALL = eng.WALL
PAD = 16
ACTIONS = {eng.ACT_NOOP: "noop", eng.ACT_SWAP: "swap", eng.ACT_BLOCKED: "censored"}


class WindowAbort(RuntimeError):
    """Activity reached the hard margin of a line window."""


@dataclass(frozen=True)
class Params:
    p: float

    def __post_init__(self):
        if not 0.5 < self.p <= 1.0:
            raise ValueError(f"p must lie in (1/2, 1], got {self.p}")

    @property
    def q(self) -> float:
        return 1.0 - self.p

    @property
    def Q(self) -> float:
        return self.q / self.p

    @property
    def gamma(self) -> float:
        return self.p - self.q


def hard_margin(p: float, horizon: float) -> int:
    pt = p * horizon
    return int(math.ceil(2 * pt + 8 * math.sqrt(pt) + 64))


# -- censoring -------------------------------------------------------------------

@dataclass(frozen=True)
class CensorScheme:
    """Piecewise constant set of censored edges (edge z joins z and z+1).

    ``sets[0]`` applies on [0, times[0]), ``sets[j]`` on [times[j-1], times[j]),
    the last set from times[-1] on; the map is right-continuous.  A ``rule``
    instead computes the set from the current state (Python path only).
    """
    times: tuple = ()
    sets: tuple = (frozenset(),)
    rule: Callable | None = None

    def __post_init__(self):
        if len(self.sets) != len(self.times) + 1:
            raise ValueError("need one edge set per interval")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("breakpoints must increase")

    @classmethod
    def static(cls, edges) -> "CensorScheme":
        return cls((), (frozenset(int(e) for e in edges),))

    @classmethod
    def none(cls) -> "CensorScheme":
        return cls()

    def at(self, t: float) -> frozenset:
        j = int(np.searchsorted(np.asarray(self.times, dtype=float), t, side="right"))
        return self.sets[j]

    @property
    def empty(self) -> bool:
        return self.rule is None and all(len(s) == 0 for s in self.sets)


# -- geometry ---------------------------------------------------------------------

def _span(cfg) -> tuple[int, int]:
    if isinstance(cfg, SegmentConfig):
        return cfg.a, cfg.b
    lo = cfg.window_lo if cfg.left_wall is None else cfg.left_wall
    return lo - 1, max(cfg.window_hi, cfg.window_lo) + 1


def _fill(cfg, base: int, L: int) -> np.ndarray:
    row = np.full(L, WALL, dtype=np.int8)
    if isinstance(cfg, SegmentConfig):
        row[cfg.a - base: cfg.b - base + 1] = cfg.occ
        return row
    lo = base if cfg.left_wall is None else max(base, cfg.left_wall)
    row[lo - base:] = cfg.values(lo, base + L - 1)
    return row


def _blocked(cfg, base: int, L: int) -> np.ndarray:
    mask = np.zeros(L, dtype=np.bool_)
    mask[-1] = True                      # edge L-1 has no right site
    if isinstance(cfg, SegmentConfig):
        mask[: cfg.a - base] = True
        mask[cfg.b - base:] = True
    elif cfg.left_wall is not None:
        mask[: max(cfg.left_wall - base, 0)] = True
    return mask


class _Plan:
    """Array layout shared by a set of coupled configurations."""

    def __init__(self, inits: Sequence, p: float, horizon: float, extra_sites=(),
                 margin: int | None = None):
        if not inits:
            raise ValueError("need at least one configuration")
        self.inits = list(inits)
        self.is_line = any(isinstance(c, LineConfig) for c in inits)
        los, his = zip(*(_span(c) for c in inits))
        lo, hi = min(los), max(his)
        for s in extra_sites:
            lo, hi = min(lo, s - 1), max(hi, s + 1)
        if self.is_line:
            if not math.isfinite(horizon):
                raise ValueError("line dynamics need a finite horizon")
            m = hard_margin(p, horizon) if margin is None else int(margin)
            self.base = lo - m - PAD
            self.L = hi - lo + 1 + 2 * (m + PAD)
            self.elo = max(lo - PAD - self.base, 0)
            self.ehi = min(hi + PAD - self.base, self.L - 2)
            self.emin, self.emax = 0, self.L - 2
        else:
            self.base = lo - 1
            self.L = hi - lo + 3
            self.elo, self.ehi = 1, self.L - 3
            self.emin, self.emax = self.elo, self.ehi
        self.K = len(inits)
        self.lat0 = np.stack([_fill(c, self.base, self.L) for c in inits])
        self.blocked = np.stack([_blocked(c, self.base, self.L) for c in inits])

    def index(self, site: int) -> int:
        i = int(site) - self.base
        if not 0 <= i < self.L:
            raise ValueError(f"site {site} outside the simulated lattice")
        return i

    def row_for(self, cfg) -> np.ndarray:
        return _fill(cfg, self.base, self.L)

    def to_config(self, row: np.ndarray, like):
        if isinstance(like, SegmentConfig):
            return SegmentConfig(like.a, like.b, row[like.a - self.base: like.b - self.base + 1])
        lo = self.base if like.left_wall is None else like.left_wall
        return LineConfig(like.left_fill, lo, row[lo - self.base:],
                          like.right_fill, left_wall=like.left_wall)

    def site_value(self, idx: int, like, which: str):
        """Map a scan index to a coordinate with the infinite sentinels."""
        if idx < 0:
            return None
        if isinstance(like, LineConfig):
            if which == "first" and idx == 0 and like.left_wall is None:
                return NEG_INF
            if which == "last" and idx == self.L - 1:
                return POS_INF
        return self.base + int(idx)

    def censor_arrays(self, censor: CensorScheme | None):
        if censor is None or censor.empty:
            return np.empty(0), np.zeros((0, self.L), dtype=np.bool_)
        if censor.rule is not None:
            raise ValueError("rule-driven censoring runs on the reference path")
        mask = np.zeros((len(censor.sets), self.L), dtype=np.bool_)
        for j, s in enumerate(censor.sets):
            for e in s:
                i = int(e) - self.base
                if 0 <= i < self.L:
                    mask[j, i] = True
        return np.asarray(censor.times, dtype=float), mask


# -- results ----------------------------------------------------------------------

@dataclass
class EventLog:
    time: np.ndarray
    edge: np.ndarray
    index: np.ndarray
    coin: np.ndarray
    action: np.ndarray       # (n_events, K) action codes

    def __len__(self):
        return self.time.size


@dataclass
class Trajectory:
    init: object
    final: object
    horizon: float
    events: EventLog | None
    hit_time: float | None = None
    checkpoints: dict = field(default_factory=dict)
    tracers: dict = field(default_factory=dict)
    overtake: dict = field(default_factory=dict)
    observers: list = field(default_factory=list)
    n_events: int = 0
    end_time: float = 0.0
    plan: _Plan | None = None
    slot: int = 0

    def states(self) -> np.ndarray:
        """Lattice rows after each logged event (row 0 = initial)."""
        if self.events is None:
            raise ValueError("trajectory was run without an event log")
        return eng.replay_states(self.plan.lat0, self.events.edge, self.events.action,
                                 self.plan.base, self.slot)

    def replay(self) -> object:
        """Replay the event log from the initial configuration."""
        return self.plan.to_config(self.states()[-1], self.init)

    def dump_events(self, path) -> None:
        """CSV: time, edge, left_value, right_value, action (values before the event)."""
        rows = self.states()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "edge", "left_value", "right_value", "action"])
            ev = self.events
            for r in range(len(ev)):
                i = int(ev.edge[r]) - self.plan.base
                w.writerow([repr(float(ev.time[r])), int(ev.edge[r]), int(rows[r, i]),
                            int(rows[r, i + 1]), ACTIONS[int(ev.action[r, self.slot])]])


# -- runs ---------------------------------------------------------------------

def _clock_args(clocks: ClockField):
    return clocks.key[0], clocks.key[1], clocks.edge_sign, clocks.edge_shift


def _empty_outputs(K, C, F, W, T):
    return dict(
        hit_time=np.empty(K), ck_lm1=np.full((C, K), -1, np.int64),
        ck_lm2=np.full((C, K), -1, np.int64), ck_rm0=np.full((C, K), -1, np.int64),
        ck_flux=np.zeros((C, K, F), np.int64), ck_snap=np.zeros((C, K, W), np.int8),
        ck_tr=np.zeros((C, T), np.int64), tr_min=np.zeros(T, np.int64),
        tr_max=np.zeros(T, np.int64), ck_ot=np.zeros(C, np.int64),
        ot_out=np.zeros(2, np.int64), meta=np.zeros(7, np.int64), tmeta=np.zeros(1))


@dataclass
class RunSpec:
    """What to watch during a run (coordinates are lattice sites/edges)."""
    checkpoints: Sequence[float] = ()
    targets: dict = field(default_factory=dict)      # slot -> config
    stop_on_hit: bool = False
    tracers: Sequence[tuple[int, int]] = ()           # (slot, initial site)
    overtake: tuple | None = None                     # (slot, A, B)
    flux_edges: Sequence[int] = ()
    snapshot: tuple[int, int] | None = None           # site range [lo; hi]
    censor: CensorScheme | None = None
    censored_slots: Sequence[int] | None = None       # default: all slots
    margin: int | None = None

    def extra_sites(self):
        out = [s for _, s in self.tracers]
        out += list(self.flux_edges) + [e + 1 for e in self.flux_edges]
        if self.snapshot:
            out += list(self.snapshot)
        return out


class _Prepared:
    def __init__(self, inits, p, horizon, spec: RunSpec):
        self.plan = plan = _Plan(inits, p, horizon, spec.extra_sites(), spec.margin)
        self.spec = spec
        self.p = p
        self.horizon = float(horizon)
        K, L = plan.K, plan.L
        self.target = np.zeros((K, L), np.int8)
        self.has_target = np.zeros(K, np.bool_)
        for k, cfg in spec.targets.items():
            self.target[k] = plan.row_for(cfg)
            self.has_target[k] = True
        self.ck = np.asarray(sorted(spec.checkpoints), dtype=float)
        self.flux = np.asarray([plan.index(e) for e in spec.flux_edges], dtype=np.int64)
        if spec.snapshot:
            self.snap_lo = plan.index(spec.snapshot[0])
            self.W = spec.snapshot[1] - spec.snapshot[0] + 1
        else:
            self.snap_lo, self.W = 0, 0
        self.tr_cfg = np.asarray([k for k, _ in spec.tracers], dtype=np.int64)
        self.tr_pos = np.asarray([plan.index(s) for _, s in spec.tracers], dtype=np.int64)
        for k, s in spec.tracers:
            if plan.lat0[k, plan.index(s)] not in (0, 1, 2):
                raise ConfigError(f"tracer site {s} is a wall")
        self.ot = spec.overtake if spec.overtake is not None else (-1, 1, 2)
        self.cens_times, self.cens_mask = plan.censor_arrays(spec.censor)
        slots = range(K) if spec.censored_slots is None else spec.censored_slots
        self.censorable = np.zeros(K, np.bool_)
        self.censorable[list(slots)] = True

    def run_one(self, clocks: ClockField, log_cap: int):
        pl = self.plan
        K, L = pl.K, pl.L
        out = _empty_outputs(K, self.ck.size, self.flux.size, self.W, self.tr_pos.size)
        lat = pl.lat0.copy()
        tr = self.tr_pos.copy()
        cap = max(int(log_cap), 0)
        logs = (np.empty(cap), np.empty(cap, np.int64), np.empty(cap, np.int64),
                np.empty(cap), np.empty((cap, K), np.int8))
        k0, k1, sign, shift = _clock_args(clocks)
        eng.run(lat, pl.blocked, self.cens_times, self.cens_mask, self.censorable,
                k0, k1, clocks.trial, sign, shift, pl.base, clocks.rate, clocks.rule, self.horizon,
                pl.elo, pl.ehi, pl.emin, pl.emax, pl.is_line,
                self.target, self.has_target, self.spec.stop_on_hit,
                self.ck, self.flux, self.snap_lo, self.tr_cfg, tr,
                self.ot[0], self.ot[1], self.ot[2],
                out["hit_time"], out["ck_lm1"], out["ck_lm2"], out["ck_rm0"],
                out["ck_flux"], out["ck_snap"], out["ck_tr"], out["tr_min"], out["tr_max"],
                out["ck_ot"], out["ot_out"], *logs, out["meta"], out["tmeta"], cap == 0)
        status = int(out["meta"][0])
        if status == eng.WINDOW_ABORT:
            raise WindowAbort(f"activity reached the hard margin of the window "
                              f"(trial {clocks.trial}, t={out['tmeta'][0]:.6g})")
        if status == eng.LOG_OVERFLOW:
            raise RuntimeError(f"event log capacity {cap} exceeded; raise log_cap")
        n_log = int(out["meta"][2])
        events = None
        if cap > 0:
            events = EventLog(logs[0][:n_log].copy(), logs[1][:n_log].copy(),
                              logs[2][:n_log].copy(), logs[3][:n_log].copy(),
                              logs[4][:n_log].copy())
        return lat, tr, out, events


def _checkpoint_dict(prep: _Prepared, out, k: int, like, valid: int):
    pl = prep.plan
    d = {"time": prep.ck[:valid].copy()}
    d["leftmost"] = [pl.site_value(int(x), like, "first") for x in out["ck_lm1"][:valid, k]]
    d["leftmost_second"] = [pl.site_value(int(x), like, "first") if x >= 0 else None
                            for x in out["ck_lm2"][:valid, k]]
    d["rightmost_hole"] = [pl.site_value(int(x), like, "last") for x in out["ck_rm0"][:valid, k]]
    d["flux"] = out["ck_flux"][:valid, k, :].copy()
    if prep.W:
        d["snapshot"] = out["ck_snap"][:valid, k, :].copy()
    return d


def _trajectories(prep: _Prepared, clocks, lat, tr, out, events, observers):
    pl = prep.plan
    valid = int(out["meta"][6])
    trajs = []
    for k, init in enumerate(pl.inits):
        hit = None
        if prep.has_target[k]:
            h = float(out["hit_time"][k])
            hit = h if h >= 0 else None
        tracers = {}
        for j, (slot, site) in enumerate(prep.spec.tracers):
            if slot == k:
                tracers[site] = dict(final=int(tr[j]) + pl.base,
                                     min=int(out["tr_min"][j]) + pl.base,
                                     max=int(out["tr_max"][j]) + pl.base,
                                     at=out["ck_tr"][:valid, j] + pl.base)
        ot = {}
        if prep.ot[0] == k:
            ot = dict(initial=int(out["ot_out"][0]), sup=int(out["ot_out"][1]),
                      at=out["ck_ot"][:valid].copy())
        trajs.append(Trajectory(
            init=init, final=pl.to_config(lat[k], init), horizon=prep.horizon,
            events=events, hit_time=hit, checkpoints=_checkpoint_dict(prep, out, k, init, valid),
            tracers=tracers, overtake=ot, n_events=int(out["meta"][1]),
            end_time=float(out["tmeta"][0]), plan=pl, slot=k))
    if observers:
        if events is None:
            raise ValueError("observers need the event log")
        for tr_ in trajs:
            apply_observers(tr_, observers)
    return trajs


DEFAULT_LOG_CAP = 2_000_000


def evolve(init, clocks: ClockField, horizon: float, observers=(), *,
           spec: RunSpec | None = None, log_cap: int = DEFAULT_LOG_CAP) -> Trajectory:
    """Run one configuration up to ``horizon`` under ``clocks``."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    spec = spec or RunSpec()
    prep = _Prepared([init], clocks.p, horizon, spec)
    lat, tr, out, events = prep.run_one(clocks, log_cap)
    return _trajectories(prep, clocks, lat, tr, out, events, observers)[0]


def evolve_coupled(inits: Sequence, clocks: ClockField, horizon: float, observers=(), *,
                   spec: RunSpec | None = None, log_cap: int = DEFAULT_LOG_CAP):
    """Lockstep run of several configurations on one clock field."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    spec = spec or RunSpec()
    prep = _Prepared(list(inits), clocks.p, horizon, spec)
    lat, tr, out, events = prep.run_one(clocks, log_cap)
    return _trajectories(prep, clocks, lat, tr, out, events, observers)


def evolve_censored(init, clocks: ClockField, censor: CensorScheme, horizon: float,
                    observers=(), *, spec: RunSpec | None = None,
                    log_cap: int = DEFAULT_LOG_CAP) -> Trajectory:
    """As :func:`evolve`, with rings on censored edges skipped."""
    if censor.rule is not None:
        return evolve_reference(init, clocks, horizon, censor=censor)
    spec = spec or RunSpec()
    spec = RunSpec(**{**spec.__dict__, "censor": censor})
    return evolve(init, clocks, horizon, observers, spec=spec, log_cap=log_cap)


# -- observers --------------------------------------------------------------------

class Observer:
    """Called with the lattice row after every event of a replayed trajectory.

    The row is only valid during the call.  Observers that set
    ``swaps_only`` are skipped on events that leave the row unchanged.
    """
    swaps_only = False

    def start(self, traj: Trajectory, row: np.ndarray) -> None:
        pass

    def event(self, t: float, edge: int, action: int, row: np.ndarray) -> None:
        pass

    def finish(self, traj: Trajectory) -> None:
        pass


def apply_observers(traj: Trajectory, observers) -> None:
    row = traj.plan.lat0[traj.slot].copy()
    for ob in observers:
        ob.start(traj, row)
    every = [ob for ob in observers if not ob.swaps_only]
    ev = traj.events
    acts = ev.action[:, traj.slot]
    if every:
        picks = range(len(ev))
    else:
        picks = np.flatnonzero(acts == eng.ACT_SWAP).tolist()
    times, edges = ev.time, ev.edge
    base = traj.plan.base
    for r in picks:
        act = int(acts[r])
        z = int(edges[r])
        if act == eng.ACT_SWAP:
            i = z - base
            row[i], row[i + 1] = row[i + 1], row[i]
        t = float(times[r])
        for ob in observers:
            if act == eng.ACT_SWAP or not ob.swaps_only:
                ob.event(t, z, act, row)
    for ob in observers:
        ob.finish(traj)
    traj.observers = list(observers)


# -- reference evolver ----------------------------------------------------------

_RANK = {0: 0, 1: 2, 2: 1}


def evolve_reference(init, clocks: ClockField, horizon: float,
                     censor: CensorScheme | None = None, sites: tuple[int, int] | None = None):
    """Plain-Python evolution over a fixed site range; slow, used for
    cross-checks and rule-driven censoring.  Returns (final config, events)
    with events as (time, edge, action) tuples."""
    if isinstance(init, SegmentConfig):
        lo, hi = init.a, init.b
        vals = {i: int(init[i]) for i in range(lo, hi + 1)}
    else:
        if sites is None:
            raise ValueError("line configurations need an explicit site range")
        lo, hi = sites
        vals = {i: int(init[i]) for i in range(lo, hi + 1)}
    down, up_lo, up_hi = clocks.rule
    streams = {}
    heap = []
    import heapq

    def ring(z, n):
        times, coins = streams.setdefault(z, clocks.stream(z, 64))
        while n >= times.size:
            times, coins = clocks.stream(z, 2 * times.size)
            streams[z] = (times, coins)
        return float(times[n]), float(coins[n])

    for z in range(lo, hi):
        t, _ = ring(z, 0)
        heapq.heappush(heap, (t, z, 0))
    events = []
    while heap:
        t, z, n = heapq.heappop(heap)
        if t > horizon:
            break
        _, coin = ring(z, n)
        blocked = False
        if censor is not None:
            cset = censor.rule(dict(vals), t) if censor.rule else censor.at(t)
            blocked = z in cset
        act = eng.ACT_BLOCKED if blocked else eng.ACT_NOOP
        if not blocked:
            u, v = vals[z], vals[z + 1]
            if (_RANK[u] > _RANK[v] and coin < down) or (_RANK[u] < _RANK[v] and up_lo <= coin < up_hi):
                vals[z], vals[z + 1] = v, u
                act = eng.ACT_SWAP
        events.append((t, z, act))
        heapq.heappush(heap, (ring(z, n + 1)[0], z, n + 1))
    occ = [vals[i] for i in range(lo, hi + 1)]
    if isinstance(init, SegmentConfig):
        return SegmentConfig(lo, hi, occ), events
    return LineConfig(init.left_fill, lo, occ, init.right_fill, left_wall=init.left_wall), events


# -- batches ---------------------------------------------------------------------

@dataclass
class BatchResult:
    trials: int
    trial0: int
    hit_time: np.ndarray         # (M, K), nan if not hit
    leftmost: np.ndarray         # (M, C, K) lattice sites; -inf/+inf/nan sentinels
    leftmost_second: np.ndarray
    rightmost_hole: np.ndarray
    flux: np.ndarray             # (M, C, K, F)
    snapshot: np.ndarray         # (M, C, K, W)
    tracer: np.ndarray           # (M, C, T)
    tracer_min: np.ndarray
    tracer_max: np.ndarray
    overtake_at: np.ndarray      # (M, C)
    overtake_sup: np.ndarray     # (M,)
    n_events: np.ndarray
    final: np.ndarray | None
    checkpoints: np.ndarray
    plan: _Plan


def _map_scan(idx, plan: _Plan, inits, which):
    out = idx.astype(float) + plan.base
    out[idx < 0] = np.nan
    for k, cfg in enumerate(inits):
        if isinstance(cfg, LineConfig):
            if which == "first" and cfg.left_wall is None:
                sl = out[..., k]
                sl[idx[..., k] == 0] = -np.inf
            if which == "last":
                sl = out[..., k]
                sl[idx[..., k] == plan.L - 1] = np.inf
    return out


def run_batch(inits: Sequence, clocks: ClockField, horizon: float, trials: int, *,
              spec: RunSpec | None = None, trial0: int = 0, init_rows=None,
              keep_final: bool = False, lazy: bool = True) -> BatchResult:
    """``trials`` independent runs of the coupled ``inits``; trial m uses the
    clock field of trial ``trial0 + m``.  ``init_rows`` optionally supplies a
    callable m -> list of per-slot configurations (e.g. stationary draws) that
    replace ``inits`` trial by trial; their spans must fit the plan of ``inits``."""
    spec = spec or RunSpec()
    prep = _Prepared(list(inits), clocks.p, horizon, spec)
    pl = prep.plan
    M = int(trials)
    K, L = pl.K, pl.L
    C, F, W, T = prep.ck.size, prep.flux.size, prep.W, prep.tr_pos.size
    if init_rows is None:
        lat0 = pl.lat0[None]
    else:
        lat0 = np.empty((M, K, L), np.int8)
        for m in range(M):
            cfgs = init_rows(m)
            for k, cfg in enumerate(cfgs):
                lat0[m, k] = pl.row_for(cfg)
    tr0 = prep.tr_pos[None]
    hit = np.empty((M, K))
    lm1 = np.full((M, C, K), -1, np.int64)
    lm2 = np.full((M, C, K), -1, np.int64)
    rm0 = np.full((M, C, K), -1, np.int64)
    fl = np.zeros((M, C, K, F), np.int64)
    sn = np.zeros((M, C, K, W), np.int8)
    ctr = np.zeros((M, C, T), np.int64)
    tmin = np.zeros((M, T), np.int64)
    tmax = np.zeros((M, T), np.int64)
    cot = np.zeros((M, C), np.int64)
    oto = np.zeros((M, 2), np.int64)
    meta = np.zeros((M, 7), np.int64)
    tmeta = np.zeros((M, 1))
    final = np.zeros((M if keep_final else 0, K, L), np.int8)
    k0, k1, sign, shift = _clock_args(clocks)
    eng.run_batch(lat0, pl.blocked, prep.cens_times, prep.cens_mask, prep.censorable,
                  k0, k1, int(trial0), sign, shift, pl.base, clocks.rate, clocks.rule, prep.horizon,
                  pl.elo, pl.ehi, pl.emin, pl.emax, pl.is_line,
                  prep.target, prep.has_target, spec.stop_on_hit,
                  prep.ck, prep.flux, prep.snap_lo, prep.tr_cfg, tr0,
                  prep.ot[0], prep.ot[1], prep.ot[2],
                  hit, lm1, lm2, rm0, fl, sn, ctr, tmin, tmax, cot, oto, meta, tmeta, final,
                  bool(lazy))
    bad = np.flatnonzero(meta[:, 0] == eng.WINDOW_ABORT)
    if bad.size:
        raise WindowAbort(f"{bad.size} trial(s) reached the hard window margin "
                          f"(first: trial {int(trial0) + int(bad[0])})")
    hit = np.where(hit >= 0, hit, np.nan)
    hit[:, ~prep.has_target] = np.nan
    if spec.stop_on_hit and C:
        short = meta[:, 6] < C
        if np.any(short):
            # checkpoints past an early stop are undefined
            for arr in (lm1, lm2, rm0):
                arr[short] = -1
    return BatchResult(
        trials=M, trial0=int(trial0), hit_time=hit,
        leftmost=_map_scan(lm1, pl, pl.inits, "first"),
        leftmost_second=_map_scan(lm2, pl, pl.inits, "first"),
        rightmost_hole=_map_scan(rm0, pl, pl.inits, "last"),
        flux=fl, snapshot=sn, tracer=ctr + pl.base, tracer_min=tmin + pl.base,
        tracer_max=tmax + pl.base, overtake_at=cot, overtake_sup=oto[:, 1],
        n_events=meta[:, 1].copy(), final=final if keep_final else None,
        checkpoints=prep.ck, plan=pl)


# -- merge projection -------------------------------------------------------------

@dataclass(frozen=True)
class MergeProjection:
    """The {0,2} word left after deleting the 1's, anchored so that the
    number of 0's at sites >= 0 equals the number of 2's at sites < 0."""
    config: LineConfig
    censored: frozenset          # edges (j, j+1) of eta* joining non-neighbours of eta
    sites: np.ndarray            # eta-site of each eta*-site, aligned with ``star_lo``
    star_lo: int


def merge_projection(eta: LineConfig, lo: int | None = None, hi: int | None = None,
                     keep: int = 0, drop: int = 1) -> MergeProjection:
    """Delete all sites carrying ``drop`` and re-anchor the remaining word.

    With the defaults this is the {0,2} projection used for overtaking by
    holes; ``keep=...`` only names the value playing the role of 0.  The
    configuration must have infinitely many 0's to the left and 2's to the
    right (left fill 0, right fill 2), or the anchor does not exist.
    """
    other = ({0, 1, 2} - {keep, drop}).pop()
    if eta.left_fill != keep or eta.right_fill != other or eta.left_wall is not None:
        raise ConfigError("merge projection needs left fill %d and right fill %d"
                          % (keep, other))
    lo = eta.window_lo - 1 if lo is None else min(lo, eta.window_lo - 1)
    hi = eta.window_hi + 1 if hi is None else max(hi, eta.window_hi + 1)
    vals = eta.values(lo, hi)
    sites = np.arange(lo, hi + 1)
    mask = vals != drop
    word = vals[mask]
    wsites = sites[mask]
    # f(s) = #{j >= s: word_j = keep} - #{j < s: word_j = other}; decreases by one per step
    is_keep = (word == keep).astype(np.int64)
    is_other = (word == other).astype(np.int64)
    keep_right = np.concatenate([np.cumsum(is_keep[::-1])[::-1], [0]])
    other_left = np.concatenate([[0], np.cumsum(is_other)])
    f = keep_right - other_left
    zero = np.flatnonzero(f == 0)
    if zero.size != 1:
        raise ConfigError("no valid anchor for the merge projection")
    s = int(zero[0])
    star_lo = -s
    star = np.where(word == other, 2, 0).astype(np.int8)
    cfg = LineConfig(EMPTY, star_lo, star, SECOND)
    censored = frozenset(star_lo + j for j in range(word.size - 1)
                         if wsites[j + 1] != wsites[j] + 1)
    return MergeProjection(cfg, censored, wsites, star_lo)
