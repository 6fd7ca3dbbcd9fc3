"""Quantities read off ASEP trajectories: hitting times of the packed
states, defect sets, heights, tagged labels and overtaking counts."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import _engine as eng
from .config import (ConfigError, LabelTracking, LineConfig, SegmentConfig,
                     build_extension, height_from_config, xi_max)
from .dynamics import Observer, RunSpec, Trajectory, evolve, run_batch
from .rng import ClockField


# -- hitting times ----------------------------------------------------------------

@dataclass(frozen=True)
class HittingResult:
    status: str          # "hit" or "censored"
    time: float          # hit time, or the horizon when censored
    horizon: float

    def __post_init__(self):
        if self.status not in ("hit", "censored"):
            raise ValueError(f"bad status {self.status!r}")
        if self.time > self.horizon:
            raise ValueError("hit time beyond the horizon")

    @property
    def hit(self) -> bool:
        return self.status == "hit"


def _result(t, horizon) -> HittingResult:
    if t is None or (isinstance(t, float) and math.isnan(t)):
        return HittingResult("censored", float(horizon), float(horizon))
    return HittingResult("hit", float(t), float(horizon))


def zeta_max_of(xi: SegmentConfig) -> LineConfig:
    return build_extension("zeta_max", xi)


def hitting_time_g(xi: SegmentConfig, clocks: ClockField, horizon: float) -> HittingResult:
    """First time the segment chain started at ``xi`` equals xi_max."""
    spec = RunSpec(targets={0: xi_max(xi.b, xi.a, xi.k)}, stop_on_hit=True)
    tr = evolve(xi, clocks, horizon, spec=spec, log_cap=0)
    return _result(tr.hit_time, horizon)


def hitting_time_H(xi: SegmentConfig, clocks: ClockField, horizon: float) -> HittingResult:
    """First time the line extension zeta^N of ``xi`` equals zeta^max."""
    spec = RunSpec(targets={0: zeta_max_of(xi)}, stop_on_hit=True)
    tr = evolve(build_extension("zeta", xi), clocks, horizon, spec=spec, log_cap=0)
    return _result(tr.hit_time, horizon)


def hitting_times(init, target, clocks: ClockField, horizon: float, trials: int,
                  trial0: int = 0, init_rows=None) -> np.ndarray:
    """Hit times of ``target`` over independent trials; nan when censored."""
    spec = RunSpec(targets={0: target}, stop_on_hit=True)
    res = run_batch([init], clocks, horizon, trials, spec=spec, trial0=trial0,
                    init_rows=init_rows)
    return res.hit_time[:, 0]


def coupled_hitting(xi: SegmentConfig, clocks: ClockField, horizon: float, trials: int,
                    trial0: int = 0, init_rows=None, check: bool | None = None):
    """(g, H) for xi and its extension zeta^N run on shared clocks.

    Under the basic gauge g <= H holds trajectory by trajectory and, with
    ``check`` (the default for that gauge), a violation raises.  The literal
    gauge does not guarantee it; count violations with ``g > H`` instead.
    ``init_rows`` may supply per-trial segment configurations (same a, b, k).
    """
    if check is None:
        check = clocks.gauge == "basic"
    zeta = build_extension("zeta", xi)
    spec = RunSpec(targets={0: xi_max(xi.b, xi.a, xi.k), 1: zeta_max_of(xi)},
                   stop_on_hit=True)
    rows = None
    if init_rows is not None:
        def rows(m):
            x = init_rows(m)
            return [x, build_extension("zeta", x)]
    res = run_batch([xi, zeta], clocks, horizon, trials, spec=spec, trial0=trial0,
                    init_rows=rows)
    g, H = res.hit_time[:, 0], res.hit_time[:, 1]
    bad = np.isfinite(H) & ~(g <= H)
    if check and np.any(bad):
        m = int(np.flatnonzero(bad)[0])
        raise AssertionError(f"g > H in trial {trial0 + m}: {g[m]} > {H[m]}")
    return g, H


class DefectSet(Observer):
    """Sites where the replayed configuration differs from ``target``.

    Only the two sites of a fired edge are revisited; every ``rescan``
    events the set is compared against a full scan.
    """

    def __init__(self, target, rescan: int = 10_000):
        self.target = target
        self.rescan = int(rescan)
        self.time = None
        self.sites: set[int] = set()

    def start(self, traj, row):
        self.base = traj.plan.base
        self.trow = traj.plan.row_for(self.target)
        self.sites = set(int(i) for i in np.flatnonzero(row != self.trow))
        self.count = 0
        self.time = 0.0 if not self.sites else None

    def event(self, t, edge, action, row):
        self.count += 1
        if action == eng.ACT_SWAP:
            i = edge - self.base
            for j in (i, i + 1):
                if row[j] != self.trow[j]:
                    self.sites.add(j)
                else:
                    self.sites.discard(j)
            if not self.sites and self.time is None:
                self.time = t
        if self.count % self.rescan == 0:
            full = set(int(i) for i in np.flatnonzero(row != self.trow))
            if full != self.sites:
                raise AssertionError("defect set out of sync with a full scan")

    def finish(self, traj):
        self.result = _result(self.time, traj.horizon)

    def defects(self) -> list[int]:
        """Current defect sites in lattice coordinates."""
        return sorted(self.base + i for i in self.sites)

    def rows(self):
        return [("hit_time", self.result.time), ("hit", int(self.result.hit))]


# -- heights ------------------------------------------------------------------------

class HeightObserver(Observer):
    """h(h0, y, t) at a set of (y, t) queries, from per-edge particle flux.

    A jump y -> y+1 raises h(y) by one, a jump y+1 -> y lowers it by one.
    """

    def __init__(self, queries):
        self.queries = sorted((float(t), int(y)) for y, t in queries)
        self.values: dict[tuple[int, float], int] = {}

    def start(self, traj, row):
        if traj.init.species:
            raise ConfigError("heights need a 0/1 configuration")
        self.h0 = height_from_config(traj.init)
        self.plan = traj.plan
        self.base = traj.plan.base
        self.flux = np.zeros(row.size, np.int64)
        self.row0 = row.copy()
        self._next = 0
        self.t_last = 0.0

    def _answer(self, upto: float, inclusive: bool):
        while self._next < len(self.queries):
            t, y = self.queries[self._next]
            if t > upto or (t == upto and not inclusive):
                break
            i = self.plan.index(y)
            self.values[(y, t)] = int(self.h0(y)) + int(self.flux[i])
            self._next += 1

    def event(self, t, edge, action, row):
        self._answer(t, inclusive=False)
        if action == eng.ACT_SWAP:
            i = edge - self.base
            self.flux[i] += 1 if row[i + 1] == 1 else -1
        self.t_last = t

    def finish(self, traj):
        self._answer(traj.horizon, inclusive=True)
        if self._next < len(self.queries):
            t, y = self.queries[self._next]
            raise ValueError(f"height query ({y}, {t}) is past the horizon {traj.horizon}")
        self.final_row = self.plan.row_for(traj.final)

    def height(self, y: int, t: float) -> int:
        return self.values[(int(y), float(t))]

    def consistent(self) -> bool:
        """occupancy(x) == h(x-1) - h(x) on the simulated lattice, at the end."""
        row = self.final_row.astype(np.int64)
        inner = slice(1, row.size - 1)
        d = self.row0[inner].astype(np.int64) + self.flux[:-2] - self.flux[1:-1]
        ok = (row[inner] == d) | (row[inner] == eng.WALL)
        return bool(np.all(ok))

    def rows(self):
        return [(f"h({y},{t:g})", v) for (y, t), v in sorted(self.values.items())]


def kappa(rho: float) -> float:
    return 2 ** (5 / 3) * (rho * (1 - rho)) ** (1 / 3)


def height_query(rho: float, N: float, x: float, t: float, p: float) -> tuple[int, float]:
    """Lattice site (rounded) and ASEP time at which the rescaled height at
    (x, t) reads h."""
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    gamma = 2 * p - 1
    site = 2 * (1 - 2 * rho) * N * t + kappa(rho) * x * N ** (2 / 3)
    return int(np.rint(site)), 2 * N * t / gamma


def rescaled_height(source, rho: float, N: float, x: float, t: float, p: float):
    """(rho(1-rho))^(-2/3) (2N)^(-1/3) (2 rho^2 t N - rho kappa x N^(2/3) - h).

    ``source`` is a HeightObserver holding the query, or the raw height
    value(s) h at the query point.
    """
    site, time = height_query(rho, N, x, t, p)
    if isinstance(source, HeightObserver):
        try:
            h = source.height(site, time)
        except KeyError:
            raise ValueError(f"height at ({site}, {time}) was not recorded") from None
    else:
        h = np.asarray(source, dtype=float)
    pre = (rho * (1 - rho)) ** (-2 / 3) / (2 * N) ** (1 / 3)
    out = pre * (2 * rho ** 2 * t * N - rho * kappa(rho) * x * N ** (2 / 3) - h)
    return float(out) if np.ndim(out) == 0 else out


# -- overtaking ---------------------------------------------------------------------

def _species_span(eta: LineConfig, lo: int, hi: int):
    return np.arange(lo, hi + 1), eta.values(lo, hi)


def overtake_count(eta: LineConfig, A: int, B: int) -> int:
    """Number of B's strictly right of the leftmost A (finite cases only)."""
    lo, hi = eta.window_lo - 1, eta.window_hi + 1
    sites, vals = _species_span(eta, lo, hi)
    first = np.flatnonzero(vals == A)
    if first.size == 0 or eta.left_fill == A:
        raise ConfigError(f"no leftmost {A} in a finite window")
    if eta.right_fill == B:
        raise ConfigError(f"infinitely many {B}'s to the right")
    return int(np.count_nonzero(vals[first[0] + 1:] == B))


def _check_order(eta: LineConfig, left: int, right: int):
    """All ``left`` values lie strictly left of all ``right`` values."""
    if not eta.species and 2 in (left, right):
        raise ConfigError("overtaking needs a species configuration")
    if eta.left_fill == right or eta.right_fill == left:
        raise ConfigError("ordering hypothesis violated at time 0")
    lo, hi = eta.window_lo - 1, eta.window_hi + 1
    sites, vals = _species_span(eta, lo, hi)
    L, R = sites[vals == left], sites[vals == right]
    if L.size and R.size and L.max() > R.min():
        raise ConfigError("ordering hypothesis violated at time 0")


@dataclass(frozen=True)
class OvertakeResult:
    initial: int
    sup: int
    at: np.ndarray       # counts at the requested times


def _overtake(eta, clocks, horizon, A, B, times):
    spec = RunSpec(checkpoints=list(times), overtake=(0, A, B))
    tr = evolve(eta, clocks, horizon, spec=spec, log_cap=0)
    ot = tr.overtake
    return OvertakeResult(ot["initial"], ot["sup"], np.asarray(ot["at"]))


def overtake_M(eta: LineConfig, clocks: ClockField, horizon: float, times=()) -> OvertakeResult:
    """Running maximum of M_s = #0's right of the leftmost 2 (all 0's start
    left of all 2's)."""
    _check_order(eta, 0, 2)
    return _overtake(eta, clocks, horizon, 2, 0, times)


def overtake_Mprime(eta: LineConfig, clocks: ClockField, horizon: float,
                    times=()) -> OvertakeResult:
    """Running maximum of M'_s = #2's right of the leftmost 1 (all 2's start
    left of all 1's)."""
    _check_order(eta, 2, 1)
    return _overtake(eta, clocks, horizon, 1, 2, times)


def overtake_sups(eta: LineConfig, clocks: ClockField, horizon: float, trials: int,
                  which: str = "M", trial0: int = 0) -> np.ndarray:
    """sup_{s <= horizon} M_s (or M'_s) over independent trials."""
    if which == "M":
        _check_order(eta, 0, 2)
        A, B = 2, 0
    elif which == "Mprime":
        _check_order(eta, 2, 1)
        A, B = 1, 2
    else:
        raise ValueError(f"unknown counter {which!r}")
    res = run_batch([eta], clocks, horizon, trials, spec=RunSpec(overtake=(0, A, B)),
                    trial0=trial0)
    return res.overtake_sup


# -- labels ---------------------------------------------------------------------------

def _label_site(labels: LabelTracking, label) -> int:
    kind, j = label
    if kind == "X":
        return labels.particle(j)
    if kind == "H":
        return labels.hole(j)
    raise KeyError(f"unknown label kind {kind!r}")


def tagged_position(labels: LabelTracking, traj: Trajectory, label, t: float) -> int:
    """Position at time ``t`` of label ("X", j) or ("H", i) along a logged
    trajectory.  A swap across the label's site carries it along."""
    if traj.events is None:
        raise ValueError("trajectory was run without an event log")
    if t > traj.horizon:
        raise ValueError("time past the horizon")
    pos = _label_site(labels, label)
    ev = traj.events
    n = int(np.searchsorted(ev.time, t, side="right"))
    sw = ev.action[:n, traj.slot] == eng.ACT_SWAP
    for e in ev.edge[:n][sw]:
        if pos == e:
            pos += 1
        elif pos == e + 1:
            pos -= 1
    return int(pos)


class LabelObserver(Observer):
    """Follows every assigned label and checks, after each event, that
    particle labels stay ordered X_{j+1} < X_j and hole labels H_i < H_{i+1}."""
    swaps_only = True

    def __init__(self, labels: LabelTracking):
        self.labels = labels
        self.violations = 0

    def start(self, traj, row):
        lb = self.labels
        order = np.argsort(lb.particle_labels)
        self.plab = lb.particle_labels[order]
        self.ppos = lb.particle_pos[order].copy()
        order = np.argsort(lb.hole_labels)
        self.hlab = lb.hole_labels[order]
        self.hpos = lb.hole_pos[order].copy()

    def event(self, t, edge, action, row):
        if action != eng.ACT_SWAP:
            return
        for pos in (self.ppos, self.hpos):
            a = pos == edge
            b = pos == edge + 1
            pos[a] += 1
            pos[b] -= 1
        if np.any(np.diff(self.ppos) >= 0) or np.any(np.diff(self.hpos) <= 0):
            self.violations += 1

    def position(self, label) -> int:
        kind, j = label
        lab, pos = (self.plab, self.ppos) if kind == "X" else (self.hlab, self.hpos)
        hit = np.flatnonzero(lab == j)
        if hit.size == 0:
            raise KeyError(f"label {label} not assigned")
        return int(pos[hit[0]])

    def rows(self):
        out = [(f"X{j}", int(x)) for j, x in zip(self.plab, self.ppos)]
        return out + [(f"H{i}", int(x)) for i, x in zip(self.hlab, self.hpos)]


# -- output ----------------------------------------------------------------------------

def write_rows(path, rows) -> None:
    """CSV with header (trial, name, value) from (trial, name, value) tuples."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "name", "value"])
        for trial, name, value in rows:
            w.writerow([trial, name, value])
