"""Configurations on segments and on the line, plus the static constructions
built from an initial condition (extensions, labels, heights, duality).

Site values: 0 = hole, 1 = (first class) particle, 2 = second class particle.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

EMPTY, FULL, SECOND = 0, 1, 2
NEG_INF = -math.inf
POS_INF = math.inf

_FILL_CHARS = {"E": EMPTY, "F": FULL, "S": SECOND}
_FILL_NAMES = {v: k for k, v in _FILL_CHARS.items()}


class ConfigError(ValueError):
    pass


def _frozen(values, dtype=np.int8) -> np.ndarray:
    arr = np.array(values, dtype=dtype).ravel()
    arr.flags.writeable = False
    return arr


class SegmentConfig:
    """Occupancy of the segment [a; b]."""

    __slots__ = ("a", "b", "occ", "k")

    def __init__(self, a: int, b: int, occ):
        a, b = int(a), int(b)
        occ = _frozen(occ)
        if a > b:
            raise ConfigError(f"empty segment [{a};{b}]")
        if occ.size != b - a + 1:
            raise ConfigError(f"occupancy has {occ.size} sites, segment [{a};{b}] has {b - a + 1}")
        if np.any((occ != 0) & (occ != 1)):
            raise ConfigError("segment occupancy must be 0/1")
        self.a, self.b, self.occ = a, b, occ
        self.k = int(occ.sum())

    @classmethod
    def from_positions(cls, a: int, b: int, positions) -> "SegmentConfig":
        occ = np.zeros(b - a + 1, dtype=np.int8)
        pos = np.asarray(list(positions), dtype=np.int64)
        if pos.size:
            if pos.min() < a or pos.max() > b:
                raise ConfigError("position outside segment")
            if np.unique(pos).size != pos.size:
                raise ConfigError("positions must be distinct")
            occ[pos - a] = 1
        return cls(a, b, occ)

    @classmethod
    def parse(cls, text: str) -> "SegmentConfig":
        """Parse ``"110 @ a=1"`` (the ``@ a=..`` part defaults to a=1)."""
        m = re.fullmatch(r"\s*([01]+)\s*(?:@\s*a\s*=\s*(-?\d+))?\s*", text)
        if not m:
            raise ConfigError(f"bad segment literal {text!r}")
        bits = [int(ch) for ch in m.group(1)]
        a = int(m.group(2)) if m.group(2) is not None else 1
        return cls(a, a + len(bits) - 1, bits)

    @property
    def n_sites(self) -> int:
        return self.b - self.a + 1

    def positions(self) -> np.ndarray:
        return np.flatnonzero(self.occ) + self.a

    def __getitem__(self, i: int) -> int:
        if not self.a <= i <= self.b:
            raise IndexError(i)
        return int(self.occ[i - self.a])

    def __eq__(self, other):
        return (isinstance(other, SegmentConfig) and self.a == other.a
                and self.b == other.b and np.array_equal(self.occ, other.occ))

    def __hash__(self):
        return hash((self.a, self.b, self.occ.tobytes()))

    def literal(self) -> str:
        return "".join(str(int(v)) for v in self.occ) + f" @ a={self.a}"

    def __repr__(self):
        return f"SegmentConfig({self.literal()!r})"


class LineConfig:
    """Configuration on Z: left fill, a finite window, right fill.

    Sites ``i < window_lo`` carry ``left_fill`` and sites ``i > window_hi``
    carry ``right_fill``.  An empty window (``window_hi = window_lo - 1``)
    still anchors where the left fill stops.  ``left_wall`` optionally
    removes all sites below it (a half-line with a closed boundary); the
    window then starts exactly at the wall.
    """

    __slots__ = ("left_fill", "window_lo", "occ", "right_fill", "left_wall")

    def __init__(self, left_fill: int, window_lo: int, occ, right_fill: int,
                 left_wall: int | None = None, tighten: bool = True):
        occ = np.array(occ, dtype=np.int8).ravel()
        if left_fill not in (0, 1, 2) or right_fill not in (0, 1, 2):
            raise ConfigError("fills must be 0, 1 or 2")
        if np.any((occ < 0) | (occ > 2)):
            raise ConfigError("site values must be 0, 1 or 2")
        window_lo = int(window_lo)
        if left_wall is not None:
            left_wall = int(left_wall)
            if window_lo < left_wall:
                occ = occ[left_wall - window_lo:]
                window_lo = left_wall
            elif window_lo > left_wall:
                occ = np.concatenate([np.full(window_lo - left_wall, left_fill, np.int8), occ])
                window_lo = left_wall
        if tighten:
            lo = 0
            if left_wall is None:
                off = np.flatnonzero(occ != left_fill)
                lo = int(off[0]) if off.size else occ.size
            off = np.flatnonzero(occ[lo:] != right_fill)
            hi = lo + int(off[-1]) + 1 if off.size else lo
            if lo == hi and left_wall is None:
                # anchor of an empty window: first site carrying the right fill
                window_lo = window_lo + lo
                occ = occ[:0]
            else:
                occ = occ[lo:hi]
                window_lo += lo
        self.left_fill = int(left_fill)
        self.right_fill = int(right_fill)
        self.window_lo = window_lo
        self.occ = _frozen(occ)
        self.left_wall = left_wall

    @property
    def window_hi(self) -> int:
        return self.window_lo + self.occ.size - 1

    @property
    def species(self) -> bool:
        return bool(np.any(self.occ == 2)) or 2 in (self.left_fill, self.right_fill)

    @classmethod
    def parse(cls, text: str) -> "LineConfig":
        """Parse ``"E|110|F"`` or ``"E|110|F@-3"``; fills are E, F or S (=2)."""
        m = re.fullmatch(r"\s*([EFS])\|([012]*)\|([EFS])\s*(?:@\s*(-?\d+))?\s*", text)
        if not m:
            raise ConfigError(f"bad line literal {text!r}")
        lo = int(m.group(4)) if m.group(4) is not None else 1
        return cls(_FILL_CHARS[m.group(1)], lo, [int(c) for c in m.group(2)],
                   _FILL_CHARS[m.group(3)])

    def literal(self) -> str:
        body = "".join(str(int(v)) for v in self.occ)
        wall = "" if self.left_wall is None else f" wall={self.left_wall}"
        return f"{_FILL_NAMES[self.left_fill]}|{body}|{_FILL_NAMES[self.right_fill]}@{self.window_lo}{wall}"

    def __repr__(self):
        return f"LineConfig({self.literal()!r})"

    def __getitem__(self, i: int) -> int:
        if self.left_wall is not None and i < self.left_wall:
            raise IndexError(f"site {i} lies beyond the wall at {self.left_wall}")
        if i < self.window_lo:
            return self.left_fill
        if i > self.window_hi:
            return self.right_fill
        return int(self.occ[i - self.window_lo])

    def values(self, lo: int, hi: int) -> np.ndarray:
        """Site values on [lo; hi] (fills outside the window)."""
        out = np.empty(max(hi - lo + 1, 0), dtype=np.int8)
        if out.size == 0:
            return out
        idx = np.arange(lo, hi + 1)
        out[idx < self.window_lo] = self.left_fill
        out[idx > self.window_hi] = self.right_fill
        inside = (idx >= self.window_lo) & (idx <= self.window_hi)
        out[inside] = self.occ[idx[inside] - self.window_lo]
        return out

    def _anchor(self):
        # a constant line has no meaningful window position
        if self.occ.size == 0 and self.left_fill == self.right_fill and self.left_wall is None:
            return None
        return self.window_lo

    def __eq__(self, other):
        return (isinstance(other, LineConfig) and self.left_fill == other.left_fill
                and self.right_fill == other.right_fill and self.left_wall == other.left_wall
                and self._anchor() == other._anchor() and np.array_equal(self.occ, other.occ))

    def __hash__(self):
        return hash((self.left_fill, self.right_fill, self._anchor(), self.left_wall,
                     self.occ.tobytes()))


# -- leftmost / rightmost ------------------------------------------------------

def _first_site(cfg, value: int, from_left: bool):
    if isinstance(cfg, SegmentConfig):
        hits = np.flatnonzero(cfg.occ == value)
        if hits.size == 0:
            return None
        return int(cfg.a + (hits[0] if from_left else hits[-1]))
    if from_left:
        if cfg.left_wall is None and cfg.left_fill == value:
            return NEG_INF
        hits = np.flatnonzero(cfg.occ == value)
        if hits.size:
            return int(cfg.window_lo + hits[0])
        if cfg.right_fill == value:
            return cfg.window_hi + 1
        return None
    if cfg.right_fill == value:
        return POS_INF
    hits = np.flatnonzero(cfg.occ == value)
    if hits.size:
        return int(cfg.window_lo + hits[-1])
    if cfg.left_wall is None and cfg.left_fill == value:
        return cfg.window_lo - 1
    return None


def leftmost(cfg):
    """Smallest occupied (value 1) site; None if absent, -inf under a full left fill."""
    return _first_site(cfg, FULL, True)


def rightmost_hole(cfg):
    """Largest empty site; None if absent, +inf under an empty right fill."""
    return _first_site(cfg, EMPTY, False)


def leftmost_second_class(cfg: LineConfig):
    return _first_site(cfg, SECOND, True)


# -- order ---------------------------------------------------------------------

def height_order_leq(zeta: LineConfig, eta: LineConfig) -> bool:
    """True iff zeta ⪯ eta, i.e. eta's particle counting function is
    everywhere at most zeta's (eta carries weakly more mass to the right)."""
    for cfg in (zeta, eta):
        if cfg.left_fill != EMPTY or cfg.left_wall is not None:
            raise ConfigError("⪯ needs configurations with an empty left fill")
        if cfg.species:
            raise ConfigError("⪯ is defined for 0/1 configurations")
    lo = min(zeta.window_lo, eta.window_lo)
    hi = max(zeta.window_hi, eta.window_hi, lo)
    cz = np.cumsum(zeta.values(lo, hi), dtype=np.int64)
    ce = np.cumsum(eta.values(lo, hi), dtype=np.int64)
    if np.any(ce > cz):
        return False
    # beyond hi the sums grow by the right fills
    return zeta.right_fill >= eta.right_fill


# -- constructions ------------------------------------------------------------

def xi_max(b: int, a: int, k: int) -> SegmentConfig:
    """Right-packed configuration 1_[b-k+1; b] on [a; b]."""
    if not 0 <= k <= b - a + 1:
        raise ConfigError(f"k={k} out of range for [{a};{b}]")
    occ = np.zeros(b - a + 1, dtype=np.int8)
    if k:
        occ[-k:] = 1
    return SegmentConfig(a, b, occ)


def width(N: float, exponent: float) -> int:
    """Integer site count floor(N**exponent)."""
    return int(math.floor(N ** exponent + 1e-12))


def _need(params, *names):
    missing = [n for n in names if params.get(n) is None]
    if missing:
        raise ConfigError(f"missing parameter(s): {', '.join(missing)}")
    return [params[n] for n in names]


def _periodic(pattern, lo, hi, phase_lo):
    idx = np.arange(lo, hi + 1) - phase_lo
    return np.asarray(pattern, dtype=np.int8)[idx % len(pattern)]


EXTENSION_KINDS = (
    "zeta", "zeta_max", "xi_bar", "eta1", "eta2", "eta3", "eta4", "xi_hat",
    "xi_prime", "xi_dprime", "zeta2", "pi_ext", "flat", "half_flat", "step",
    "reversed_step", "periodic",
)


def build_extension(kind: str, xi: SegmentConfig | None = None, **params) -> LineConfig:
    """Build a named configuration on Z from a segment configuration ``xi``.

    Parameters by kind:
      zeta, xi_bar, zeta2, pi_ext, zeta_max: only ``xi``
      eta1..eta4, xi_hat, xi_prime, xi_dprime: ``eta_inf`` (a LineConfig
        extending xi); eta1..eta4 also ``shift`` (or ``N`` and ``delta``,
        giving shift = floor(N**delta))
      flat, half_flat, periodic: ``reach`` (truncation half-width);
        periodic pastes xi with period b - a + 1
      step: optional ``at`` (last occupied site, default 0)
      reversed_step: ``Z``
    """
    if kind not in EXTENSION_KINDS:
        raise ConfigError(f"unknown extension kind {kind!r}")
    if kind in ("flat", "half_flat", "step", "reversed_step"):
        if kind == "step":
            at = int(params.get("at", 0))
            return LineConfig(FULL, at + 1, [], EMPTY)
        if kind == "reversed_step":
            (Z,) = _need(params, "Z")
            return LineConfig(EMPTY, int(Z), [], FULL)
        (reach,) = _need(params, "reach")
        reach = int(reach)
        lo = -reach
        hi = reach if kind == "flat" else 0
        return LineConfig(EMPTY, lo, _periodic([1, 0], lo, hi, 0), EMPTY)
    if xi is None:
        raise ConfigError(f"kind {kind!r} needs a segment configuration")
    a, b = xi.a, xi.b
    if kind in ("zeta", "pi_ext"):
        return LineConfig(EMPTY, a, xi.occ, FULL)
    if kind == "xi_bar":
        return LineConfig(EMPTY, a, xi.occ, EMPTY)
    if kind == "zeta_max":
        return LineConfig(EMPTY, b - xi.k + 1, [], FULL)
    if kind == "zeta2":
        return LineConfig(EMPTY, a, xi.occ, SECOND)
    if kind == "periodic":
        (reach,) = _need(params, "reach")
        lo, hi = a - int(reach), b + int(reach)
        return LineConfig(EMPTY, lo, _periodic(xi.occ, lo, hi, a), EMPTY)

    (eta_inf,) = _need(params, "eta_inf")
    if not np.array_equal(eta_inf.values(a, b), xi.occ):
        raise ConfigError("eta_inf does not extend xi on [a; b]")
    if kind == "xi_hat":
        lo = min(eta_inf.window_lo, a)
        hi = max(eta_inf.window_hi, b)
        vals = eta_inf.values(lo, hi)
        vals[: a - lo] = 0
        return LineConfig(EMPTY, lo, vals, eta_inf.right_fill)
    if kind in ("xi_prime", "xi_dprime"):
        lo = min(eta_inf.window_lo, a)
        vals = eta_inf.values(lo, b)
        if kind == "xi_dprime":
            vals[: a - lo] = 1
            return LineConfig(FULL, lo, vals, FULL)
        return LineConfig(eta_inf.left_fill, lo, vals, FULL)

    shift = params.get("shift")
    if shift is None:
        N, delta = _need(params, "N", "delta")
        shift = width(N, delta)
    w = int(shift)
    hi_src = max(eta_inf.window_hi, b)
    if kind == "eta1":
        tail = eta_inf.values(b + 1, hi_src)
        vals = np.concatenate([xi.occ, np.zeros(w, np.int8), tail])
        return LineConfig(EMPTY, a, vals, eta_inf.right_fill, left_wall=a)
    shifted = eta_inf.values(a, hi_src)          # eta_inf(i - w) for i in [a + w; hi + w]
    if kind == "eta2":
        vals = np.concatenate([np.zeros(w, np.int8), shifted])
        return LineConfig(EMPTY, a, vals, eta_inf.right_fill, left_wall=a)
    if kind == "eta3":
        vals = np.concatenate([np.zeros(w, np.int8), shifted])
        return LineConfig(EMPTY, a, vals, eta_inf.right_fill)
    # eta4: eta_inf shifted right by w
    return LineConfig(eta_inf.left_fill, eta_inf.window_lo + w, eta_inf.occ,
                      eta_inf.right_fill, tighten=False)


_DUAL_VALUE = np.array([1, 0, 2], dtype=np.int8)


def reflect_dual(mu: LineConfig, b: int) -> LineConfig:
    """Particle-hole flip, spatial reflection, shift by b+1:
    mu~(j) = 1 - mu(b + 1 - j); second class particles stay put in value."""
    if mu.left_wall is not None:
        raise ConfigError("reflect_dual needs a configuration on all of Z")
    lo = b + 1 - mu.window_hi
    vals = _DUAL_VALUE[mu.occ[::-1]]
    return LineConfig(int(_DUAL_VALUE[mu.right_fill]), lo, vals,
                      int(_DUAL_VALUE[mu.left_fill]))


def reflect_dual_segment(xi: SegmentConfig, b: int | None = None) -> SegmentConfig:
    b = xi.b if b is None else b
    return SegmentConfig(b + 1 - xi.b, b + 1 - xi.a, 1 - xi.occ[::-1])


# -- labels ---------------------------------------------------------------------

@dataclass(frozen=True)
class LabelTracking:
    """Label -> position maps for particles (X_j) and holes (H_i)."""
    particle_labels: np.ndarray
    particle_pos: np.ndarray
    hole_labels: np.ndarray
    hole_pos: np.ndarray
    anchor: tuple[int, int]

    def particle(self, j: int) -> int:
        hit = np.flatnonzero(self.particle_labels == j)
        if hit.size == 0:
            raise KeyError(f"particle label {j} not assigned")
        return int(self.particle_pos[hit[0]])

    def hole(self, i: int) -> int:
        hit = np.flatnonzero(self.hole_labels == i)
        if hit.size == 0:
            raise KeyError(f"hole label {i} not assigned")
        return int(self.hole_pos[hit[0]])


def labels_from_anchors(eta: LineConfig, particle_anchor, hole_anchor,
                        lo: int | None = None, hi: int | None = None) -> LabelTracking:
    """Label particles leftward-increasing from ``(label, site)`` and holes
    rightward-increasing from ``(label, site)`` over sites [lo; hi]."""
    pad = max(eta.occ.size, 8)
    lo = eta.window_lo - pad if lo is None else lo
    hi = eta.window_hi + pad if hi is None else hi
    if eta.left_wall is not None:
        lo = max(lo, eta.left_wall)
    vals = eta.values(lo, hi)
    sites = np.arange(lo, hi + 1)
    ppos = sites[vals == 1][::-1]            # right to left
    hpos = sites[vals == 0]                   # left to right
    pl = np.empty(0, np.int64)
    hl = np.empty(0, np.int64)
    if particle_anchor is not None:
        lab, site = particle_anchor
        idx = np.flatnonzero(ppos == site)
        if idx.size == 0:
            raise ConfigError(f"no particle at anchor site {site}")
        pl = lab + np.arange(ppos.size) - idx[0]
    else:
        ppos = ppos[:0]
    if hole_anchor is not None:
        lab, site = hole_anchor
        idx = np.flatnonzero(hpos == site)
        if idx.size == 0:
            raise ConfigError(f"no hole at anchor site {site}")
        hl = lab + np.arange(hpos.size) - idx[0]
    else:
        hpos = hpos[:0]
    anchor = (int(particle_anchor[0]) if particle_anchor else 0,
              int(hole_anchor[0]) if hole_anchor else 0)
    return LabelTracking(pl.astype(np.int64), ppos.astype(np.int64),
                         hl.astype(np.int64), hpos.astype(np.int64), anchor)


def assign_labels(eta: LineConfig, b: int, k: int, a: int = 1,
                  lo: int | None = None, hi: int | None = None) -> LabelTracking:
    """Particle label k at the leftmost particle of eta on [a; b], hole label
    b - k at the rightmost hole there."""
    xi = eta.values(a, b)
    if xi.sum() != k:
        raise ConfigError("eta does not carry k particles on [a; b]")
    if k == 0 or k == b - a + 1:
        raise ConfigError("no anchor: xi is empty or full")
    left = a + int(np.flatnonzero(xi == 1)[0])
    right = a + int(np.flatnonzero(xi == 0)[-1])
    pad = b - a + 1
    lo = min(a, eta.window_lo) - pad if lo is None else lo
    hi = max(b, eta.window_hi) + pad if hi is None else hi
    return labels_from_anchors(eta, (k, left), (b - k, right), lo, hi)


# -- heights --------------------------------------------------------------------

@dataclass(frozen=True)
class HeightFn:
    """h0 with h0(0)=0 and eta(x) = h0(x-1) - h0(x), stored on [lo-1; hi]
    with affine tails (slope -fill)."""
    lo: int
    values: np.ndarray          # h0 on [lo - 1; hi]
    left_fill: int
    right_fill: int

    @property
    def hi(self) -> int:
        return self.lo + self.values.size - 2

    def __call__(self, x):
        x = np.asarray(x, dtype=np.int64)
        out = np.empty(x.shape, dtype=np.int64)
        left = x < self.lo - 1
        right = x > self.hi
        mid = ~(left | right)
        out[mid] = self.values[x[mid] - (self.lo - 1)]
        out[left] = self.values[0] + self.left_fill * (self.lo - 1 - x[left])
        out[right] = self.values[-1] - self.right_fill * (x[right] - self.hi)
        return out if out.ndim else int(out)


def height_from_config(eta: LineConfig) -> HeightFn:
    if eta.species:
        raise ConfigError("height functions are defined for 0/1 configurations")
    lo = min(eta.window_lo, 1)
    hi = max(eta.window_hi, 0)
    occ = eta.values(lo, hi).astype(np.int64)
    # g(x) = -sum_{i=lo}^{x} occ(i) on [lo-1; hi], then re-anchor at 0
    g = np.concatenate([[0], -np.cumsum(occ)])
    g -= g[0 - (lo - 1)]
    return HeightFn(lo, g, eta.left_fill, eta.right_fill)


def config_from_height(h: HeightFn) -> LineConfig:
    occ = h.values[:-1] - h.values[1:]
    return LineConfig(h.left_fill, h.lo, occ, h.right_fill)
