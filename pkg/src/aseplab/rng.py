"""Counter-based random numbers (Philox4x32-10) and the per-edge clock field.

Every random quantity in the simulator is a pure function of
``(master_seed, trial, stream, edge, index)``.  Two processes that share a
:class:`ClockField` therefore see literally the same Poisson clocks and
coins, which is what the basic coupling needs, and replays are exact.
"""
from __future__ import annotations

import math

import numba as nb
import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S21 = np.uint64(21)
_INV53 = 1.0 / 9007199254740992.0

STREAM_CLOCK = 0
STREAM_SAMPLE = 1
STREAM_AUX = 2


@nb.njit(cache=True, inline="always")
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32 with 10 rounds; all arguments are uint64 holding 32-bit words."""
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        n0 = ((p1 >> _S32) ^ c1 ^ k0) & _MASK
        n1 = p1 & _MASK
        n2 = ((p0 >> _S32) ^ c3 ^ k1) & _MASK
        n3 = p0 & _MASK
        c0, c1, c2, c3 = n0, n1, n2, n3
        k0 = (k0 + _W0) & _MASK
        k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


@nb.njit(cache=True, inline="always")
def _u53(hi, lo):
    # 53-bit uniform on [0, 1) from two 32-bit words
    return float(((hi << _S21) ^ lo) & np.uint64(0x1FFFFFFFFFFFFF)) * _INV53


@nb.njit(cache=True)
def uniform_pair(k0, k1, trial, stream, edge, index):
    """Two independent U[0,1) variates for one counter value."""
    c0 = np.uint64(index) & _MASK
    c1 = np.uint64(edge & 0xFFFFFFFF)
    c2 = np.uint64(trial) & _MASK
    c3 = np.uint64(stream) & _MASK
    r0, r1, r2, r3 = philox4x32(c0, c1, c2, c3, k0, k1)
    return _u53(r0, r1), _u53(r2, r3)


@nb.njit(cache=True)
def clock_draw(k0, k1, trial, edge, index, rate):
    """(exponential(rate) inter-arrival, coin) for event ``index`` on ``edge``."""
    u, coin = uniform_pair(k0, k1, trial, STREAM_CLOCK, edge, index)
    return -math.log1p(-u) / rate, coin


def split_seed(seed: int) -> tuple[np.uint64, np.uint64]:
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return np.uint64(seed & 0xFFFFFFFF), np.uint64(seed >> 32)


GAUGES = ("basic", "literal")


class ClockField:
    """Per-edge Poisson event streams plus uniform coins, derived from a seed.

    Two realizations of the same marginal dynamics are available.

    ``gauge="basic"`` (default): clocks ring at rate 1; a coin below p sorts
    the pair (higher rank to the right), otherwise it anti-sorts.  This is
    the two-clock basic coupling (right clocks at rate p, left clocks at
    rate q).  After a ring the pair only depends on its contents, so it
    preserves the height order and makes coupled copies coalesce.

    ``gauge="literal"``: clocks ring at rate p; a decreasing pair always
    swaps, an increasing pair swaps iff the coin is below Q = q/p.  A
    successful coin transposes the pair in every copy, which keeps the
    pointwise order but can reverse the height order of two copies.

    ``edge_sign`` and ``edge_shift`` transport the field: the stream used on
    lattice edge ``z`` is the one stored under ``edge_sign * z + edge_shift``.
    With sign -1 and shift b this is the clock field seen by the
    particle-hole reflected process.
    """

    def __init__(self, seed: int, p: float, trial: int = 0,
                 edge_sign: int = 1, edge_shift: int = 0, gauge: str = "basic"):
        if not 0.5 < p <= 1.0:
            raise ValueError(f"p must lie in (1/2, 1], got {p}")
        if edge_sign not in (1, -1):
            raise ValueError("edge_sign must be +1 or -1")
        if gauge not in GAUGES:
            raise ValueError(f"gauge must be one of {GAUGES}, got {gauge!r}")
        self.gauge = gauge
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.p = float(p)
        self.trial = int(trial)
        self.edge_sign = int(edge_sign)
        self.edge_shift = int(edge_shift)
        self.key = split_seed(self.seed)

    def __repr__(self):
        return (f"ClockField(seed={self.seed}, p={self.p}, trial={self.trial}, "
                f"edge_sign={self.edge_sign}, edge_shift={self.edge_shift}, "
                f"gauge={self.gauge!r})")

    @property
    def rate(self) -> float:
        """Ring rate of a single edge clock."""
        return 1.0 if self.gauge == "basic" else self.p

    @property
    def rule(self) -> np.ndarray:
        """Coin cuts (down, up_lo, up_hi): a decreasing pair swaps iff
        coin < down, an increasing one iff up_lo <= coin < up_hi."""
        if self.gauge == "basic":
            return np.array([self.p, self.p, 1.0])
        return np.array([1.0, 0.0, (1.0 - self.p) / self.p])

    def for_trial(self, trial: int) -> "ClockField":
        return ClockField(self.seed, self.p, trial, self.edge_sign, self.edge_shift,
                          self.gauge)

    def transported(self, edge_sign: int, edge_shift: int) -> "ClockField":
        """Field seen through the lattice map z -> edge_sign * z + edge_shift."""
        return ClockField(self.seed, self.p, self.trial,
                          self.edge_sign * edge_sign,
                          self.edge_sign * edge_shift + self.edge_shift, self.gauge)

    def stream_edge(self, z: int) -> int:
        return self.edge_sign * int(z) + self.edge_shift

    def stream(self, z: int, count: int) -> tuple[np.ndarray, np.ndarray]:
        """First ``count`` (event time, coin) pairs on lattice edge ``z``."""
        return _stream(self.key[0], self.key[1], self.trial,
                       self.stream_edge(z), count, self.rate)

    def event(self, z: int, n: int) -> tuple[float, float]:
        times, coins = self.stream(z, n + 1)
        return float(times[n]), float(coins[n])


@nb.njit(cache=True)
def _stream(k0, k1, trial, edge, count, rate):
    times = np.empty(count)
    coins = np.empty(count)
    t = 0.0
    for n in range(count):
        dt, c = clock_draw(k0, k1, trial, edge, n, rate)
        t += dt
        times[n] = t
        coins[n] = c
    return times, coins


@nb.njit(cache=True)
def uniforms(k0, k1, trial, stream, edge, count):
    """``2 * count`` uniforms from consecutive counters; used by samplers."""
    out = np.empty(2 * count)
    for n in range(count):
        a, b = uniform_pair(k0, k1, trial, stream, edge, n)
        out[2 * n] = a
        out[2 * n + 1] = b
    return out


def philox_words(counter, key) -> tuple[int, int, int, int]:
    """Raw Philox4x32-10 output; exposed for known-answer tests."""
    c = [np.uint64(int(x) & 0xFFFFFFFF) for x in counter]
    k = [np.uint64(int(x) & 0xFFFFFFFF) for x in key]
    return tuple(int(w) for w in philox4x32(c[0], c[1], c[2], c[3], k[0], k[1]))
