"""The invariant law of ASEP on a segment.

With s = q/p the stationary weight of a configuration with particle
positions x_1 < ... < x_k is (p/q)**(x_1 + ... + x_k).  Sums of these
weights over all placements are Gaussian binomials, which gives both the
normalizer and an exact right-to-left sampler.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .config import SegmentConfig, ConfigError
from .rng import STREAM_SAMPLE, split_seed, uniform_pair


def _check(b: int, a: int, k: int):
    if a > b:
        raise ConfigError(f"empty segment [{a};{b}]")
    if not 0 <= k <= b - a + 1:
        raise ConfigError(f"k={k} out of range for [{a};{b}]")


def _log_s(p: float) -> float:
    if not 0.5 < p <= 1.0:
        raise ValueError(f"p must lie in (1/2, 1], got {p}")
    return -math.inf if p == 1.0 else math.log((1.0 - p) / p)


def _log1m_sexp(j, log_s):
    # log(1 - s**j) for j >= 1, stable when s is close to 1
    if log_s == -math.inf:
        return np.zeros_like(np.asarray(j, dtype=float))
    return np.log(-np.expm1(np.asarray(j, dtype=float) * log_s))


def log_gaussian_binomial(n: int, k: int, p: float) -> float:
    """log of the Gaussian binomial [n choose k]_s with s = q/p."""
    if not 0 <= k <= n:
        return -math.inf
    k = min(k, n - k)
    if k == 0:
        return 0.0
    log_s = _log_s(p)
    i = np.arange(1, k + 1)
    return float(np.sum(_log1m_sexp(n - k + i, log_s) - _log1m_sexp(i, log_s)))


def stationary_log_weight(xi: SegmentConfig, p: float) -> float:
    """Unnormalized log-weight (sum of positions) * log(p/q)."""
    log_s = _log_s(p)
    if log_s == -math.inf:
        raise ValueError("p = 1 has a degenerate invariant law (point mass at xi_max)")
    return float(xi.positions().sum()) * -log_s


def log_normalizer(b: int, a: int, k: int, p: float) -> float:
    """log of the sum of (p/q)**(sum of positions) over all placements."""
    _check(b, a, k)
    n = b - a + 1
    log_r = -_log_s(p)
    # placements in [1; n] sum to r**(k(k+1)/2 + k(n-k)) [n k]_s; shift by a-1
    return (k * (a - 1) + k * (k + 1) / 2 + k * (n - k)) * log_r + log_gaussian_binomial(n, k, p)


def stationary_prob(xi: SegmentConfig, p: float) -> float:
    return math.exp(stationary_log_weight(xi, p) - log_normalizer(xi.b, xi.a, xi.k, p))


@dataclass(frozen=True)
class StationaryLaw:
    b: int
    a: int
    k: int
    p: float

    def __post_init__(self):
        _check(self.b, self.a, self.k)

    @property
    def log_Z(self) -> float:
        return log_normalizer(self.b, self.a, self.k, self.p)

    def log_prob(self, xi: SegmentConfig) -> float:
        if (xi.a, xi.b, xi.k) != (self.a, self.b, self.k):
            raise ConfigError("configuration not in this state space")
        return stationary_log_weight(xi, self.p) - self.log_Z

    def sample(self, count: int, seed: int, offset: int = 0) -> np.ndarray:
        return sample_stationary_array(self.b, self.a, self.k, self.p, count, seed, offset)


@nb.njit(cache=True)
def _sample_rows(n, k, log_s, count, k0, k1, offset, out):
    # out[m] = occupancy of sample m on sites 0..n-1 (relative to a)
    for m in range(count):
        j = n            # sites 1..j still open (1-based, relative)
        for r in range(k):
            rem = k - r
            u, _ = uniform_pair(k0, k1, offset + m, 1, r, 0)
            # gap g >= 0 below the current top: survival
            #   S(g) = prod_{i<g} (s**rem - s**(j-i)) / (1 - s**(j-i))
            surv = 1.0
            g = 0
            while True:
                L = j - g
                if L == rem:
                    break
                if log_s == -np.inf:
                    step = 0.0
                else:
                    step = (np.exp(rem * log_s) - np.exp(L * log_s)) / (-np.expm1(L * log_s))
                nxt = surv * step
                if u >= nxt:
                    break
                surv = nxt
                g += 1
            pos = j - g
            out[m, pos - 1] = 1
            j = pos - 1


def sample_stationary_array(b, a, k, p, count, seed, offset=0) -> np.ndarray:
    """``count`` exact samples as an int8 array (count, b-a+1)."""
    _check(b, a, k)
    if count < 0:
        raise ValueError("count must be nonnegative")
    k0, k1 = split_seed(seed)
    out = np.zeros((int(count), b - a + 1), dtype=np.int8)
    _sample_rows(b - a + 1, k, _log_s(p), int(count), k0, k1, int(offset), out)
    return out


def sample_stationary(b: int, a: int, k: int, p: float, seed: int, index: int = 0) -> SegmentConfig:
    """One exact draw; sample ``index`` of the stream keyed by ``seed``."""
    row = sample_stationary_array(b, a, k, p, 1, seed, index)[0]
    return SegmentConfig(a, b, row)


def leftmost_tail(b: int, a: int, k: int, x: int, p: float) -> float:
    """P(leftmost particle >= x) = W(all k particles in [x; b]) / W(all)."""
    _check(b, a, k)
    if k == 0 or x <= a:
        return 1.0
    if b - x + 1 < k:
        return 0.0
    return math.exp(log_normalizer(b, x, k, p) - log_normalizer(b, a, k, p))


def stationary_event_A(b: int, a: int, k: int, l: int, p: float, method: str = "exact",
                       samples: int = 10**6, seed: int = 0):
    """pi(A(l)) with A(l) = {leftmost particle < b - k - l}.

    ``exact`` uses the closed form, ``enumerate`` sums over the state space
    (small instances), ``mc`` averages exact samples and returns
    (estimate, (lo, hi)) with a 95% Wilson interval.
    """
    if l < 0:
        raise ValueError("l must be nonnegative")
    _check(b, a, k)
    x = b - k - l
    if method == "exact":
        if k == 0 or x <= a:
            return 0.0
        d = log_normalizer(b, x, k, p) - log_normalizer(b, a, k, p)
        return float(-np.expm1(d))
    if method == "enumerate":
        from itertools import combinations
        n = b - a + 1
        if math.comb(n, k) > 2 * 10**6:
            raise ValueError("state space too large to enumerate")
        log_Z = log_normalizer(b, a, k, p)
        log_r = -_log_s(p)
        tot = 0.0
        for c in combinations(range(a, b + 1), k):
            if c and c[0] < x:
                tot += math.exp(sum(c) * log_r - log_Z)
        return tot
    if method == "mc":
        from .stats import wilson
        rows = sample_stationary_array(b, a, k, p, samples, seed)
        first = np.argmax(rows == 1, axis=1) + a
        hits = int(np.count_nonzero(first < x)) if k else 0
        return hits / samples, wilson(hits, samples)
    raise ValueError(f"unknown method {method!r}")
