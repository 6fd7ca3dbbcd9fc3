"""Exact computations for ASEP on a small segment: transient laws by
uniformization, a dense matrix exponential check, the stationary vector,
total variation, and first passage to the right-packed state."""
from __future__ import annotations

import math

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import gammaln
from scipy.stats import poisson

from .config import ConfigError, SegmentConfig, xi_max
from .stationary import log_normalizer

MAX_STATES = 10**6
MAX_DENSE = 3000


class StateSpace:
    """All placements of k particles on [a; b], ranked colexicographically."""

    def __init__(self, b: int, a: int, k: int, p: float):
        n = b - a + 1
        if not 0 <= k <= n:
            raise ConfigError(f"k={k} out of range for [{a};{b}]")
        if not 0.5 < p <= 1.0:
            raise ValueError(f"p must lie in (1/2, 1], got {p}")
        size = math.comb(n, k)
        if size > MAX_STATES:
            raise ValueError(f"state space has {size} states (limit {MAX_STATES})")
        self.a, self.b, self.k, self.n, self.p = a, b, k, n, float(p)
        self.size = size
        self._binom = np.array([[math.comb(i, j) for j in range(k + 2)] for i in range(n + 1)],
                               dtype=np.int64)
        self.states = self._enumerate()
        self._G = None

    def _enumerate(self) -> np.ndarray:
        out = np.zeros((self.size, self.n), dtype=np.int8)
        for r in range(self.size):
            out[r, self.unrank_positions(r)] = 1
        return out

    def rank_positions(self, pos) -> int:
        # pos: sorted 0-based sites
        return int(sum(self._binom[c, i + 1] for i, c in enumerate(pos)))

    def unrank_positions(self, r: int) -> list[int]:
        pos = []
        c = self.n
        for i in range(self.k, 0, -1):
            c -= 1
            while self._binom[c, i] > r:
                c -= 1
            pos.append(c)
            r -= int(self._binom[c, i])
        return pos[::-1]

    def rank(self, xi: SegmentConfig) -> int:
        if (xi.a, xi.b, xi.k) != (self.a, self.b, self.k):
            raise ConfigError("configuration not in this state space")
        return self.rank_positions(np.flatnonzero(xi.occ))

    def rank_rows(self, rows: np.ndarray) -> np.ndarray:
        """Vectorized colex rank of occupancy rows (m, n)."""
        rows = np.asarray(rows, dtype=np.int64)
        cum = np.cumsum(rows, axis=1)                 # particle ordinal (1-based) at each site
        idx = np.where(rows == 1, cum, 0)
        sites = np.broadcast_to(np.arange(self.n), rows.shape)
        return (self._binom[sites, idx] * rows).sum(axis=1)

    def config(self, r: int) -> SegmentConfig:
        return SegmentConfig(self.a, self.b, self.states[r])

    @property
    def generator(self) -> sp.csr_matrix:
        """Off-diagonal p for a right swap, q for a left swap; zero row sums."""
        if self._G is None:
            S, n = self.states.shape
            src, dst, rate = [], [], []
            q = 1.0 - self.p
            for e in range(n - 1):
                u, v = self.states[:, e], self.states[:, e + 1]
                for mask, r in (((u == 1) & (v == 0), self.p), ((u == 0) & (v == 1), q)):
                    rows = np.flatnonzero(mask)
                    if rows.size == 0 or r == 0.0:
                        continue
                    moved = self.states[rows].copy()
                    moved[:, [e, e + 1]] = moved[:, [e + 1, e]]
                    src.append(rows)
                    dst.append(self.rank_rows(moved))
                    rate.append(np.full(rows.size, r))
            if src:
                src, dst, rate = map(np.concatenate, (src, dst, rate))
            else:
                src = dst = np.empty(0, np.int64)
                rate = np.empty(0)
            G = sp.coo_matrix((rate, (src, dst)), shape=(S, S)).tocsr()
            G = G - sp.diags(np.asarray(G.sum(axis=1)).ravel())
            self._G = G.tocsr()
        return self._G

    def closed_form(self) -> np.ndarray:
        """Stationary probabilities from the product formula."""
        if self.p == 1.0:
            v = np.zeros(self.size)
            v[self.rank(xi_max(self.b, self.a, self.k))] = 1.0
            return v
        sums = self.states.astype(np.int64) @ (np.arange(self.n) + self.a)
        log_r = math.log(self.p / (1.0 - self.p))
        return np.exp(sums * log_r - log_normalizer(self.b, self.a, self.k, self.p))


def _point(space: StateSpace, init: SegmentConfig) -> np.ndarray:
    v = np.zeros(space.size)
    v[space.rank(init)] = 1.0
    return v


def uniformize(G: sp.csr_matrix, v0: np.ndarray, t: float, tol: float) -> np.ndarray:
    """v0 exp(tG) with L1 truncation error at most ``tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if t < 0:
        raise ValueError("t must be nonnegative")
    lam = float(np.max(-G.diagonal())) if G.shape[0] else 0.0
    if t == 0 or lam == 0:
        return v0.copy()
    lt = lam * t
    lo = int(poisson.ppf(tol / 4, lt))
    hi = int(poisson.ppf(1 - tol / 4, lt)) + 1
    PT = (sp.identity(G.shape[0], format="csr") + G / lam).T.tocsr()
    v = v0.copy()
    out = np.zeros_like(v0)
    n = np.arange(lo, hi + 1)
    w = np.exp(-lt + n * math.log(lt) - gammaln(n + 1))
    for i in range(hi + 1):
        if i >= lo:
            out += w[i - lo] * v
        if i < hi:
            v = PT @ v
    return out


def distribution_at(space: StateSpace, init: SegmentConfig, t: float, tol: float = 1e-12):
    return uniformize(space.generator, _point(space, init), t, tol)


def distribution_expm(space: StateSpace, init: SegmentConfig, t: float) -> np.ndarray:
    """Second method: dense matrix exponential (small spaces only)."""
    if space.size > MAX_DENSE:
        raise ValueError(f"dense exponential limited to {MAX_DENSE} states")
    return _point(space, init) @ sla.expm(t * space.generator.toarray())


def stationary_vector(space: StateSpace) -> np.ndarray:
    """Normalized null vector of the transposed generator."""
    S = space.size
    if S == 1:
        return np.ones(1)
    A = space.generator.T.tolil()
    A[S - 1, :] = np.ones(S)
    rhs = np.zeros(S)
    rhs[-1] = 1.0
    if space.p == 1.0:
        # not irreducible; the law is the point mass at xi_max
        return space.closed_form()
    pi = spla.spsolve(A.tocsc(), rhs)
    return pi / pi.sum()


def exact_tv(space: StateSpace, init: SegmentConfig, t: float, tol: float = 1e-12) -> float:
    pt = distribution_at(space, init, t, tol)
    return 0.5 * float(np.abs(pt - space.closed_form()).sum())


def tv_curve(space: StateSpace, init: SegmentConfig, times, tol: float = 1e-12) -> np.ndarray:
    return np.array([exact_tv(space, init, float(t), tol) for t in times])


# -- first passage to xi_max ------------------------------------------------------

def _absorbing(space: StateSpace):
    G = space.generator.tolil(copy=True)
    target = space.rank(xi_max(space.b, space.a, space.k))
    G[target, :] = 0.0
    return G.tocsr(), target


def hitting_cdf(space: StateSpace, init: SegmentConfig, times, tol: float = 1e-12) -> np.ndarray:
    """P(g <= t) for the first passage g to xi_max, on a grid of times."""
    G, target = _absorbing(space)
    v0 = _point(space, init)
    return np.array([uniformize(G, v0, float(t), tol)[target] for t in times])


def hitting_mean(space: StateSpace, init: SegmentConfig) -> float:
    """E[g] by solving -G_TT m = 1 on the transient states."""
    G, target = _absorbing(space)
    i = space.rank(init)
    if i == target:
        return 0.0
    keep = np.flatnonzero(np.arange(space.size) != target)
    A = -G[keep][:, keep]
    m = spla.spsolve(A.tocsc(), np.ones(keep.size))
    return float(m[np.searchsorted(keep, i)])


# -- line configurations near a reversed step ----------------------------------------

def _inversions(bits) -> int:
    ones = 0
    inv = 0
    for v in bits:
        if v:
            ones += 1
        else:
            inv += ones
    return inv


def reversed_step_hitting_cdf(init, p: float, times, max_area: int = 24,
                              tol: float = 1e-12):
    """First passage of the line chain from ``init`` (0's to the left, 1's to
    the right) to the packed state 1_{> m}.

    The inversion count of the configuration is the area of a Young diagram;
    states of area up to ``max_area`` are enumerated and leaving that set is
    sent to a sink.  Returns (P(hit <= t), P(sink reached by t)), the second
    being an upper bound on the truncation error.
    """
    if init.left_fill != 0 or init.right_fill != 1 or init.species:
        raise ConfigError("need a 0/1 configuration with 0's left and 1's right")
    lo, hi = init.window_lo, init.window_hi
    k1 = int(np.count_nonzero(init.occ == 1))
    m = hi - k1
    A = int(max_area)
    wlo, whi = m - A - 1, m + A + 1
    start = tuple(int(v) for v in init.values(wlo, whi))
    if _inversions(start) > A:
        raise ValueError("initial area exceeds max_area")
    n = whi - wlo + 1
    index = {start: 0}
    order = [start]
    src, dst, rate = [], [], []
    SINK = -1
    q = 1.0 - p
    i = 0
    while i < len(order):
        s = order[i]
        area = _inversions(s)
        for e in range(n - 1):
            u, v = s[e], s[e + 1]
            if u == v:
                continue
            r = p if u == 1 else q
            if r == 0.0:
                continue
            t = list(s)
            t[e], t[e + 1] = v, u
            t = tuple(t)
            new_area = area - 1 if u == 1 else area + 1
            if new_area > A:
                j = SINK
            else:
                j = index.get(t)
                if j is None:
                    j = index[t] = len(order)
                    order.append(t)
            src.append(i)
            dst.append(j)
            rate.append(r)
        i += 1
    S = len(order)
    sink = S
    dst = [sink if j == SINK else j for j in dst]
    target = index.get(tuple([0] * (m - wlo + 1) + [1] * (whi - m)))
    G = sp.coo_matrix((rate, (src, dst)), shape=(S + 1, S + 1)).tocsr()
    G = (G - sp.diags(np.asarray(G.sum(axis=1)).ravel())).tolil()
    if target is not None:
        G[target, :] = 0.0
    G = G.tocsr()
    v0 = np.zeros(S + 1)
    v0[0] = 1.0
    hit, lost = [], []
    for t in times:
        v = uniformize(G, v0, float(t), tol)
        hit.append(v[target] if target is not None else 0.0)
        lost.append(v[sink])
    return np.array(hit), np.array(lost)
