"""Small statistical helpers shared by experiments and tests."""
from __future__ import annotations

import numpy as np
from scipy import stats as _st

Z95 = float(_st.norm.ppf(0.975))


def wilson(k, n, z: float = Z95):
    """Wilson score interval for a binomial proportion (vectorized)."""
    k = np.asarray(k, dtype=float)
    n = np.asarray(n, dtype=float)
    ph = np.where(n > 0, k / np.maximum(n, 1), 0.0)
    den = 1 + z * z / n
    mid = (ph + z * z / (2 * n)) / den
    half = z * np.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    lo, hi = np.clip(mid - half, 0, 1), np.clip(mid + half, 0, 1)
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


def ks_distance(sample, cdf, spacing: float | None = None) -> float:
    """sup |F_n - F| for a continuous reference ``cdf``.

    With ``spacing`` the sample is taken to live on a lattice of that step
    and F_n is compared with F at the midpoints between support points, the
    usual continuity correction for a discretized continuous law.
    """
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if spacing is None:
        F = np.asarray(cdf(x), dtype=float)
        i = np.arange(1, n + 1)
        return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
    pts = np.unique(x)
    above = np.searchsorted(x, pts, side="right") / n     # F_n at each support point
    below = np.searchsorted(x, pts, side="left") / n      # F_n just below it
    up = np.asarray(cdf(pts + spacing / 2), dtype=float)
    down = np.asarray(cdf(pts - spacing / 2), dtype=float)
    return float(max(np.max(np.abs(above - up)), np.max(np.abs(below - down))))


def ecdf(sample, grid):
    x = np.sort(np.asarray(sample, dtype=float))
    return np.searchsorted(x, grid, side="right") / max(x.size, 1)


def tv_from_counts(counts, probs) -> float:
    counts = np.asarray(counts, dtype=float)
    return 0.5 * float(np.abs(counts / counts.sum() - np.asarray(probs)).sum())


def bootstrap_tv(labels, probs, resamples: int = 1000, seed: int = 0, level: float = 0.95):
    """Percentile bootstrap for the TV distance between the empirical law of
    integer ``labels`` and the exact law ``probs``."""
    labels = np.asarray(labels)
    probs = np.asarray(probs, dtype=float)
    n = labels.size
    counts = np.bincount(labels, minlength=probs.size)
    est = tv_from_counts(counts, probs)
    rng = np.random.default_rng(seed)
    boot = rng.multinomial(n, counts / n, size=resamples)
    vals = 0.5 * np.abs(boot / n - probs).sum(axis=1)
    a = (1 - level) / 2
    return est, (float(np.quantile(vals, a)), float(np.quantile(vals, 1 - a)))


def bonferroni_z(m: int, level: float = 0.95) -> float:
    """Two-sided normal quantile for ``m`` simultaneous intervals."""
    return float(_st.norm.ppf(1 - (1 - level) / (2 * max(m, 1))))
