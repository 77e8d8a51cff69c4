"""Two-sample tests, histogram distances, and error bars.

The bridge-equality claims are statistical at the path level, so the
comparisons here all emit a self-describing TestReport that can be
reproduced from its seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import kolmogorov

INV_MARGINAL_KS = "bridge-marginal-ks"
INV_PATH_ENERGY = "bridge-path-energy"
INV_HISTOGRAM_TV = "histogram-tv"


class InsufficientSampleError(ValueError):
    pass


class GridMismatchError(ValueError):
    pass


class EmptyBinWindowError(ValueError):
    pass


class DegenerateSampleError(ValueError):
    pass


@dataclass(frozen=True)
class TestReport:
    """Outcome of a two-sample comparison, reproducible from its seed."""

    method: str
    statistic: float
    p_value: float
    n_a: int
    n_b: int
    seed: Optional[int] = None

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


def ks_two_sample(a, b, seed=None) -> TestReport:
    """Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.

    Uses the small-sample effective-size correction
    (sqrt(ne) + 0.12 + 0.11 / sqrt(ne)) before evaluating the
    Kolmogorov survival function.
    """
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    n_a, n_b = a.size, b.size
    if n_a < 50 or n_b < 50:
        raise InsufficientSampleError(f"need at least 50 samples, got {n_a}, {n_b}")
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / n_a
    cdf_b = np.searchsorted(b, pooled, side="right") / n_b
    d = float(np.abs(cdf_a - cdf_b).max())
    en = math.sqrt(n_a * n_b / (n_a + n_b))
    p = float(kolmogorov((en + 0.12 + 0.11 / en) * d))
    return TestReport(method="ks", statistic=d, p_value=min(1.0, p),
                      n_a=n_a, n_b=n_b, seed=seed)


def ks_statistic_vs_cdf(samples, cdf_values_sorted):
    """One-sample KS distance of sorted-sample CDF values against U(0,1).

    `cdf_values_sorted` are F(x_(i)) for the order statistics; this is
    the plug-in distance used by the sampler-consistency checks.
    """
    u = np.asarray(cdf_values_sorted, dtype=float)
    n = u.size
    i = np.arange(1, n + 1)
    return float(np.maximum(i / n - u, u - (i - 1) / n).max())


def _energy_sums(pooled, labels, block=1024):
    """Row-blocked accumulation of M = D @ Z and row sums of D.

    D is the pooled pairwise distance matrix; it is never materialized,
    so pools of 10^4 paths stay inside a few hundred MB.  Distances are
    accumulated in float32 blocks, which perturbs the statistic at
    relative 1e-6, far below the permutation resolution.
    """
    n = pooled.shape[0]
    Z = labels.astype(np.float32)
    M = np.zeros((n, Z.shape[1]), dtype=np.float64)
    rowsum = np.zeros(n, dtype=np.float64)
    pooled32 = pooled.astype(np.float32)
    for start in range(0, n, block):
        stop = min(start + block, n)
        d_blk = cdist(pooled32[start:stop], pooled32).astype(np.float32)
        M[start:stop] = d_blk @ Z
        rowsum[start:stop] = d_blk.sum(axis=1, dtype=np.float64)
    return M, rowsum


def energy_distance_test(paths_a, paths_b, n_permutations, rng,
                         seed=None) -> TestReport:
    """Permutation test on the energy distance between two path pools.

    Paths are grid-value vectors and must share the grid.  All
    permutation statistics reuse one pass over the pooled distance
    matrix: with labels z, the between-group sum is z' D (1 - z), so
    only D @ Z is needed.
    """
    a = np.atleast_2d(np.asarray(paths_a, dtype=float))
    b = np.atleast_2d(np.asarray(paths_b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise GridMismatchError(f"grids differ: {a.shape[1]} vs {b.shape[1]} points")
    if n_permutations < 200:
        raise ValueError("need at least 200 permutations")
    n_a, n_b = a.shape[0], b.shape[0]
    n = n_a + n_b
    pooled = np.vstack([a, b])

    labels = np.zeros((n, n_permutations + 1), dtype=np.float32)
    labels[:n_a, 0] = 1.0
    for k in range(1, n_permutations + 1):
        labels[rng.permutation(n)[:n_a], k] = 1.0

    M, rowsum = _energy_sums(pooled, labels)
    within_a = np.einsum("ik,ik->k", labels, M)
    a_row = labels.T @ rowsum
    between = a_row - within_a
    total = rowsum.sum()
    within_b = total - within_a - 2.0 * between
    stats = (2.0 * between / (n_a * n_b) - within_a / (n_a * n_a)
             - within_b / (n_b * n_b))
    observed = float(stats[0])
    p = float((1 + np.sum(stats[1:] >= observed)) / (1 + n_permutations))
    return TestReport(method="energy", statistic=observed, p_value=p,
                      n_a=n_a, n_b=n_b, seed=seed)


def histogram_tv(samples, density, bins, support_window):
    """Total-variation distance between binned empirical frequencies and
    the density mass per bin.

    Mass outside the window is compared as one extra cell, so the
    result is a genuine TV distance over the partition.  The density
    is integrated per bin with Simpson's rule on 33 nodes.
    """
    if bins < 10:
        raise ValueError("need at least 10 bins")
    lo, hi = support_window
    if not lo < hi:
        raise EmptyBinWindowError(f"empty window ({lo}, {hi})")
    samples = np.asarray(samples, dtype=float)
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(samples, bins=edges)
    inside = counts.sum()
    emp = np.concatenate([counts / samples.size,
                          [(samples.size - inside) / samples.size]])
    if inside == 0:
        raise EmptyBinWindowError("no samples fall inside the window")

    theo = np.empty(bins + 1)
    for i in range(bins):
        xs = np.linspace(edges[i], edges[i + 1], 33)
        h = xs[1] - xs[0]
        w = np.full(33, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        theo[i] = float(np.dot(w, density(xs)) * h / 3.0)
    theo[-1] = max(0.0, 1.0 - theo[:-1].sum())
    return 0.5 * float(np.abs(emp - theo).sum())


def mc_mean_with_se(samples):
    """Sample mean and its standard error sqrt(var / n)."""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        raise DegenerateSampleError("need at least two samples")
    return float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(samples.size))
