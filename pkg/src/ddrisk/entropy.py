"""Binned discrete entropy estimation on the unit square.

A sample is reduced to bin counts under a :class:`~ddrisk.core.BinGrid`
and its entropy estimated as H = sum_b (c_b/m) * log(m/c_b). The gap to
the uniform baseline log(k^2) is the empirical entropy deficit used to
decide whether a distribution counts as "diverse enough". No bias
correction is applied by default; a Miller-Madow correction is available
for diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BinGrid, bin_indices

__all__ = ["BinnedHistogram", "binned_entropy", "entropy_gap", "histogram"]


@dataclass(frozen=True)
class BinnedHistogram:
    """Bin occupancy counts for a point sample.

    ``counts`` has one entry per bin (length k^2 when built from a grid)
    and sums to ``total``.
    """

    counts: np.ndarray
    total: int

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size == 0:
            raise ValueError("counts must be a non-empty 1-D array")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        total = int(counts.sum())
        if total != self.total:
            raise ValueError(f"counts sum to {total}, expected total={self.total}")
        if total < 1:
            raise ValueError("histogram must contain at least one point")
        counts = counts.copy()
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @property
    def n_bins(self) -> int:
        return int(self.counts.size)

    @property
    def occupied(self) -> int:
        return int(np.count_nonzero(self.counts))


def histogram(points: np.ndarray, grid: BinGrid) -> BinnedHistogram:
    """Count points per grid cell."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
        raise ValueError("points must be a non-empty (n, 2) array")
    idx = bin_indices(pts, grid)
    counts = np.bincount(idx, minlength=grid.total_bins)
    return BinnedHistogram(counts=counts, total=int(pts.shape[0]))


def binned_entropy(h: BinnedHistogram, miller_madow: bool = False) -> float:
    """Plug-in entropy of the histogram in nats.

    Computed as log(m) - sum_b c_b*log(c_b) / m over occupied bins, which
    equals sum_b (c_b/m)*log(m/c_b); empty bins contribute nothing. With
    ``miller_madow`` the first-order bias correction (occupied-1)/(2m)
    is added (diagnostic use only).
    """
    c = h.counts[h.counts > 0].astype(np.float64)
    m = float(h.total)
    # clamp: a single occupied bin cancels to -1ulp instead of exact zero
    ent = max(0.0, float(np.log(m) - np.dot(c, np.log(c)) / m))
    if miller_madow:
        ent += (h.occupied - 1) / (2.0 * m)
    return ent


def entropy_gap(h: BinnedHistogram, grid: BinGrid | None = None) -> float:
    """Entropy deficit relative to the uniform baseline, clamped at 0.

    The baseline is log of the number of bins: the grid's k^2 when a grid
    is given, otherwise the length of the histogram's count vector.
    """
    n_bins = grid.total_bins if grid is not None else h.n_bins
    if h.n_bins > n_bins:
        raise ValueError(f"histogram has {h.n_bins} bins, grid only {n_bins}")
    gap = float(np.log(n_bins)) - binned_entropy(h)
    return max(0.0, gap)
