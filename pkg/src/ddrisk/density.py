"""Pluggable density estimators for training sets on the unit square.

Each estimator exposes a floored log-density and serializes to JSON for
exact replay. Kernel and mixture densities are renormalized by their
Gaussian mass inside the square (an exact per-component error-function
product for isotropic kernels), so every model integrates to 1 over the
domain. The density floor of 1e-12 is a numeric backstop only; the
quantile cap applied by the weighting stage is the real outlier control.
"""

from __future__ import annotations

import json
import math
from abc import ABC, abstractmethod

import numpy as np
from scipy.special import erf, logsumexp

from .core import BinGrid, Dataset, bin_indices, child_rng

__all__ = [
    "DENSITY_FLOOR",
    "DensityModel",
    "GmmDensity",
    "HistogramDensity",
    "KdeDensity",
    "fit_gmm",
    "fit_histogram",
    "fit_kde",
]

DENSITY_FLOOR = 1e-12
_LOG_FLOOR = math.log(DENSITY_FLOOR)
_VARIANCE_FLOOR = 1e-6
_EVAL_CHUNK = 512

_STREAM_GMM_INIT = 10


def _axis_mass(c: np.ndarray | float, sigma: np.ndarray | float) -> np.ndarray | float:
    """Gaussian mass of [0, 1] for N(c, sigma^2) along one axis."""
    sqrt2 = math.sqrt(2.0)
    return 0.5 * (erf((1.0 - c) / (sigma * sqrt2)) - erf((0.0 - c) / (sigma * sqrt2)))


def _as_points(points: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"points must have shape (n, 2), got {pts.shape}")
    return pts


class DensityModel(ABC):
    """Fitted density exposing log-density at points inside the square."""

    kind: str = "abstract"

    @abstractmethod
    def _log_density_raw(self, points: np.ndarray) -> np.ndarray:
        ...

    def log_density(self, points: np.ndarray) -> np.ndarray:
        """Natural-log density, floored at log(1e-12) so it is always finite."""
        return np.maximum(self._log_density_raw(_as_points(points)), _LOG_FLOOR)

    def density(self, points: np.ndarray) -> np.ndarray:
        return np.exp(self.log_density(points))

    @abstractmethod
    def _payload(self) -> dict:
        ...

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, **self._payload()})

    @staticmethod
    def from_json(text: str) -> "DensityModel":
        d = json.loads(text)
        kind = d.pop("kind")
        for cls in (HistogramDensity, KdeDensity, GmmDensity):
            if cls.kind == kind:
                return cls._from_payload(d)
        raise ValueError(f"unknown density kind {kind!r}")


class HistogramDensity(DensityModel):
    """Piecewise-constant density from smoothed bin masses."""

    kind = "histogram"

    def __init__(self, grid: BinGrid, bin_mass: np.ndarray) -> None:
        bin_mass = np.asarray(bin_mass, dtype=np.float64)
        if bin_mass.shape != (grid.total_bins,):
            raise ValueError("bin_mass must have one entry per grid cell")
        if np.any(bin_mass < 0.0):
            raise ValueError("bin masses must be non-negative")
        s = bin_mass.sum()
        if not math.isclose(s, 1.0, rel_tol=0, abs_tol=1e-9):
            raise ValueError(f"bin masses must sum to 1, got {s}")
        self.grid = grid
        self.bin_mass = bin_mass

    def _log_density_raw(self, points: np.ndarray) -> np.ndarray:
        dens = self.bin_mass[bin_indices(points, self.grid)] / self.grid.cell_area
        with np.errstate(divide="ignore"):
            return np.log(dens)

    def integral(self) -> float:
        """Exact integral over the square (sum of bin masses)."""
        return float(self.bin_mass.sum())

    def _payload(self) -> dict:
        return {"cells_per_axis": self.grid.cells_per_axis,
                "bin_mass": self.bin_mass.tolist()}

    @classmethod
    def _from_payload(cls, d: dict) -> "HistogramDensity":
        return cls(BinGrid(int(d["cells_per_axis"])),
                   np.asarray(d["bin_mass"], dtype=np.float64))


def fit_histogram(data: Dataset, grid: BinGrid, pseudocount: float = 1.0) -> HistogramDensity:
    """Per-bin density (c_b + pseudocount) / ((m + k^2 * pseudocount) * cell_area)."""
    if pseudocount < 0.0:
        raise ValueError("pseudocount must be >= 0")
    counts = np.bincount(bin_indices(data.points, grid),
                         minlength=grid.total_bins).astype(np.float64)
    mass = (counts + pseudocount) / (len(data) + grid.total_bins * pseudocount)
    return HistogramDensity(grid, mass)


class KdeDensity(DensityModel):
    """Isotropic Gaussian KDE renormalized per kernel to the square.

    Each kernel is divided by its own truncation mass, so the average
    integrates to 1 over the domain regardless of how close retained
    points sit to the boundary.
    """

    kind = "kde"

    def __init__(self, points: np.ndarray, bandwidth: float) -> None:
        if bandwidth <= 0.0:
            raise ValueError("bandwidth must be positive")
        pts = _as_points(points)
        self.points = pts
        self.bandwidth = float(bandwidth)
        self._log_kernel_mass = (np.log(_axis_mass(pts[:, 0], bandwidth))
                                 + np.log(_axis_mass(pts[:, 1], bandwidth)))

    def _log_density_raw(self, points: np.ndarray) -> np.ndarray:
        h2 = self.bandwidth**2
        log_norm = -math.log(2.0 * math.pi * h2)
        train = self.points
        train_sq = np.square(train).sum(axis=1)
        out = np.empty(points.shape[0])
        for lo in range(0, points.shape[0], _EVAL_CHUNK):
            chunk = points[lo:lo + _EVAL_CHUNK]
            # pairwise distances through a GEMM; clip the tiny negatives
            d2 = (np.square(chunk).sum(axis=1)[:, None] + train_sq[None, :]
                  - 2.0 * chunk @ train.T)
            np.maximum(d2, 0.0, out=d2)
            log_k = d2
            log_k *= -1.0 / (2.0 * h2)
            log_k += log_norm - self._log_kernel_mass[None, :]
            peak = log_k.max(axis=1)
            out[lo:lo + _EVAL_CHUNK] = (peak
                                        + np.log(np.exp(log_k - peak[:, None]).sum(axis=1))
                                        - math.log(len(train)))
        return out

    def _payload(self) -> dict:
        return {"points": self.points.tolist(), "bandwidth": self.bandwidth}

    @classmethod
    def _from_payload(cls, d: dict) -> "KdeDensity":
        return cls(np.asarray(d["points"], dtype=np.float64), float(d["bandwidth"]))


def fit_kde(data: Dataset, bandwidth: float) -> KdeDensity:
    """Kernel density from all training points at the given bandwidth."""
    return KdeDensity(data.points, bandwidth)


class GmmDensity(DensityModel):
    """Isotropic Gaussian mixture, renormalized to the square after fitting.

    ``loglik_trace`` holds the training log-likelihood per EM iteration
    (evaluated before each M-step) and ``reseed_count`` the number of
    starved-component restarts, which void the monotonicity guarantee for
    the affected step.
    """

    kind = "gmm"

    def __init__(self, means: np.ndarray, variances: np.ndarray, weights: np.ndarray,
                 loglik_trace: list[float] | None = None, reseed_count: int = 0) -> None:
        means = np.asarray(means, dtype=np.float64)
        variances = np.asarray(variances, dtype=np.float64)
        weights = np.asarray(weights, dtype=np.float64)
        k = means.shape[0]
        if means.shape != (k, 2) or variances.shape != (k,) or weights.shape != (k,):
            raise ValueError("inconsistent mixture parameter shapes")
        if np.any(variances <= 0.0) or np.any(weights < 0.0):
            raise ValueError("variances must be positive and weights non-negative")
        self.means = means
        self.variances = variances
        self.weights = weights / weights.sum()
        self.loglik_trace = list(loglik_trace or [])
        self.reseed_count = int(reseed_count)
        sig = np.sqrt(self.variances)
        comp_mass = _axis_mass(means[:, 0], sig) * _axis_mass(means[:, 1], sig)
        self._log_square_mass = float(np.log(np.dot(self.weights, comp_mass)))

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    def _log_component_scores(self, points: np.ndarray) -> np.ndarray:
        d2 = np.square(points[:, None, :] - self.means[None, :, :]).sum(axis=2)
        return (-d2 / (2.0 * self.variances[None, :])
                - np.log(2.0 * math.pi * self.variances)[None, :]
                + np.log(self.weights)[None, :])

    def _log_density_raw(self, points: np.ndarray) -> np.ndarray:
        return logsumexp(self._log_component_scores(points), axis=1) - self._log_square_mass

    def _payload(self) -> dict:
        return {"means": self.means.tolist(), "variances": self.variances.tolist(),
                "weights": self.weights.tolist()}

    @classmethod
    def _from_payload(cls, d: dict) -> "GmmDensity":
        return cls(np.asarray(d["means"], dtype=np.float64),
                   np.asarray(d["variances"], dtype=np.float64),
                   np.asarray(d["weights"], dtype=np.float64))


def _kmeanspp_centers(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Spread initial centers by distance-squared-weighted sampling."""
    n = points.shape[0]
    centers = np.empty((k, 2))
    centers[0] = points[rng.integers(n)]
    d2 = np.square(points - centers[0]).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centers[j] = points[rng.integers(n)]
        else:
            centers[j] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.square(points - centers[j]).sum(axis=1))
    return centers


def fit_gmm(data: Dataset, n_components: int = 8, max_iters: int = 500,
            tol: float = 1e-6, seed: int = 0) -> GmmDensity:
    """EM fit of an isotropic mixture; log-likelihood is tracked per iteration.

    Variances are floored at 1e-6. A component whose responsibility mass
    collapses is reseeded to a random data point; such restarts are rare
    on non-degenerate data and are counted on the returned model.
    """
    k = int(n_components)
    if k < 1:
        raise ValueError("n_components must be >= 1")
    pts = data.points
    n = pts.shape[0]
    if n < k:
        raise ValueError(f"need at least {k} points, got {n}")
    rng = child_rng(seed, _STREAM_GMM_INIT)

    means = _kmeanspp_centers(pts, k, rng)
    overall_var = max(float(np.square(pts - pts.mean(axis=0)).sum(axis=1).mean() / 2.0),
                      _VARIANCE_FLOOR)
    variances = np.full(k, overall_var)
    weights = np.full(k, 1.0 / k)

    trace: list[float] = []
    reseeds = 0
    prev_ll = -np.inf
    for _ in range(max_iters):
        log_scores = (-np.square(pts[:, None, :] - means[None, :, :]).sum(axis=2)
                      / (2.0 * variances[None, :])
                      - np.log(2.0 * math.pi * variances)[None, :]
                      + np.log(weights)[None, :])
        log_point = logsumexp(log_scores, axis=1)
        ll = float(log_point.sum())
        trace.append(ll)
        if ll - prev_ll < tol and np.isfinite(prev_ll):
            break
        prev_ll = ll

        resp = np.exp(log_scores - log_point[:, None])
        mass = resp.sum(axis=0)
        starved = mass < 1e-10
        if np.any(starved):
            for j in np.flatnonzero(starved):
                means[j] = pts[rng.integers(n)]
                variances[j] = overall_var
                mass[j] = 1.0
                reseeds += 1
            weights = mass / mass.sum()
            continue
        means = (resp.T @ pts) / mass[:, None]
        sq = np.square(pts[:, None, :] - means[None, :, :]).sum(axis=2)
        variances = np.maximum((resp * sq).sum(axis=0) / (2.0 * mass), _VARIANCE_FLOOR)
        weights = mass / n

    return GmmDensity(means, variances, weights, loglik_trace=trace, reseed_count=reseeds)
