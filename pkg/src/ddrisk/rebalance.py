"""Importance-weight rebalancing and weighted risk estimators.

Weights emulate uniform training from a non-uniform sample: each point
receives the capped inverse of its estimated density,
w_i = min(1 / p_hat(x_i)^tau, beta), where beta is an empirical quantile
of the uncapped values (capping at the 0.99 weight quantile equals
flooring the likelihood at its 0.01 quantile). Weights are normalized to
mean 1 by default so weighted and unweighted risks share scale; the
gradient-descent argmin is unaffected by that constant.

The density model must be fit on held-out data, not on the weighted set
itself; :func:`split_half` provides the deterministic 50/50 split used
for that contract.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, IO

import numpy as np

from .core import Dataset, child_rng
from .density import DENSITY_FLOOR, DensityModel

__all__ = [
    "WeightConfig",
    "WeightedDataset",
    "is_uniform_risk",
    "rebalance_weights",
    "split_half",
    "unit_weights",
    "weighted_empirical_risk",
]

_STREAM_SPLIT = 20


@dataclass(frozen=True)
class WeightConfig:
    """Knobs of the weight construction.

    ``beta_quantile`` is the quantile of the raw (uncapped) weight values
    at which the cap is placed. ``tau`` smooths the inverse density;
    tau=0 degenerates to equal weights.
    """

    tau: float = 1.0
    beta_quantile: float = 0.99
    normalize: bool = True

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must be in [0, 1], got {self.tau}")
        if not 0.0 < self.beta_quantile < 1.0:
            raise ValueError(f"beta_quantile must be in (0, 1), got {self.beta_quantile}")


@dataclass(frozen=True)
class WeightedDataset:
    """A dataset with per-sample non-negative weights.

    ``cap`` and ``clipped_count`` record the quantile ceiling applied in
    raw weight space and how many samples hit it.
    """

    base: Dataset
    weights: np.ndarray
    cap: float | None = None
    clipped_count: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (len(self.base),):
            raise ValueError("weights must align with the dataset")
        if not np.all(np.isfinite(w)) or np.any(w < 0.0):
            raise ValueError("weights must be finite and non-negative")
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def points(self) -> np.ndarray:
        return self.base.points

    @property
    def labels(self) -> np.ndarray:
        return self.base.labels

    def __len__(self) -> int:
        return len(self.base)

    def write_csv(self, fh: IO[str]) -> None:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "label", "weight"])
        for (x, y), lab, w in zip(self.points, self.labels, self.weights):
            writer.writerow([repr(float(x)), repr(float(y)), int(lab), repr(float(w))])


def unit_weights(data: Dataset) -> WeightedDataset:
    """The trivial weighting (plain empirical risk)."""
    return WeightedDataset(base=data, weights=np.ones(len(data)))


def rebalance_weights(data: Dataset, model: DensityModel,
                      cfg: WeightConfig = WeightConfig()) -> WeightedDataset:
    """Capped inverse-density weights for ``data`` under a fitted model.

    The model is expected to have been fit on held-out data (caller
    contract). Raises if every density sits at the numeric floor, which
    signals a failed density fit rather than a usable weighting.
    """
    logp = model.log_density(data.points)
    floor_log = np.log(DENSITY_FLOOR)
    if np.all(logp <= floor_log + 1e-12):
        raise ValueError("all densities at the floor; density fit failed")
    raw = np.exp(-cfg.tau * logp)
    beta = float(np.quantile(raw, cfg.beta_quantile))
    weights = np.minimum(raw, beta)
    clipped = int(np.count_nonzero(raw > beta))
    if cfg.normalize:
        weights = weights / weights.mean()
    return WeightedDataset(base=data, weights=weights, cap=beta, clipped_count=clipped)


def weighted_empirical_risk(wd: WeightedDataset, predictions: np.ndarray) -> float:
    """Mean of weight times zero-one loss, (1/n) sum_i w_i * l_i."""
    preds = np.asarray(predictions)
    if preds.shape != (len(wd),):
        raise ValueError(f"predictions shape {preds.shape} does not match n={len(wd)}")
    losses = (preds != wd.labels).astype(np.float64)
    return float(np.mean(wd.weights * losses))


def _evaluate_density(density_fn: Callable, points: np.ndarray) -> np.ndarray:
    """Evaluate a density callable that may be vectorized or per-point."""
    try:
        vals = np.asarray(density_fn(points), dtype=np.float64)
        if vals.shape == (points.shape[0],):
            return vals
    except Exception:
        pass
    return np.array([float(density_fn(p)) for p in points])


def is_uniform_risk(data: Dataset, predictions: np.ndarray,
                    true_density_at: Callable) -> float:
    """Self-normalized importance-sampling estimate of the uniform risk.

    With samples drawn from density p, returns
    (sum_i l_i / p(x_i)) / (sum_i 1 / p(x_i)), which needs p only up to a
    constant and reduces to the plain mean when p is constant.
    """
    preds = np.asarray(predictions)
    if preds.shape != (len(data),):
        raise ValueError(f"predictions shape {preds.shape} does not match n={len(data)}")
    dens = _evaluate_density(true_density_at, data.points)
    if np.any(dens <= 0.0) or not np.all(np.isfinite(dens)):
        raise ValueError("density must be strictly positive and finite at every sample")
    inv = 1.0 / dens
    losses = (preds != data.labels).astype(np.float64)
    return float(np.dot(inv, losses) / inv.sum())


def split_half(data: Dataset, seed: int) -> tuple[Dataset, Dataset]:
    """Deterministic 50/50 split: (density-fitting half, weighting half)."""
    n = len(data)
    if n < 2:
        raise ValueError("need at least 2 samples to split")
    perm = child_rng(seed, _STREAM_SPLIT).permutation(n)
    cut = n // 2
    a, b = perm[:cut], perm[cut:]
    return (Dataset(data.points[a], data.labels[a], seed=data.seed),
            Dataset(data.points[b], data.labels[b], seed=data.seed))
