"""Synthetic mixture-of-Gaussians classification tasks on the unit square.

A task is four isotropic Gaussian components with means drawn uniformly
in the square; two components carry the positive class and two the
negative class. The ground truth labels a point positive when the summed
positive-component density strictly exceeds the summed negative-component
density (ties, a measure-zero set, go negative). Training sets are drawn
either uniformly or from an isotropic Gaussian centered at (0.5, 0.5)
truncated to the square by rejection.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset, Point2, child_rng

__all__ = [
    "GaussianMixtureTask",
    "RejectionBudgetError",
    "TruncatedGaussianSampler",
    "sample_task",
    "sample_truncated_gaussian",
    "sample_uniform",
    "true_density_truncated_gaussian",
    "true_label",
]

DEFAULT_COMPONENT_STD = 0.15
#: evaluation grid (per axis) used to reject single-class tasks
DEGENERACY_GRID = 200
#: rejection-sampling draw budget, per requested point
DEFAULT_RETRY_BUDGET = 10**6

_STREAM_TASK = 0
_STREAM_UNIFORM = 1
_STREAM_TRUNCATED = 2


class RejectionBudgetError(RuntimeError):
    """Truncated sampling exhausted its draw budget (pathological sigma)."""


@dataclass(frozen=True)
class GaussianMixtureTask:
    """Four isotropic Gaussians, two per class, defining the ground truth.

    ``class_of_component`` maps component index to its binary label;
    components 0 and 1 are positive, 2 and 3 negative.
    """

    means: np.ndarray
    component_std: float
    class_of_component: tuple[int, int, int, int]
    seed: int

    def __post_init__(self) -> None:
        means = np.asarray(self.means, dtype=np.float64)
        if means.shape != (4, 2):
            raise ValueError(f"means must have shape (4, 2), got {means.shape}")
        if np.any(means < 0.0) or np.any(means > 1.0):
            raise ValueError("means must lie in the unit square")
        if self.component_std <= 0.0:
            raise ValueError("component_std must be positive")
        if sorted(self.class_of_component) != [0, 0, 1, 1]:
            raise ValueError("exactly two components per class are required")
        means = means.copy()
        means.flags.writeable = False
        object.__setattr__(self, "means", means)

    def class_scores(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Unnormalized positive and negative mixture densities at points.

        The shared isotropic normalization constant cancels in the
        likelihood-ratio comparison, so plain squared-exponential scores
        are returned.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        d2 = np.square(pts[:, None, :] - self.means[None, :, :]).sum(axis=2)
        scores = np.exp(-d2 / (2.0 * self.component_std**2))
        cls = np.asarray(self.class_of_component)
        pos = scores[:, cls == 1].sum(axis=1)
        neg = scores[:, cls == 0].sum(axis=1)
        return pos, neg

    def label_batch(self, points: np.ndarray) -> np.ndarray:
        pos, neg = self.class_scores(points)
        return (pos > neg).astype(np.int64)

    def label(self, p: Point2) -> int:
        return int(self.label_batch(p.as_array()[None, :])[0])

    def to_json(self) -> str:
        return json.dumps({
            "means": self.means.tolist(),
            "component_std": self.component_std,
            "class_of_component": list(self.class_of_component),
            "seed": self.seed,
        })

    @classmethod
    def from_json(cls, text: str) -> "GaussianMixtureTask":
        d = json.loads(text)
        return cls(
            means=np.asarray(d["means"], dtype=np.float64),
            component_std=float(d["component_std"]),
            class_of_component=tuple(int(c) for c in d["class_of_component"]),
            seed=int(d["seed"]),
        )


def true_label(task: GaussianMixtureTask, p: Point2) -> int:
    """Ground-truth label: 1 iff the positive mixture strictly dominates."""
    return task.label(p)


def _is_degenerate(task: GaussianMixtureTask) -> bool:
    """True when a 200x200 grid labeling realizes only one class."""
    axis = (np.arange(DEGENERACY_GRID) + 0.5) / DEGENERACY_GRID
    xx, yy = np.meshgrid(axis, axis)
    labels = task.label_batch(np.column_stack([xx.ravel(), yy.ravel()]))
    return bool(labels.min() == labels.max())


def sample_task(seed: int, component_std: float = DEFAULT_COMPONENT_STD) -> GaussianMixtureTask:
    """Draw a task with uniform means; single-class tasks are redrawn.

    A constant ground truth makes every risk trivially zero and corrupts
    aggregate statistics, so degenerate draws advance to the next attempt
    stream deterministically.
    """
    for attempt in range(1000):
        rng = child_rng(seed, _STREAM_TASK, attempt)
        means = rng.random((4, 2))
        task = GaussianMixtureTask(means=means, component_std=component_std,
                                   class_of_component=(1, 1, 0, 0), seed=seed)
        if not _is_degenerate(task):
            return task
    raise RuntimeError(f"no non-degenerate task found for seed {seed}")


def sample_uniform(task: GaussianMixtureTask, n: int, seed: int) -> Dataset:
    """n points uniform on the square, labeled by the task's ground truth."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = child_rng(seed, _STREAM_UNIFORM)
    pts = rng.random((n, 2))
    return Dataset(pts, task.label_batch(pts), seed=seed)


@dataclass(frozen=True)
class TruncatedGaussianSampler:
    """Isotropic Gaussian at the domain center, truncated to the square."""

    sigma: float
    center: tuple[float, float] = (0.5, 0.5)

    def __post_init__(self) -> None:
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")

    def sample_points(self, n: int, seed: int,
                      retry_budget: int = DEFAULT_RETRY_BUDGET) -> np.ndarray:
        """Rejection sampling: redraw until inside the square.

        Draws are consumed in deterministic batches; the budget is
        ``retry_budget`` draws per requested point, accounted in
        aggregate across the batch loop.
        """
        if n < 1:
            raise ValueError("n must be >= 1")
        rng = child_rng(seed, _STREAM_TRUNCATED)
        center = np.asarray(self.center, dtype=np.float64)
        accepted: list[np.ndarray] = []
        got = 0
        drawn = 0
        max_draws = retry_budget * n
        batch = max(4096, 2 * n)
        while got < n:
            if drawn >= max_draws:
                raise RejectionBudgetError(
                    f"exceeded {retry_budget} draws/point at sigma={self.sigma}")
            take = min(batch, max_draws - drawn)
            cand = center + self.sigma * rng.standard_normal((take, 2))
            drawn += take
            inside = cand[np.all((cand >= 0.0) & (cand <= 1.0), axis=1)]
            if inside.shape[0]:
                accepted.append(inside)
                got += inside.shape[0]
        return np.concatenate(accepted)[:n]

    def density(self, points: np.ndarray | Point2) -> np.ndarray | float:
        """Exact truncated density, normalized over the square.

        The isotropic Gaussian factorizes per axis, so the square's mass
        is a product of 1-D error-function integrals.
        """
        scalar = isinstance(points, Point2)
        pts = points.as_array()[None, :] if scalar else np.atleast_2d(
            np.asarray(points, dtype=np.float64))
        cx, cy = self.center
        mass_x = _axis_mass(cx, self.sigma)
        mass_y = _axis_mass(cy, self.sigma)
        d2 = (pts[:, 0] - cx) ** 2 + (pts[:, 1] - cy) ** 2
        dens = np.exp(-d2 / (2.0 * self.sigma**2)) / (2.0 * math.pi * self.sigma**2)
        dens /= mass_x * mass_y
        return float(dens[0]) if scalar else dens


def _axis_mass(c: float, sigma: float) -> float:
    """Gaussian mass of [0, 1] for a 1-D N(c, sigma^2)."""
    sqrt2 = math.sqrt(2.0)
    return 0.5 * (math.erf((1.0 - c) / (sigma * sqrt2)) - math.erf((0.0 - c) / (sigma * sqrt2)))


def sample_truncated_gaussian(task: GaussianMixtureTask, n: int, sigma: float, seed: int,
                              retry_budget: int = DEFAULT_RETRY_BUDGET) -> Dataset:
    """n truncated-Gaussian points, labeled by the task's ground truth."""
    sampler = TruncatedGaussianSampler(sigma=sigma)
    pts = sampler.sample_points(n, seed, retry_budget=retry_budget)
    return Dataset(pts, task.label_batch(pts), seed=seed)


def true_density_truncated_gaussian(p: np.ndarray | Point2, sigma: float) -> np.ndarray | float:
    """Density of the center-(0.5, 0.5) truncated Gaussian at ``p``."""
    return TruncatedGaussianSampler(sigma=sigma).density(p)
