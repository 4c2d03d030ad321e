"""Shared domain types, seeded randomness, and numeric conventions.

Conventions used across the package:

- The domain is the closed unit square [0,1]^2.
- All entropies and logarithms are natural (nats).
- Everything is 64-bit floating point.
- Randomness flows through a single counter-based generator (Philox);
  child streams are derived deterministically from (seed, stream ids),
  so any operation is reproducible from its seed alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

__all__ = [
    "BinGrid",
    "Dataset",
    "LabeledSample",
    "Point2",
    "RiskReport",
    "bin_index",
    "bin_indices",
    "child_rng",
    "zero_one_loss",
]

_UINT64_MASK = (1 << 64) - 1


def child_rng(seed: int, *stream: int) -> np.random.Generator:
    """Deterministic child generator for (seed, stream ids).

    Distinct stream tuples yield statistically independent streams; the
    same tuple always yields the same stream. Philox is counter-based,
    so results do not depend on draw order across streams.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & _UINT64_MASK,
                                spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class Point2:
    """A point in the closed unit square."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.x <= 1.0 and 0.0 <= self.y <= 1.0):
            raise ValueError(f"point ({self.x}, {self.y}) outside the unit square")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=np.float64)


@dataclass(frozen=True)
class LabeledSample:
    """A point together with its ground-truth binary label."""

    point: Point2
    label: int

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


class Dataset:
    """Immutable, seed-stamped collection of labeled points.

    Backed by arrays for vectorized work: ``points`` is (n, 2) float64,
    ``labels`` is (n,) int64. Order is part of the identity; two datasets
    produced from equal seeds are byte-identical.
    """

    __slots__ = ("_points", "_labels", "seed")

    def __init__(self, points: np.ndarray, labels: np.ndarray, seed: int) -> None:
        points = np.asarray(points, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if points.ndim != 2 or points.shape[1] != 2:
            raise ValueError(f"points must have shape (n, 2), got {points.shape}")
        if points.shape[0] == 0:
            raise ValueError("dataset must be non-empty")
        if labels.shape != (points.shape[0],):
            raise ValueError("labels must align with points")
        if np.any(points < 0.0) or np.any(points > 1.0):
            raise ValueError("points must lie in the closed unit square")
        if not np.all((labels == 0) | (labels == 1)):
            raise ValueError("labels must be binary")
        points = points.copy()
        labels = labels.copy()
        points.flags.writeable = False
        labels.flags.writeable = False
        self._points = points
        self._labels = labels
        self.seed = int(seed)

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def labels(self) -> np.ndarray:
        return self._labels

    @property
    def samples(self) -> list[LabeledSample]:
        return [LabeledSample(Point2(float(x), float(y)), int(l))
                for (x, y), l in zip(self._points, self._labels)]

    def __len__(self) -> int:
        return self._points.shape[0]

    def __getitem__(self, i: int) -> LabeledSample:
        x, y = self._points[i]
        return LabeledSample(Point2(float(x), float(y)), int(self._labels[i]))

    def __iter__(self) -> Iterator[LabeledSample]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.seed == other.seed
                and self._points.tobytes() == other._points.tobytes()
                and self._labels.tobytes() == other._labels.tobytes())

    def __repr__(self) -> str:
        return f"Dataset(n={len(self)}, seed={self.seed})"


@dataclass(frozen=True)
class BinGrid:
    """Uniform k x k partition of the unit square.

    All discrete entropies in the package are measured under such a grid.
    """

    cells_per_axis: int

    def __post_init__(self) -> None:
        if self.cells_per_axis < 1:
            raise ValueError("cells_per_axis must be >= 1")

    @property
    def total_bins(self) -> int:
        return self.cells_per_axis * self.cells_per_axis

    @property
    def cell_area(self) -> float:
        return 1.0 / self.total_bins


def bin_index(p: Point2, grid: BinGrid) -> int:
    """Index of the grid cell containing ``p``.

    Returns floor(x*k) + k*floor(y*k), with coordinates equal to 1.0
    clamped into the last row/column (a measure-zero correction that
    keeps indices inside [0, k^2)).
    """
    k = grid.cells_per_axis
    ix = min(int(np.floor(p.x * k)), k - 1)
    iy = min(int(np.floor(p.y * k)), k - 1)
    return ix + k * iy


def bin_indices(points: np.ndarray, grid: BinGrid) -> np.ndarray:
    """Vectorized :func:`bin_index` for an (n, 2) array."""
    k = grid.cells_per_axis
    pts = np.asarray(points, dtype=np.float64)
    ij = np.floor(pts * k).astype(np.int64)
    np.clip(ij, 0, k - 1, out=ij)
    return ij[:, 0] + k * ij[:, 1]


def zero_one_loss(pred: int, truth: int) -> float:
    """1.0 on label mismatch, 0.0 otherwise."""
    if pred not in (0, 1) or truth not in (0, 1):
        raise ValueError("labels must be binary")
    return 0.0 if pred == truth else 1.0


@dataclass(frozen=True)
class RiskReport:
    """Risk summary for one evaluated model, ready for CSV emission.

    Risks are probabilities in [0, 1]; bounds may exceed 1 (they are
    reported raw and flagged vacuous rather than clamped) but are never
    negative.
    """

    uniform_risk: float
    dd_risk_by_gamma: Mapping[float, float]
    bound_by_gamma: Mapping[float, float]
    seed: int
    n: int
    sigma: float | None = None
    extra: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 <= self.uniform_risk <= 1.0:
            raise ValueError(f"uniform_risk {self.uniform_risk} outside [0, 1]")
        for g, r in self.dd_risk_by_gamma.items():
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"dd risk {r} at gamma={g} outside [0, 1]")
        for g, b in self.bound_by_gamma.items():
            if b < 0.0:
                raise ValueError(f"bound {b} at gamma={g} is negative")

    def is_vacuous(self, gamma: float) -> bool:
        return self.bound_by_gamma[gamma] >= 1.0

    def to_rows(self) -> list[dict[str, object]]:
        """One flat dict per gamma, suitable for a csv.DictWriter."""
        rows: list[dict[str, object]] = []
        for gamma in sorted(self.dd_risk_by_gamma):
            row: dict[str, object] = {
                "seed": self.seed,
                "n": self.n,
                "sigma": "" if self.sigma is None else self.sigma,
                "gamma": gamma,
                "uniform_risk": self.uniform_risk,
                "dd_risk": self.dd_risk_by_gamma[gamma],
                "dd_bound": self.bound_by_gamma.get(gamma, ""),
            }
            row.update(self.extra)
            rows.append(row)
        return rows
