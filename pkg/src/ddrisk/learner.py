"""Small feed-forward classifier trained by weighted gradient descent.

The network maps a point in the unit square to two logits through ReLU
hidden layers. Training minimizes the weighted cross-entropy surrogate
(1/n) sum_i w_i * ce_i with plain momentum SGD; all reported risks use
the zero-one loss. The parameter vector at initialization is snapshotted
so the Euclidean weight distance to initialization (WDL2) is available
throughout, both as a per-epoch trace entry and as the model-selection
criterion in :func:`select_by_wdl2`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .core import Point2, child_rng
from .rebalance import WeightedDataset

__all__ = [
    "EpochStats",
    "MlpModel",
    "SelectionResult",
    "TrainConfig",
    "TrainingDivergedError",
    "TrainingTrace",
    "gradient_check",
    "predict",
    "predict_batch",
    "select_by_wdl2",
    "train",
    "wdl2",
]

_STREAM_INIT = 30
_STREAM_SHUFFLE = 31
_STREAM_GRADCHECK = 32


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings; ``lr_decay`` selects the staged schedule
    (full rate for 60% of the steps, then x0.2, then x0.04) which settles
    the iterates, while False keeps the rate constant throughout."""

    hidden: tuple[int, ...] = (64, 64)
    learning_rate: float = 0.25
    epochs: int = 60
    batch_size: int = 128
    momentum: float = 0.9
    seed: int = 0
    lr_decay: bool = True

    def __post_init__(self) -> None:
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ValueError("hidden sizes must be positive")
        if self.learning_rate <= 0.0 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("learning_rate, epochs and batch_size must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")

    def rate_at(self, step: int, total_steps: int) -> float:
        if not self.lr_decay:
            return self.learning_rate
        frac = step / max(1, total_steps)
        if frac < 0.6:
            return self.learning_rate
        if frac < 0.85:
            return 0.2 * self.learning_rate
        return 0.04 * self.learning_rate


class MlpModel:
    """ReLU MLP over flat float64 parameters, with an init snapshot.

    Layer sizes run (2, *hidden, 2). Hidden layers get He-scaled random
    weights; the readout starts at zero, so an untrained model emits
    equal logits everywhere (ties predict label 0). ``init_params`` is
    immutable once the model is built.
    """

    def __init__(self, sizes: tuple[int, ...], params: np.ndarray,
                 init_params: np.ndarray | None = None) -> None:
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) < 2 or sizes[0] != 2 or sizes[-1] != 2:
            raise ValueError(f"sizes must run (2, ..., 2), got {sizes}")
        self.sizes = sizes
        n = self.n_params(sizes)
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (n,):
            raise ValueError(f"expected {n} parameters, got {params.shape}")
        self.params = params.copy()
        snap = params.copy() if init_params is None else np.asarray(init_params, dtype=np.float64).copy()
        if snap.shape != (n,):
            raise ValueError("init snapshot shape mismatch")
        snap.flags.writeable = False
        self.init_params = snap

    @staticmethod
    def n_params(sizes: tuple[int, ...]) -> int:
        return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))

    @classmethod
    def initialize(cls, hidden: tuple[int, ...], seed: int,
                   random_readout: bool = False) -> "MlpModel":
        sizes = (2, *hidden, 2)
        rng = child_rng(seed, _STREAM_INIT)
        chunks = []
        last = len(sizes) - 2
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            if i == last and not random_readout:
                w = np.zeros((a, b))
            else:
                w = rng.standard_normal((a, b)) * math.sqrt(2.0 / a)
            chunks.append(w.ravel())
            chunks.append(np.zeros(b))
        return cls(sizes, np.concatenate(chunks))

    def _layers(self, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        out = []
        off = 0
        for a, b in zip(self.sizes[:-1], self.sizes[1:]):
            w = params[off:off + a * b].reshape(a, b)
            off += a * b
            bias = params[off:off + b]
            off += b
            out.append((w, bias))
        return out

    def _forward(self, x: np.ndarray, params: np.ndarray | None = None):
        """Logits plus the per-layer activations needed for backprop."""
        layers = self._layers(self.params if params is None else params)
        acts = [x]
        h = x
        for w, b in layers[:-1]:
            h = np.maximum(h @ w + b, 0.0)
            acts.append(h)
        w, b = layers[-1]
        return h @ w + b, acts

    def logits(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return self._forward(pts)[0]

    def loss_and_grad(self, points: np.ndarray, labels: np.ndarray,
                      weights: np.ndarray,
                      params: np.ndarray | None = None) -> tuple[float, np.ndarray]:
        """Weighted mean cross-entropy and its flat gradient."""
        p = self.params if params is None else params
        x = np.atleast_2d(np.asarray(points, dtype=np.float64))
        y = np.asarray(labels, dtype=np.int64)
        w = np.asarray(weights, dtype=np.float64)
        n = x.shape[0]
        z, acts = self._forward(x, p)
        zmax = z.max(axis=1, keepdims=True)
        log_norm = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
        ce = log_norm - z[np.arange(n), y]
        loss = float(np.mean(w * ce))

        probs = np.exp(z - log_norm[:, None])
        delta = probs
        delta[np.arange(n), y] -= 1.0
        delta *= (w / n)[:, None]

        layers = self._layers(p)
        grad = np.zeros_like(p)
        gl = self._layers(grad)
        for i in range(len(layers) - 1, -1, -1):
            gw, gb = gl[i]
            gw += acts[i].T @ delta
            gb += delta.sum(axis=0)
            if i > 0:
                delta = (delta @ layers[i][0].T) * (acts[i] > 0.0)
        return loss, grad

    def predict_batch(self, points: np.ndarray) -> np.ndarray:
        # argmax takes the first index on ties, so equal logits give label 0
        return np.argmax(self.logits(points), axis=1).astype(np.int64)

    def predict(self, p: Point2) -> int:
        return int(self.predict_batch(p.as_array()[None, :])[0])

    def to_json(self) -> str:
        return json.dumps({"sizes": list(self.sizes),
                           "params": self.params.tolist(),
                           "init_params": self.init_params.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "MlpModel":
        d = json.loads(text)
        return cls(tuple(d["sizes"]),
                   np.asarray(d["params"], dtype=np.float64),
                   np.asarray(d["init_params"], dtype=np.float64))


def predict(model: MlpModel, p: Point2) -> int:
    return model.predict(p)


def predict_batch(model: MlpModel, points: np.ndarray) -> np.ndarray:
    return model.predict_batch(points)


def wdl2(model: MlpModel) -> float:
    """Euclidean distance of the current parameters from initialization."""
    return float(np.linalg.norm(model.params - model.init_params))


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    weighted_loss: float
    wdl2: float


@dataclass(frozen=True)
class TrainingTrace:
    epoch_stats: tuple[EpochStats, ...]
    final_weighted_loss: float
    final_wdl2: float
    final_train_error: float


def train(wd: WeightedDataset, cfg: TrainConfig) -> tuple[MlpModel, TrainingTrace]:
    """Momentum SGD on the weighted cross-entropy objective.

    The per-epoch trace records the epoch's average weighted batch loss
    and the WDL2 after the epoch's updates. Identical (data, config)
    reproduce bitwise-identical parameters.
    """
    model = MlpModel.initialize(cfg.hidden, cfg.seed)
    x, y, w = wd.points, wd.labels, wd.weights
    n = len(wd)
    rng = child_rng(cfg.seed, _STREAM_SHUFFLE)
    velocity = np.zeros_like(model.params)
    stats: list[EpochStats] = []
    batches_per_epoch = math.ceil(n / cfg.batch_size)
    total_steps = cfg.epochs * batches_per_epoch
    step = 0
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for lo in range(0, n, cfg.batch_size):
            idx = perm[lo:lo + cfg.batch_size]
            loss, grad = model.loss_and_grad(x[idx], y[idx], w[idx])
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss {loss} at epoch {epoch}, offset {lo}")
            velocity = cfg.momentum * velocity + grad
            model.params -= cfg.rate_at(step, total_steps) * velocity
            step += 1
            epoch_loss += loss * len(idx)
        stats.append(EpochStats(epoch=epoch, weighted_loss=epoch_loss / n,
                                wdl2=wdl2(model)))
    train_error = float(np.mean(model.predict_batch(x) != y))
    trace = TrainingTrace(epoch_stats=tuple(stats),
                          final_weighted_loss=stats[-1].weighted_loss,
                          final_wdl2=stats[-1].wdl2,
                          final_train_error=train_error)
    return model, trace


def gradient_check(model: MlpModel, points: np.ndarray, labels: np.ndarray,
                   weights: np.ndarray, n_coords: int = 100, step: float = 1e-5,
                   seed: int = 0) -> float:
    """Max relative error of backprop against central finite differences.

    Checks a random coordinate subset; the error scale is floored at 1
    so coordinates with (correctly) zero gradient do not produce 0/0.
    """
    _, grad = model.loss_and_grad(points, labels, weights)
    rng = child_rng(seed, _STREAM_GRADCHECK)
    coords = rng.choice(grad.size, size=min(n_coords, grad.size), replace=False)
    worst = 0.0
    base = model.params
    for c in coords:
        bumped = base.copy()
        bumped[c] += step
        up, _ = model.loss_and_grad(points, labels, weights, params=bumped)
        bumped[c] -= 2.0 * step
        down, _ = model.loss_and_grad(points, labels, weights, params=bumped)
        numeric = (up - down) / (2.0 * step)
        err = abs(grad[c] - numeric) / max(1.0, abs(grad[c]), abs(numeric))
        worst = max(worst, err)
    return worst


@dataclass(frozen=True)
class SelectionResult:
    """Winner of WDL2 model selection; ``fallback`` warns that no
    candidate met the loss ceiling and the minimum-loss one was returned."""

    index: int
    model: MlpModel
    trace: TrainingTrace
    fallback: bool


def select_by_wdl2(candidates: list[tuple[MlpModel, TrainingTrace]],
                   loss_ceiling: float | None = None) -> SelectionResult:
    """Pick the smallest weight drift among candidates that fit well enough.

    Candidates with final weighted training loss at most ``loss_ceiling``
    qualify; among them the minimum final WDL2 wins. The ceiling defaults
    to 1.1x the best candidate's loss. With no qualifier the global
    minimum-loss candidate is returned with the fallback flag set.
    """
    if not candidates:
        raise ValueError("need at least one candidate")
    losses = [t.final_weighted_loss for _, t in candidates]
    best_loss = min(losses)
    ceiling = 1.1 * best_loss if loss_ceiling is None else loss_ceiling
    qualified = [i for i, l in enumerate(losses) if l <= ceiling]
    if qualified:
        i = min(qualified, key=lambda j: candidates[j][1].final_wdl2)
        return SelectionResult(i, candidates[i][0], candidates[i][1], fallback=False)
    i = int(np.argmin(losses))
    return SelectionResult(i, candidates[i][0], candidates[i][1], fallback=True)
