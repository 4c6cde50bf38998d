"""Per-model quality estimators.

Both estimators map a feature vector to an M-vector of predicted quality in
the scaled [0, 1] label space:

* :class:`KnnIndex` averages the scaled labels of the k nearest training
  prompts (exact search, Euclidean distance, ties to the lower row index).
* :class:`MlpModel` is a one-hidden-layer ReLU network with one sigmoid
  head per pool model, trained on sigmoid cross-entropy against the scaled
  labels used as soft targets.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import kernels
from .errors import ValidationError
from .pool import Dataset, LabelScaler
from .rng import SplitMix64

FORMAT = "costroute-estimator"
VERSION = 1
PROB_EPS = 1e-12


def _as_matrix(x, d: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != d:
        raise ValidationError(f"dimension mismatch: expected feature dimension {d}, got {arr.shape[-1]}")
    return np.ascontiguousarray(arr), single


def _scaler_dict(s: LabelScaler | None):
    return None if s is None else {"lo": s.lo, "hi": s.hi}


# --------------------------------------------------------------------------
# K nearest neighbours

@dataclass(frozen=True, eq=False)
class KnnIndex:
    features: np.ndarray
    labels: np.ndarray
    k: int
    model_order: tuple[str, ...]
    scaler: LabelScaler | None = None

    def __post_init__(self):
        n = self.features.shape[0]
        if self.labels.shape != (n, len(self.model_order)):
            raise ValidationError("label matrix shape does not match features/model_order")
        if not 1 <= self.k <= n:
            raise ValidationError(f"k must be in [1, N={n}], got {self.k}")

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def predict(self, x) -> np.ndarray:
        """Estimates for one vector (shape ``(M,)``) or a batch (``(n, M)``)."""
        q, single = _as_matrix(x, self.d)
        out = kernels.knn_mean_labels(self.features, self.labels, q, self.k)
        return out[0] if single else out

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": VERSION,
            "kind": "knn",
            "k": self.k,
            "model_order": list(self.model_order),
            "scaler": _scaler_dict(self.scaler),
            "features": self.features.tolist(),
            "labels": self.labels.tolist(),
        }


def knn_build(train: Dataset, k: int, scaler: LabelScaler) -> KnnIndex:
    if len(train) == 0:
        raise ValidationError("empty training split")
    n = len(train)
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if k > n:
        raise ValidationError(f"k exceeds N: k={k}, N={n}")
    feats = np.ascontiguousarray(train.features())
    labels = np.ascontiguousarray(scaler.apply(train.label_matrix()))
    feats.setflags(write=False)
    labels.setflags(write=False)
    return KnnIndex(feats, labels, int(k), train.pool.ids, scaler)


def knn_predict(index: KnnIndex, x) -> np.ndarray:
    return index.predict(x)


# --------------------------------------------------------------------------
# multi-head MLP

def _sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(eq=False)
class MlpModel:
    w1: np.ndarray  # (h, d)
    b1: np.ndarray  # (h,)
    w2: np.ndarray  # (M, h)
    b2: np.ndarray  # (M,)
    seed: int = 0
    scaler: LabelScaler | None = None
    model_order: tuple[str, ...] = ()
    history: list[float] = field(default_factory=list)

    def __post_init__(self):
        h, d = self.w1.shape
        m = self.w2.shape[0]
        if self.b1.shape != (h,) or self.w2.shape != (m, h) or self.b2.shape != (m,):
            raise ValidationError("inconsistent MLP parameter shapes")
        if self.model_order and len(self.model_order) != m:
            raise ValidationError("model_order length does not match head count")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.w1.shape[1], self.w1.shape[0], self.w2.shape[0]

    @property
    def d(self) -> int:
        return self.w1.shape[1]

    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]

    def n_params(self) -> int:
        return sum(p.size for p in self.params())

    def copy(self) -> "MlpModel":
        return replace(
            self,
            w1=self.w1.copy(), b1=self.b1.copy(), w2=self.w2.copy(), b2=self.b2.copy(),
            history=list(self.history),
        )

    def predict(self, x) -> np.ndarray:
        q, single = _as_matrix(x, self.d)
        p = _forward(self, q)[2]
        return p[0] if single else p

    def to_dict(self) -> dict:
        d, h, m = self.dims
        return {
            "format": FORMAT,
            "version": VERSION,
            "kind": "mlp",
            "dims": [d, h, m],
            "seed": self.seed,
            "model_order": list(self.model_order),
            "scaler": _scaler_dict(self.scaler),
            "w1": self.w1.tolist(),
            "b1": self.b1.tolist(),
            "w2": self.w2.tolist(),
            "b2": self.b2.tolist(),
        }


def mlp_init(d: int, h: int, m: int, seed: int, *, scaler=None, model_order=()) -> MlpModel:
    """Glorot-uniform weights from a SplitMix64 stream, zero biases.

    Draw order: all of ``w1`` row-major, then all of ``w2`` row-major.
    """
    if min(d, h, m) < 1:
        raise ValidationError("d, h and M must all be >= 1")
    rng = SplitMix64(seed)

    def glorot(rows, cols):
        limit = math.sqrt(6.0 / (rows + cols))
        vals = [limit * (2.0 * rng.uniform() - 1.0) for _ in range(rows * cols)]
        return np.array(vals).reshape(rows, cols)

    w1 = glorot(h, d)
    w2 = glorot(m, h)
    return MlpModel(w1, np.zeros(h), w2, np.zeros(m), seed=seed, scaler=scaler,
                    model_order=tuple(model_order))


def _forward(model: MlpModel, x: np.ndarray):
    z1 = x @ model.w1.T + model.b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ model.w2.T + model.b2
    return z1, a1, _sigmoid(z2)


def mlp_forward(model: MlpModel, x) -> np.ndarray:
    return model.predict(x)


def _check_targets(y: np.ndarray) -> None:
    if not np.all((y >= 0.0) & (y <= 1.0)):
        raise ValidationError("targets must lie in [0, 1]")


def _cross_entropy(p: np.ndarray, y: np.ndarray) -> float:
    p = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    per_example = -(y * np.log(p) + (1.0 - y) * np.log1p(-p)).sum(axis=1)
    return float(per_example.mean())


def mlp_loss(model: MlpModel, x, y) -> float:
    """Mean over the batch of the summed per-head sigmoid cross-entropy."""
    x, _ = _as_matrix(x, model.d)
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if x.shape[0] == 0:
        raise ValidationError("empty batch")
    _check_targets(y)
    return _cross_entropy(_forward(model, x)[2], y)


def mlp_grad(model: MlpModel, x, y) -> tuple[float, list[np.ndarray]]:
    """Loss and gradients w.r.t. (w1, b1, w2, b2)."""
    x, _ = _as_matrix(x, model.d)
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    n = x.shape[0]
    z1, a1, p = _forward(model, x)
    loss = _cross_entropy(p, y)
    # d(CE)/d(logit) = p - y for the sigmoid head
    dz2 = (p - y) / n
    gw2 = dz2.T @ a1
    gb2 = dz2.sum(axis=0)
    dz1 = (dz2 @ model.w2) * (z1 > 0)
    gw1 = dz1.T @ x
    gb1 = dz1.sum(axis=0)
    return loss, [gw1, gb1, gw2, gb2]


def fit_arrays(model: MlpModel, x, y, *, epochs: int, lr: float, batch_size: int, seed: int,
               on_epoch: Callable[[int, float], None] | None = None) -> MlpModel:
    """Minibatch gradient descent with SplitMix64-shuffled batches.

    Returns a new model; ``model`` is untouched. ``history`` on the result
    holds the initial full-batch loss followed by the mean training loss of
    every epoch.
    """
    if epochs < 1 or batch_size < 1 or lr < 0:
        raise ValidationError("epochs and batch_size must be positive, lr nonnegative")
    x, _ = _as_matrix(x, model.d)
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if x.shape[0] == 0:
        raise ValidationError("empty training split")
    _check_targets(y)
    out = model.copy()
    out.history = [mlp_loss(out, x, y)]
    rng = SplitMix64(seed)
    n = x.shape[0]
    for epoch in range(epochs):
        order = np.array(rng.permutation(n), dtype=np.int64)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            loss, grads = mlp_grad(out, x[idx], y[idx])
            total += loss * idx.size
            for p, g in zip(out.params(), grads):
                p -= lr * g
        out.history.append(total / n)
        if on_epoch is not None:
            on_epoch(epoch, out.history[-1])
    return out


def mlp_train(model: MlpModel, train: Dataset, scaler: LabelScaler, epochs: int, lr: float,
              batch_size: int, seed: int) -> MlpModel:
    if len(train) == 0:
        raise ValidationError("empty training split")
    if model.model_order and tuple(model.model_order) != train.pool.ids:
        raise ValidationError("model_order does not match the dataset pool")
    y = scaler.apply(train.label_matrix())
    out = fit_arrays(model, train.features(), y, epochs=epochs, lr=lr, batch_size=batch_size, seed=seed)
    out.scaler = scaler
    out.model_order = train.pool.ids
    return out


def gradient_check(model: MlpModel, x, y, epsilon: float = 1e-5) -> float:
    """Max relative error between backprop and central differences.

    The denominator for each parameter is ``max(|analytic|, 1e-8)``.
    """
    if not 0 < epsilon <= 1e-2:
        raise ValidationError("epsilon must lie in (0, 1e-2]")
    _, grads = mlp_grad(model, x, y)
    probe = model.copy()
    worst = 0.0
    for p, g in zip(probe.params(), grads):
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            up = mlp_loss(probe, x, y)
            flat[i] = orig - epsilon
            down = mlp_loss(probe, x, y)
            flat[i] = orig
            fd = (up - down) / (2.0 * epsilon)
            err = abs(fd - gflat[i]) / max(abs(gflat[i]), 1e-8)
            worst = max(worst, err)
    return worst


# --------------------------------------------------------------------------
# serialization

def estimator_to_json(est: KnnIndex | MlpModel) -> str:
    return json.dumps(est.to_dict())


def estimator_from_json(doc: bytes | str) -> KnnIndex | MlpModel:
    try:
        obj = json.loads(doc)
    except json.JSONDecodeError as e:
        raise ValidationError(f"estimator: invalid JSON ({e})") from e
    if obj.get("format") != FORMAT or obj.get("version") != VERSION:
        raise ValidationError("estimator: unknown format or version")
    sc = obj.get("scaler")
    scaler = None if sc is None else LabelScaler(float(sc["lo"]), float(sc["hi"]))
    order = tuple(obj["model_order"])
    if obj["kind"] == "knn":
        feats = np.array(obj["features"], dtype=np.float64)
        labels = np.array(obj["labels"], dtype=np.float64).reshape(feats.shape[0], len(order))
        return KnnIndex(feats, labels, int(obj["k"]), order, scaler)
    if obj["kind"] == "mlp":
        d, h, m = obj["dims"]
        return MlpModel(
            np.array(obj["w1"], dtype=np.float64).reshape(h, d),
            np.array(obj["b1"], dtype=np.float64).reshape(h),
            np.array(obj["w2"], dtype=np.float64).reshape(m, h),
            np.array(obj["b2"], dtype=np.float64).reshape(m),
            seed=int(obj["seed"]),
            scaler=scaler,
            model_order=order,
        )
    raise ValidationError(f"estimator: unknown kind {obj['kind']!r}")


def predict_matrix(estimator, features: np.ndarray) -> np.ndarray:
    """N x M estimates for a feature matrix, for any estimator with ``predict``."""
    if features.shape[0] == 0:
        return np.zeros((0, len(estimator.model_order)))
    return np.atleast_2d(estimator.predict(features))

