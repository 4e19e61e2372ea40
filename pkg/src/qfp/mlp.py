"""From-scratch MLP classifier: stratified split, z-scoring, [d, 25, 10, 5] ReLU net, Adam.

Everything is float64 numpy and seeded, so a run is reproducible bit-for-bit.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

HIDDEN = (25, 10)
N_CLASSES = 5
PROB_FLOOR = 1e-12
DEGENERATE_STD = 1e-12


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]
    n_qubits: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features must be N x d with one label per row")
        if self.features.shape[0] == 0:
            raise ValueError("empty dataset")
        if self.labels.min() < 0 or self.labels.max() >= len(self.class_names):
            raise ValueError("label index out of range")

    def subset(self, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.features[idx], self.labels[idx]


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


def stratified_split(labels: Sequence[int], fractions=(0.6, 0.2, 0.2), seed: int = 0) -> SplitIndices:
    """Per class: seeded shuffle, floor for train and val, remainder to test."""
    labels = np.asarray(labels, dtype=int)
    if abs(sum(fractions) - 1) > 1e-9:
        raise ValueError("fractions must sum to 1")
    rng = np.random.default_rng(seed)
    parts: tuple[list, list, list] = ([], [], [])
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if idx.size < 5:
            raise ValueError(f"class {cls} has {idx.size} members; at least 5 are required")
        idx = idx[rng.permutation(idx.size)]
        n_train = int(math.floor(fractions[0] * idx.size + 1e-9))
        n_val = int(math.floor(fractions[1] * idx.size + 1e-9))
        parts[0].append(idx[:n_train])
        parts[1].append(idx[n_train:n_train + n_val])
        parts[2].append(idx[n_train + n_val:])
    return SplitIndices(*(np.sort(np.concatenate(p)) for p in parts))


@dataclass
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, x: np.ndarray) -> np.ndarray:
        scale = np.where(self.std < DEGENERATE_STD, 1.0, self.std)
        return (np.asarray(x, dtype=float) - self.mean) / scale


def fit_scaler(train_features: np.ndarray) -> Scaler:
    x = np.asarray(train_features, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("need a nonempty 2-D training matrix")
    return Scaler(x.mean(axis=0), x.std(axis=0))


def apply(scaler: Scaler, features: np.ndarray) -> np.ndarray:
    return scaler.transform(features)


@dataclass
class MLPModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "MLPModel":
        return MLPModel([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def init_model(n_inputs: int, rng: np.random.Generator, hidden=HIDDEN, n_classes=N_CLASSES) -> MLPModel:
    """He-uniform weights, zero biases."""
    dims = [n_inputs, *hidden, n_classes]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = math.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MLPModel(weights, biases)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward_cache(model: MLPModel, x: np.ndarray) -> list[np.ndarray]:
    acts = [x]
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = acts[-1] @ w + b
        acts.append(_softmax(z) if i == len(model.weights) - 1 else np.maximum(z, 0.0))
    return acts


def forward(model: MLPModel, x: np.ndarray) -> np.ndarray:
    """Class probabilities for one sample (1-D) or a batch (2-D)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.dims[0]:
        raise ValueError(f"input has {x.shape[-1]} features, model expects {model.dims[0]}")
    return _forward_cache(model, x)[-1]


def loss(probs: np.ndarray, labels) -> float:
    """Mean cross-entropy -ln p[label], probabilities clamped at 1e-12."""
    probs = np.atleast_2d(probs)
    labels = np.atleast_1d(np.asarray(labels, dtype=int))
    p = probs[np.arange(labels.size), labels]
    return float(-np.log(np.maximum(p, PROB_FLOOR)).mean())


def backward(model: MLPModel, x: np.ndarray, y: np.ndarray) -> list[np.ndarray]:
    """Gradients of the mean batch loss, ordered like ``model.params()``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=int))
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    acts = _forward_cache(model, x)
    delta = acts[-1].copy()
    delta[np.arange(y.size), y] -= 1.0
    delta /= y.size
    grads: list[np.ndarray] = []
    for i in reversed(range(len(model.weights))):
        grads = [acts[i].T @ delta, delta.sum(axis=0)] + grads
        if i:
            # ReLU subgradient at 0 is 0.
            delta = (delta @ model.weights[i].T) * (acts[i] > 0)
    return grads


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_model(cls, model: MLPModel, **hyper) -> "AdamState":
        params = model.params()
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **hyper)


def adam_step(state: AdamState, model: MLPModel, grads: list[np.ndarray]) -> tuple[MLPModel, AdamState]:
    """Bias-corrected Adam update, applied in place; returns (model, state) for chaining."""
    params = model.params()
    if len(grads) != len(params) or any(g.shape != p.shape for g, p in zip(grads, params)):
        raise ValueError("gradient shapes do not match model parameters")
    state.step += 1
    t = state.step
    c1 = 1 - state.beta1**t
    c2 = 1 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return model, state


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,train_acc,val_loss,val_acc"]
        for e, row in enumerate(zip(self.train_loss, self.train_acc, self.val_loss, self.val_acc), start=1):
            lines.append(f"{e}," + ",".join("%.9g" % v for v in row))
        return "\n".join(lines) + "\n"


def train(
    dataset: Dataset,
    split: SplitIndices,
    seed: int = 0,
    epochs: int = 100,
    batch_size: int = 200,
    lr: float = 1e-3,
    hidden: Sequence[int] = HIDDEN,
) -> tuple[MLPModel, Scaler, TrainReport]:
    """Mini-batch Adam for a fixed number of epochs, no early stopping.

    Train loss/accuracy are running means over the epoch's batches; validation
    metrics are measured after the epoch.
    """
    rng = np.random.default_rng(seed)
    x_train, y_train = dataset.subset(split.train)
    x_val, y_val = dataset.subset(split.val)
    scaler = fit_scaler(x_train)
    x_train = scaler.transform(x_train)
    x_val = scaler.transform(x_val)
    model = init_model(x_train.shape[1], rng, tuple(hidden), len(dataset.class_names))
    state = AdamState.for_model(model, lr=lr)
    report = TrainReport()
    n = x_train.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        total_loss = 0.0
        correct = 0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            xb, yb = x_train[idx], y_train[idx]
            probs = forward(model, xb)
            total_loss += loss(probs, yb) * idx.size
            correct += int((probs.argmax(axis=1) == yb).sum())
            adam_step(state, model, backward(model, xb, yb))
        report.train_loss.append(total_loss / n)
        report.train_acc.append(correct / n)
        if x_val.shape[0]:
            pv = forward(model, x_val)
            report.val_loss.append(loss(pv, y_val))
            report.val_acc.append(float((pv.argmax(axis=1) == y_val).mean()))
        else:
            report.val_loss.append(float("nan"))
            report.val_acc.append(float("nan"))
    return model, scaler, report


def predict(model: MLPModel, scaler: Scaler, features: np.ndarray) -> np.ndarray:
    return forward(model, scaler.transform(features)).argmax(axis=1)


@dataclass
class EvalReport:
    class_names: tuple[str, ...]
    confusion: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    accuracy: float
    macro: tuple[float, float, float]
    weighted: tuple[float, float, float]

    def to_dict(self) -> dict:
        return {
            "class_names": list(self.class_names),
            "confusion": self.confusion.astype(int).tolist(),
            "per_class": {
                name: {
                    "precision": float(self.precision[i]),
                    "recall": float(self.recall[i]),
                    "f1": float(self.f1[i]),
                    "support": int(self.support[i]),
                }
                for i, name in enumerate(self.class_names)
            },
            "accuracy": self.accuracy,
            "macro_avg": dict(zip(("precision", "recall", "f1"), self.macro)),
            "weighted_avg": dict(zip(("precision", "recall", "f1"), self.weighted)),
            "total": int(self.support.sum()),
        }

    def table(self, display_names: Sequence[str] | None = None) -> str:
        names = list(display_names or self.class_names)
        width = max(12, *(len(s) for s in names))
        head = f"{'Encoding':<{width}}  {'Precision':>9}  {'Recall':>6}  {'F1':>6}  {'Support':>7}"
        rows = [head, "-" * len(head)]
        for i, name in enumerate(names):
            rows.append(
                f"{name:<{width}}  {self.precision[i]:>9.2f}  {self.recall[i]:>6.2f}  "
                f"{self.f1[i]:>6.2f}  {int(self.support[i]):>7d}"
            )
        total = int(self.support.sum())
        rows.append("-" * len(head))
        rows.append(f"{'Accuracy':<{width}}  {'-':>9}  {'-':>6}  {self.accuracy:>6.2f}  {total:>7d}")
        for label, (p, r, f) in (("Macro Avg", self.macro), ("Weighted Avg", self.weighted)):
            rows.append(f"{label:<{width}}  {p:>9.2f}  {r:>6.2f}  {f:>6.2f}  {total:>7d}")
        return "\n".join(rows) + "\n"


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    return np.divide(num, den, out=np.zeros_like(num, dtype=float), where=den > 0)


def report_from_confusion(confusion: np.ndarray, class_names: Sequence[str]) -> EvalReport:
    """Rows are true classes, columns predictions; zero denominators score 0."""
    conf = np.asarray(confusion, dtype=float)
    tp = np.diag(conf)
    support = conf.sum(axis=1)
    precision = _safe_div(tp, conf.sum(axis=0))
    recall = _safe_div(tp, support)
    f1 = _safe_div(2 * precision * recall, precision + recall)
    total = conf.sum()
    accuracy = float(tp.sum() / total) if total else 0.0
    macro = (float(precision.mean()), float(recall.mean()), float(f1.mean()))
    w = support / total if total else np.zeros_like(support)
    weighted = (float(precision @ w), float(recall @ w), float(f1 @ w))
    return EvalReport(tuple(class_names), conf.astype(int), precision, recall, f1,
                      support.astype(int), accuracy, macro, weighted)


def evaluate(model: MLPModel, scaler: Scaler, features: np.ndarray, labels: np.ndarray,
             class_names: Sequence[str]) -> EvalReport:
    k = len(class_names)
    pred = predict(model, scaler, features)
    conf = np.zeros((k, k), dtype=int)
    np.add.at(conf, (np.asarray(labels, dtype=int), pred), 1)
    return report_from_confusion(conf, class_names)


# -- persistence ----------------------------------------------------------------------

def model_to_dict(model: MLPModel, scaler: Scaler, **extra) -> dict:
    doc = {
        "dims": model.dims,
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "scaler": {"mean": scaler.mean.tolist(), "std": scaler.std.tolist()},
    }
    doc.update(extra)
    return doc


def save_model(path: str | Path, model: MLPModel, scaler: Scaler, **extra) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model, scaler, **extra), indent=1) + "\n")


def load_model(path: str | Path) -> tuple[MLPModel, Scaler, dict]:
    doc = json.loads(Path(path).read_text())
    model = MLPModel([np.asarray(w, dtype=float) for w in doc["weights"]],
                     [np.asarray(b, dtype=float) for b in doc["biases"]])
    if model.dims != doc["dims"]:
        raise ValueError(f"{path}: stored dims {doc['dims']} do not match weight shapes {model.dims}")
    scaler = Scaler(np.asarray(doc["scaler"]["mean"]), np.asarray(doc["scaler"]["std"]))
    return model, scaler, doc
