"""Training loop, AdamW optimizer, and evaluation metrics.

Metrics follow the usual multiclass conventions: a 10x10 confusion matrix
(rows = true class), per-class precision/recall/F1 with 0/0 defined as 0,
and unweighted macro averages (micro averages are also available since the
benchmarks are class-balanced and the two nearly coincide).
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .data import Dataset, batches
from .model import Model


class NumericalError(RuntimeError):
    """Raised when training numerics break down (NaN loss or gradient)."""


class AdamW:
    """Adam with decoupled weight decay.

    The decay step p <- p - lr*wd*p is applied separately from the
    bias-corrected moment update, so with zero gradients the parameters
    undergo pure multiplicative decay.
    """

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01):
        self.params = list(params)  # [(name, Tensor)]
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {name: np.zeros_like(t.data) for name, t in self.params}
        self.v = {name: np.zeros_like(t.data) for name, t in self.params}

    def zero_grad(self):
        for _, t in self.params:
            t.zero_grad()

    def step(self):
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, p in self.params:
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            if np.any(np.isnan(g)):
                raise NumericalError(f"NaN gradient in parameter {name!r}")
            if self.weight_decay:
                p.data = p.data - self.lr * self.weight_decay * p.data
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data = p.data - self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


class ConfusionMatrix:
    """Per-class prediction counts; rows are true classes, columns predicted."""

    def __init__(self, n_classes: int = 10):
        self.counts = np.zeros((n_classes, n_classes), dtype=np.int64)

    @property
    def n_classes(self):
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def update(self, true_labels, predicted):
        np.add.at(self.counts, (np.asarray(true_labels), np.asarray(predicted)), 1)

    def merge(self, other: "ConfusionMatrix"):
        self.counts += other.counts

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total if self.total else 0.0

    def per_class(self):
        """Arrays of per-class (precision, recall, f1), 0/0 counted as 0."""
        tp = np.diag(self.counts).astype(float)
        fp = self.counts.sum(axis=0) - tp
        fn = self.counts.sum(axis=1) - tp
        with np.errstate(invalid="ignore", divide="ignore"):
            precision = np.where(tp + fp > 0, tp / (tp + fp), 0.0)
            recall = np.where(tp + fn > 0, tp / (tp + fn), 0.0)
            f1 = np.where(precision + recall > 0, 2 * precision * recall / (precision + recall), 0.0)
        return precision, recall, f1

    def macro(self):
        precision, recall, f1 = self.per_class()
        return float(precision.mean()), float(recall.mean()), float(f1.mean())

    def micro(self):
        tp = np.diag(self.counts).astype(float)
        fp = self.counts.sum(axis=0) - tp
        fn = self.counts.sum(axis=1) - tp
        precision = tp.sum() / (tp.sum() + fp.sum()) if tp.sum() + fp.sum() else 0.0
        recall = tp.sum() / (tp.sum() + fn.sum()) if tp.sum() + fn.sum() else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return float(precision), float(recall), float(f1)

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            for row in self.counts:
                writer.writerow([int(c) for c in row])


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    test_accuracy: float
    precision: float
    recall: float
    f1: float
    seconds: float


def evaluate(model: Model, dataset: Dataset, batch_size: int = 256):
    """Run the test split through the model and tally a confusion matrix."""
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    cm = ConfusionMatrix(model.arch["n_classes"])
    for images, labels in batches(dataset, batch_size, shuffle=False):
        logits = model.forward(images)
        predicted = logits.data.argmax(axis=1)  # lowest index wins ties
        cm.update(labels, predicted)
    precision, recall, f1 = cm.macro()
    return cm, {"accuracy": cm.accuracy, "precision": precision, "recall": recall, "f1": f1}


def train(
    model: Model,
    train_set: Dataset,
    test_set: Dataset,
    epochs: int,
    lr: float = 1e-3,
    batch_size: int = 32,
    seed: int = 42,
    weight_decay: float = 0.01,
    clock=time.perf_counter,
    progress=None,
):
    """Seeded epoch loop: shuffle, forward, loss, backward, AdamW step.

    Returns the per-epoch metrics (evaluated on `test_set` after each
    epoch).  Fully deterministic under `seed` apart from the wall-clock
    column; pass a fixed `clock` for byte-reproducible artifacts.
    """
    optimizer = AdamW(model.parameters(), lr=lr, weight_decay=weight_decay)
    history: list[EpochMetrics] = []
    for epoch in range(epochs):
        started = clock()
        losses = []
        epoch_seed = seed * 1_000_003 + epoch
        for batch_index, (images, labels) in enumerate(batches(train_set, batch_size, seed=epoch_seed)):
            optimizer.zero_grad()
            logits = model.forward(images)
            loss = T.softmax_cross_entropy(logits, labels)
            if not np.isfinite(loss.data):
                raise NumericalError(
                    f"loss became non-finite at epoch {epoch}, batch {batch_index}; "
                    f"last finite losses: {losses[-5:]}"
                )
            loss.backward()
            optimizer.step()
            losses.append(float(loss.data))
        _, m = evaluate(model, test_set)
        entry = EpochMetrics(
            epoch=epoch,
            train_loss=float(np.mean(losses)) if losses else float("nan"),
            test_accuracy=m["accuracy"],
            precision=m["precision"],
            recall=m["recall"],
            f1=m["f1"],
            seconds=clock() - started,
        )
        history.append(entry)
        if progress is not None:
            progress(entry)
    return history


METRICS_HEADER = ["epoch", "train_loss", "test_accuracy", "precision", "recall", "f1", "seconds"]


def write_metrics_csv(path, history):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(METRICS_HEADER)
        for m in history:
            writer.writerow(
                [m.epoch, repr(m.train_loss), repr(m.test_accuracy), repr(m.precision), repr(m.recall), repr(m.f1), repr(m.seconds)]
            )
