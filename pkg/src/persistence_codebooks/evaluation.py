"""Classification harness: stratified splits, a linear classifier, codebook sweeps."""

from __future__ import annotations

import csv
import io
import os
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .clustering import FitConfig, fit_codebook
from .diagram import PersistenceDiagram
from .encode import Encoding, encode_many
from .sampling import SamplingConfig


@dataclass(frozen=True, eq=False)
class LabeledFeatureSet:
    vectors: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        y = np.asarray(self.labels, dtype=int)
        if X.shape[0] != y.shape[0]:
            raise ValueError("vectors and labels differ in length")
        object.__setattr__(self, "vectors", X)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return self.labels.shape[0]

    def subset(self, idx) -> "LabeledFeatureSet":
        return LabeledFeatureSet(self.vectors[idx], self.labels[idx], self.class_count)


def stratified_split(labels, train_fraction: float = 0.8, seed: int | np.random.SeedSequence = 0):
    """Per-class random split; returns sorted ``(train_idx, test_idx)``.

    Each class contributes ``round(train_fraction * size)`` training samples,
    clamped so both sides get at least one.
    """
    labels = np.asarray(labels.labels if isinstance(labels, LabeledFeatureSet) else labels)
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        if len(members) < 2:
            raise ValueError(f"class {c} has fewer than two samples; cannot split")
        k = int(np.clip(round(train_fraction * len(members)), 1, len(members) - 1))
        perm = rng.permutation(members)
        train.append(perm[:k])
        test.append(perm[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


@dataclass(frozen=True, eq=False)
class LinearModel:
    weights: np.ndarray  # (d, K)
    bias: np.ndarray  # (K,)
    mean: np.ndarray
    scale: np.ndarray
    classes: np.ndarray

    def scores(self, X) -> np.ndarray:
        Z = (np.atleast_2d(np.asarray(X, dtype=float)) - self.mean) / self.scale
        return Z @ self.weights + self.bias

    def predict(self, X) -> np.ndarray:
        # argmax returns the first maximum, i.e. the lowest class id on ties
        return self.classes[np.argmax(self.scores(X), axis=1)]


def softmax_loss_grad(W: np.ndarray, b: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float):
    """Mean cross-entropy plus ``l2/2 * ||W||^2`` and its gradients.

    ``y`` holds class positions ``0..K-1``.
    """
    m = X.shape[0]
    S = X @ W + b
    lse = logsumexp(S, axis=1)
    loss = float(np.mean(lse - S[np.arange(m), y]) + 0.5 * l2 * np.sum(W * W))
    P = np.exp(S - lse[:, None])
    P[np.arange(m), y] -= 1.0
    P /= m
    return loss, X.T @ P + l2 * W, P.sum(axis=0)


def train_linear(
    train: LabeledFeatureSet,
    l2_strength: float = 1e-3,
    epochs: int = 2000,
    standardize: bool = True,
) -> LinearModel:
    """Multinomial logistic regression fitted by full-batch gradient descent.

    The step size is fixed at ``1/L`` with ``L`` an upper bound on the
    Lipschitz constant of the gradient, which makes training deterministic and
    monotone in the loss.
    """
    X, y = train.vectors, train.labels
    if len(y) == 0:
        raise ValueError("empty training set")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    classes = np.unique(y)
    d = X.shape[1]
    if standardize:
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale < 1e-12] = 1.0
    else:
        mean, scale = np.zeros(d), np.ones(d)
    if len(classes) == 1:
        return LinearModel(np.zeros((d, 1)), np.zeros(1), mean, scale, classes)
    Z = (X - mean) / scale
    yi = np.searchsorted(classes, y)
    K = len(classes)
    m = Z.shape[0]
    Zb = np.hstack([Z, np.ones((m, 1))])
    lip = 0.5 * np.linalg.norm(Zb, 2) ** 2 / m + l2_strength
    step = 1.0 / lip
    W, b = np.zeros((d, K)), np.zeros(K)
    for _ in range(epochs):
        _, gW, gb = softmax_loss_grad(W, b, Z, yi, l2_strength)
        W -= step * gW
        b -= step * gb
    return LinearModel(W, b, mean, scale, classes)


DEFAULT_L2_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)


def select_l2(
    train: LabeledFeatureSet,
    grid: Sequence[float] = DEFAULT_L2_GRID,
    folds: int = 5,
    epochs: int = 2000,
    seed: int | np.random.SeedSequence = 0,
) -> float:
    """Pick the regularization strength by stratified k-fold cross-validation.

    Folds are drawn from the training set only. Ties go to the stronger
    penalty, the simpler model.
    """
    grid = sorted(grid, reverse=True)
    if len(grid) == 1:
        return float(grid[0])
    y = train.labels
    smallest = np.bincount(y)[np.unique(y)].min()
    folds = int(min(folds, smallest))
    if folds < 2:
        return float(grid[0])
    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(y), dtype=int)
    for c in np.unique(y):
        members = rng.permutation(np.flatnonzero(y == c))
        fold_of[members] = np.arange(len(members)) % folds
    scores = np.zeros(len(grid))
    for f in range(folds):
        fit, held = np.flatnonzero(fold_of != f), np.flatnonzero(fold_of == f)
        for g, l2 in enumerate(grid):
            model = train_linear(train.subset(fit), l2, epochs)
            scores[g] += np.sum(model.predict(train.vectors[held]) == y[held])
    return float(grid[int(np.argmax(scores))])


def predict(model: LinearModel, vector) -> int | np.ndarray:
    X = np.asarray(vector, dtype=float)
    out = model.predict(X)
    return int(out[0]) if X.ndim == 1 else out


@dataclass
class ReportRow:
    encoding: str
    n_words: int
    weighted: bool
    accuracies: list[float] = field(default_factory=list)
    fit_seconds: float = 0.0
    encode_seconds: float = 0.0
    classify_seconds: float = 0.0

    @property
    def repetitions(self) -> int:
        return len(self.accuracies)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std_accuracy(self) -> float:
        return float(np.std(self.accuracies))

    @property
    def total_seconds(self) -> float:
        return self.fit_seconds + self.encode_seconds + self.classify_seconds


@dataclass
class ExperimentReport:
    rows: list[ReportRow]

    def row(self, encoding, n_words: int, weighted: bool | None = None) -> ReportRow:
        enc = Encoding(encoding).value
        for r in self.rows:
            if r.encoding == enc and r.n_words == n_words and (weighted is None or r.weighted == weighted):
                return r
        raise KeyError((enc, n_words, weighted))

    def accuracy_table(self) -> list[tuple]:
        """Everything except timings; identical seeds give identical tables."""
        return [(r.encoding, r.n_words, r.weighted, tuple(r.accuracies)) for r in self.rows]

    def to_csv(self, path: str | os.PathLike | None = None, timings: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["encoding", "n_words", "weighted", "repetitions", "mean_accuracy", "std_accuracy"]
        if timings:
            head += ["fit_seconds", "encode_seconds", "classify_seconds", "total_seconds"]
        w.writerow(head)
        for r in self.rows:
            line = [r.encoding, r.n_words, int(r.weighted), r.repetitions,
                    f"{r.mean_accuracy:.17g}", f"{r.std_accuracy:.17g}"]
            if timings:
                line += [f"{t:.6f}" for t in (r.fit_seconds, r.encode_seconds,
                                              r.classify_seconds, r.total_seconds)]
            w.writerow(line)
        text = buf.getvalue()
        if path is not None:
            tmp = f"{path}.tmp"
            with open(tmp, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        return text


def run_experiment(
    diagrams: Sequence[PersistenceDiagram],
    labels,
    encodings: Sequence[Encoding | str] = (Encoding.PBOW,),
    sizes: Sequence[int] = (50,),
    repetitions: int = 5,
    seed: int = 0,
    weighted: Sequence[bool] | bool = (True,),
    subsample_size: int = 10000,
    train_fraction: float = 0.8,
    l2_grid: Sequence[float] = DEFAULT_L2_GRID,
    epochs: int = 2000,
    cv_folds: int = 5,
) -> ExperimentReport:
    """Grid over (encoding, codebook size, weighting), averaged over repetitions.

    Each repetition draws one stratified split shared by every grid cell.
    Codebooks are fitted on the training diagrams only, and the classifier's
    L2 strength is chosen from ``l2_grid`` by cross-validation on the same
    training diagrams (pass a one-element grid to fix it).
    """
    labels = np.asarray(labels, dtype=int)
    if len(diagrams) != len(labels):
        raise ValueError("diagrams and labels differ in length")
    if isinstance(weighted, bool):
        weighted = (weighted,)
    encodings = [Encoding(e) for e in encodings]
    class_count = int(labels.max()) + 1
    rep_seeds = np.random.SeedSequence(seed).spawn(repetitions)
    splits = [stratified_split(labels, train_fraction, s.spawn(1)[0]) for s in rep_seeds]
    codebook_seeds = [int(s.generate_state(1)[0]) for s in rep_seeds]

    rows = []
    for enc in encodings:
        for n in sizes:
            for wflag in weighted:
                row = ReportRow(enc.value, int(n), bool(wflag))
                for (tr, te), cb_seed in zip(splits, codebook_seeds):
                    t0 = time.perf_counter()
                    sampling = SamplingConfig(n=subsample_size, weighted=bool(wflag), seed=cb_seed)
                    cb = fit_codebook(
                        [diagrams[i] for i in tr], enc.codebook_kind, int(n), sampling,
                        FitConfig(n_components=int(n), seed=cb_seed),
                    )
                    t1 = time.perf_counter()
                    X = encode_many(diagrams, cb, enc, normalized=True)
                    t2 = time.perf_counter()
                    train = LabeledFeatureSet(X[tr], labels[tr], class_count)
                    l2 = select_l2(train, l2_grid, cv_folds, epochs, cb_seed)
                    model = train_linear(train, l2, epochs)
                    acc = float(np.mean(model.predict(X[te]) == labels[te]))
                    t3 = time.perf_counter()
                    row.accuracies.append(acc)
                    row.fit_seconds += (t1 - t0) / repetitions
                    row.encode_seconds += (t2 - t1) / repetitions
                    row.classify_seconds += (t3 - t2) / repetitions
                rows.append(row)
    return ExperimentReport(rows)
