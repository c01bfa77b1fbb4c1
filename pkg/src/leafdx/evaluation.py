"""Stratified 7:3 splits, repeated trials, confusion matrices and accuracy."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import mlp
from .dataset_io import LabeledSample, class_names
from .trainers import TrainerConfig, TrainReport, train

DEFAULT_RATIO = 0.7
DEFAULT_TRIALS = 10


class EvaluationError(ValueError):
    pass


@dataclass
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    counts: np.ndarray

    @classmethod
    def from_predictions(cls, y_true, y_pred, n_classes: int) -> "ConfusionMatrix":
        cm = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(cm, (np.asarray(y_true, dtype=np.int64), np.asarray(y_pred, dtype=np.int64)), 1)
        return cls(cm)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def one_vs_rest(self, c: int) -> tuple[int, int, int, int]:
        """(TP, TN, FP, FN) for class ``c`` against all others."""
        cm = self.counts
        tp = int(cm[c, c])
        fp = int(cm[:, c].sum()) - tp
        fn = int(cm[c, :].sum()) - tp
        return tp, self.total - tp - fp - fn, fp, fn


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def accuracy_binary(tp: int, tn: int, fp: int, fn: int) -> float:
    total = tp + tn + fp + fn
    if total <= 0:
        raise EvaluationError("accuracy of an empty count set")
    return (tp + tn) / total


def overall_accuracy(cm: ConfusionMatrix) -> float:
    if cm.counts.size == 0 or cm.total == 0:
        raise EvaluationError("empty confusion matrix")
    return float(np.trace(cm.counts)) / cm.total


def per_class_accuracy(cm: ConfusionMatrix) -> list[float]:
    return [accuracy_binary(*cm.one_vs_rest(c)) for c in range(len(cm.counts))]


def micro_accuracy(cm: ConfusionMatrix) -> float:
    """Pooled one-vs-rest accuracy: sum of (TP+TN) over sum of totals.

    Equals 1 - 2 * errors / (C * total).
    """
    C = len(cm.counts)
    num = sum(tp + tn for tp, tn, _, _ in map(cm.one_vs_rest, range(C)))
    return num / (C * cm.total)


def split_stratified(samples: Sequence, labels: Sequence[int], ratio: float = DEFAULT_RATIO,
                     seed: int = 0) -> tuple[list[int], list[int]]:
    """Indices of a per-class shuffled split; each class keeps round(ratio * size).

    Rounding is half-up, clamped so every class keeps at least one sample
    on each side. Classes are visited in ascending label order with one
    seeded generator, so the split is a pure function of (labels, seed).
    """
    if not 0 < ratio < 1:
        raise EvaluationError("ratio must lie strictly between 0 and 1")
    if len(samples) != len(labels):
        raise EvaluationError("samples and labels differ in length")
    by_class: dict[int, list[int]] = defaultdict(list)
    for i, y in enumerate(labels):
        by_class[int(y)].append(i)
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for c in sorted(by_class):
        members = by_class[c]
        if len(members) < 2:
            raise EvaluationError(f"class {c} has fewer than 2 samples")
        order = [members[j] for j in rng.permutation(len(members))]
        n_train = min(max(round_half_up(ratio * len(members)), 1), len(members) - 1)
        train_idx.extend(order[:n_train])
        test_idx.extend(order[n_train:])
    return sorted(train_idx), sorted(test_idx)


@dataclass
class Pools:
    train: list[LabeledSample]
    test: list[LabeledSample]


def split_samples(samples: Sequence[LabeledSample], ratio: float = DEFAULT_RATIO,
                  seed: int = 0) -> Pools:
    """Split original images; rotated copies follow their original into training.

    Test pools only ever hold originals.
    """
    originals = [s for s in samples if not s.is_augmented]
    tr, te = split_stratified(originals, [s.label.index for s in originals], ratio, seed)
    train_origins = {originals[i].source_id for i in tr}
    train = [s for s in samples if s.origin in train_origins]
    test = [originals[i] for i in te]
    return Pools(train, test)


@dataclass
class TrialResult:
    seed: int
    accuracy: float
    confusion: ConfusionMatrix
    report: TrainReport | None = None

    def to_dict(self) -> dict:
        return {"seed": self.seed, "accuracy": self.accuracy,
                "confusion": self.confusion.counts.tolist(),
                "stop_reason": self.report.stop_reason if self.report else None,
                "epochs_run": self.report.epochs_run if self.report else None}


@dataclass
class TrialsSummary:
    algorithm: str
    n_hidden: int
    trials: list[TrialResult] = field(default_factory=list)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([t.accuracy for t in self.trials]))

    def to_dict(self) -> dict:
        return {"algorithm": self.algorithm, "n_hidden": self.n_hidden,
                "trials": [t.to_dict() for t in self.trials],
                "mean_accuracy": self.mean_accuracy}


def fit_model(train_samples: Sequence[LabeledSample], cfg: TrainerConfig, n_hidden: int,
              n_classes: int | None = None, init_seed: int | None = None
              ) -> tuple[mlp.Model, TrainReport]:
    """Standardize on the training rows, initialise, train."""
    X = np.array([s.features for s in train_samples])
    y = np.array([s.label.index for s in train_samples])
    names = class_names(train_samples)
    n_classes = n_classes or len(names)
    Xs, st = mlp.standardize(X)
    data = mlp.TrainingSet(Xs, mlp.one_hot(y, n_classes))
    p0 = mlp.init_params(X.shape[1], n_hidden, n_classes,
                         cfg.seed if init_seed is None else init_seed)
    report = train(p0, data, cfg)
    names = names + [f"class{i}" for i in range(len(names), n_classes)]
    return mlp.Model(report.final_params, st, names), report


def evaluate(model: mlp.Model, test_samples: Sequence[LabeledSample]) -> ConfusionMatrix:
    X = np.array([s.features for s in test_samples])
    y = np.array([s.label.index for s in test_samples])
    return ConfusionMatrix.from_predictions(y, model.predict(X), model.params.n_out)


def run_trial(samples: Sequence[LabeledSample], cfg: TrainerConfig, n_hidden: int, seed: int,
              ratio: float = DEFAULT_RATIO) -> TrialResult:
    n_classes = len(class_names(samples))
    pools = split_samples(samples, ratio, seed)
    model, report = fit_model(pools.train, cfg, n_hidden, n_classes, init_seed=seed)
    cm = evaluate(model, pools.test)
    return TrialResult(seed=seed, accuracy=overall_accuracy(cm), confusion=cm, report=report)


def run_trials(samples: Sequence[LabeledSample], cfg: TrainerConfig, n_hidden: int = 20,
               n_trials: int = DEFAULT_TRIALS, base_seed: int = 0,
               ratio: float = DEFAULT_RATIO, jobs: int = 1) -> TrialsSummary:
    """Trial i splits with seed base_seed + i and initialises with the same seed."""
    if n_trials < 1:
        raise EvaluationError("n_trials must be >= 1")
    seeds = [base_seed + i for i in range(n_trials)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(run_trial, [samples] * n_trials, [cfg] * n_trials,
                                  [n_hidden] * n_trials, seeds, [ratio] * n_trials))
    else:
        results = [run_trial(samples, cfg, n_hidden, s, ratio) for s in seeds]
    results.sort(key=lambda t: t.seed)
    return TrialsSummary(cfg.algorithm, n_hidden, results)
