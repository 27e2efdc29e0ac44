"""Accuracy, majority baseline, paired bootstrap test and k-fold cross-validation."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .corpus import Dataset
from .embeddings import WordVectorTable

__all__ = [
    "PredictionSet",
    "accuracy",
    "predict_dataset",
    "majority_label",
    "majority_baseline",
    "bootstrap_test",
    "fold_assignment",
    "CVResult",
    "cross_validate",
    "render_comparison",
]


@dataclass(frozen=True)
class PredictionSet:
    """Parallel ids, gold label sets and predicted labels.

    ``gold[i]`` is a tuple of acceptable labels; a prediction is correct if
    it is any of them.
    """

    ids: Tuple[str, ...]
    gold: Tuple[Tuple[str, ...], ...]
    predicted: Tuple[str, ...]

    def __post_init__(self):
        if not len(self.ids) == len(self.gold) == len(self.predicted):
            raise ValueError("ids, gold and predicted must have equal lengths")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("instance ids must be unique")

    def __len__(self) -> int:
        return len(self.ids)

    def correct(self) -> np.ndarray:
        return np.array([p in g for p, g in zip(self.predicted, self.gold)], dtype=bool)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for i, g, p in zip(self.ids, self.gold, self.predicted):
                f.write(json.dumps({"id": i, "gold": list(g), "predicted": p}, ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, path) -> "PredictionSet":
        ids, gold, pred = [], [], []
        with open(path, encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    row = json.loads(line)
                    ids.append(row["id"])
                    g = row["gold"]
                    gold.append(tuple(g) if isinstance(g, list) else (g,))
                    pred.append(row["predicted"])
        return cls(tuple(ids), tuple(gold), tuple(pred))


def accuracy(preds: PredictionSet) -> float:
    if len(preds) == 0:
        raise ValueError("accuracy of an empty prediction set is undefined")
    return float(preds.correct().mean())


def _ids(dataset: Dataset) -> Tuple[str, ...]:
    ids = tuple(inst.id or str(i) for i, inst in enumerate(dataset.instances))
    if len(set(ids)) != len(ids):
        ids = tuple(f"{i}:{x}" for i, x in enumerate(ids))
    return ids


def predict_dataset(model, dataset: Dataset, table: WordVectorTable) -> PredictionSet:
    labels = model.labels
    pred = tuple(labels[model.predict(inst, table)] for inst in dataset.instances)
    return PredictionSet(_ids(dataset), tuple(dataset.gold(i) for i in range(len(dataset))), pred)


def majority_label(train_set: Dataset) -> str:
    """Most frequent training label; ties go to the lowest label index."""
    if len(train_set) == 0:
        raise ValueError("majority baseline needs a non-empty training set")
    counts = Counter(train_set.labels())
    best = min(counts, key=lambda idx: (-counts[idx], idx))
    return train_set.scheme.labels[best]


def majority_baseline(train_set: Dataset, eval_set: Dataset) -> PredictionSet:
    label = majority_label(train_set)
    return PredictionSet(
        _ids(eval_set), tuple(eval_set.gold(i) for i in range(len(eval_set))), (label,) * len(eval_set)
    )


def bootstrap_test(
    pred_a: PredictionSet, pred_b: PredictionSet, n_resamples: int = 10000, seed: int = 0, chunk: int = 1000
) -> float:
    """One-sided paired bootstrap p-value for "a is more accurate than b".

    The p-value is the fraction of resamples on which a does not beat b;
    ties count against a.
    """
    if sorted(pred_a.ids) != sorted(pred_b.ids):
        raise ValueError("prediction sets cover different instance ids")
    pos_b = {i: n for n, i in enumerate(pred_b.ids)}
    order = [pos_b[i] for i in pred_a.ids]
    diff = pred_a.correct().astype(np.int64) - pred_b.correct()[order].astype(np.int64)
    n = diff.size
    if n == 0:
        raise ValueError("cannot test empty prediction sets")
    rng = np.random.default_rng(seed)
    not_better = 0
    done = 0
    while done < n_resamples:
        m = min(chunk, n_resamples - done)
        idx = rng.integers(0, n, size=(m, n))
        not_better += int(np.count_nonzero(diff[idx].sum(axis=1) <= 0))
        done += m
    return not_better / n_resamples


def fold_assignment(n: int, folds: int, seed: int = 0) -> List[List[int]]:
    """Seeded partition of ``range(n)`` into folds whose sizes differ by at most one."""
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if n < folds:
        raise ValueError(f"{n} instances cannot fill {folds} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return [sorted(int(i) for i in perm[f::folds]) for f in range(folds)]


@dataclass
class CVResult:
    mean_accuracy: float
    fold_accuracies: List[float]
    folds: List[List[int]]


TrainFn = Callable[[Dataset, Dataset], Callable[[Dataset], PredictionSet]]


def cross_validate(
    dataset: Dataset,
    folds: int = 7,
    model_config=None,
    train_config=None,
    table: Optional[WordVectorTable] = None,
    fit: Optional[TrainFn] = None,
    seed: int = 0,
) -> CVResult:
    """Hold each fold out once; the next fold (cyclically) is dev for early stopping.

    ``fit(train, dev)`` may replace neural training; it returns a function
    from an evaluation dataset to a PredictionSet.
    """
    parts = fold_assignment(len(dataset), folds, seed)
    if fit is None:
        if model_config is None or train_config is None or table is None:
            raise ValueError("cross_validate needs model_config, train_config and table, or fit")
        from .training import train

        def fit(train_part, dev_part):
            model, _ = train(train_part, dev_part, model_config, train_config, table)
            return lambda ds: predict_dataset(model, ds, table)

    accs = []
    for f in range(folds):
        dev_f = (f + 1) % folds
        train_idx = [i for g in range(folds) if g not in (f, dev_f) for i in parts[g]]
        predictor = fit(dataset.subset(train_idx), dataset.subset(parts[dev_f]))
        accs.append(accuracy(predictor(dataset.subset(parts[f]))))
    return CVResult(float(np.mean(accs)), accs, parts)


def render_comparison(rows: Sequence[Tuple[str, float]], title: str = "") -> str:
    """Two-column model/accuracy table, accuracies given as fractions."""
    width = max([len(name) for name, _ in rows] + [5])
    lines = []
    if title:
        lines.append(title)
    lines.append(f"{'Model':<{width}}  Accuracy")
    lines.append("-" * (width + 10))
    for name, acc in rows:
        lines.append(f"{name:<{width}}  {100 * acc:8.2f}")
    return "\n".join(lines)
