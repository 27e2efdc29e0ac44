"""Initialization, Adagrad, early stopping on dev accuracy, learning-rate grid search."""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import numcore as nc
from .corpus import Dataset, ensure_trees
from .embeddings import WordVectorTable
from .evaluation import accuracy, predict_dataset
from .models import Model, ModelConfig, is_bias, param_shapes
from .numcore import Tensor

logger = logging.getLogger(__name__)

__all__ = [
    "NumericalError",
    "TrainConfig",
    "AdagradState",
    "TrainingHistory",
    "ExperimentRecord",
    "init_params",
    "new_model",
    "cross_entropy",
    "adagrad_update",
    "train",
    "derive_seed",
    "grid_search",
    "write_records",
    "read_records",
    "render_table",
]

DEFAULT_RATES = (0.001, 0.01, 0.05, 0.1)


class NumericalError(ArithmeticError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    learning_rates: Tuple[float, ...] = DEFAULT_RATES
    max_epochs: int = 100
    patience: int = 5
    seed: int = 0
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0 or any(r <= 0 for r in self.learning_rates):
            raise ValueError("learning rates must be positive")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")

    def with_rate(self, rate: float, seed: Optional[int] = None) -> "TrainConfig":
        return TrainConfig(rate, self.learning_rates, self.max_epochs, self.patience,
                           self.seed if seed is None else seed, self.epsilon)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "learning_rates" in d:
            d["learning_rates"] = tuple(d["learning_rates"])
        return cls(**d)


def init_params(config: ModelConfig, seed: int) -> Dict[str, Tensor]:
    """Uniform ``±sqrt(6 / (fan_in + fan_out))`` weights and zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(config).items():
        if is_bias(name):
            data = np.zeros(shape)
        else:
            fan_out, fan_in = shape
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            data = rng.uniform(-bound, bound, size=shape)
        params[name] = Tensor(data, requires_grad=True, name=name)
    return params


def new_model(config: ModelConfig, labels: Sequence[str], seed: int) -> Model:
    return Model(config, init_params(config, seed), labels)


def cross_entropy(probs, gold: int) -> float:
    """``-log probs[gold]`` for an already-normalized distribution."""
    p = np.asarray(probs, dtype=np.float64)
    if not 0 <= gold < p.size:
        raise IndexError(f"gold index {gold} out of range for {p.size} labels")
    return float(-np.log(p[gold])) if p[gold] > 0 else math.inf


@dataclass
class AdagradState:
    accumulators: Dict[str, np.ndarray]
    epsilon: float = 1e-8

    @classmethod
    def zeros_like(cls, params: Dict[str, Tensor], epsilon: float = 1e-8) -> "AdagradState":
        return cls({n: np.zeros_like(t.data) for n, t in params.items()}, epsilon)


def adagrad_update(params: Dict[str, Tensor], grads: Dict[str, np.ndarray], state: AdagradState, lr: float) -> None:
    """In place: ``acc += g**2``; ``p -= lr * g / (sqrt(acc) + eps)``."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for parameter {name}")
    for name, g in grads.items():
        acc = state.accumulators[name]
        acc += g * g
        params[name].data -= lr * g / (np.sqrt(acc) + state.epsilon)


@dataclass
class TrainingHistory:
    train_loss: List[float] = field(default_factory=list)
    dev_accuracy: List[float] = field(default_factory=list)
    best_epoch: int = 0
    best_dev_accuracy: float = -1.0
    best_params: Optional[Dict[str, np.ndarray]] = None
    tree_fallbacks: int = 0

    def to_dict(self) -> dict:
        return {
            "train_loss": self.train_loss,
            "dev_accuracy": self.dev_accuracy,
            "best_epoch": self.best_epoch,
            "best_dev_accuracy": self.best_dev_accuracy,
            "tree_fallbacks": self.tree_fallbacks,
        }


def train_step(model: Model, inst, gold: int, table: WordVectorTable, state: AdagradState, lr: float) -> float:
    params = model.params
    names = list(params)
    with nc.Tape() as tape:
        loss = nc.softmax_cross_entropy(model.logits(inst, table), gold)
    value = float(loss.data)
    if not math.isfinite(value):
        raise NumericalError(f"non-finite loss on instance {inst.id!r}")
    grads = tape.backward(loss, [params[n] for n in names])
    adagrad_update(params, dict(zip(names, grads)), state, lr)
    return value


def train(
    train_set: Dataset,
    dev_set: Dataset,
    model_config: ModelConfig,
    train_config: TrainConfig,
    table: WordVectorTable,
) -> Tuple[Model, TrainingHistory]:
    """Per-instance Adagrad with dev-accuracy early stopping.

    Each epoch visits the training set in a fresh seeded shuffle.  Training
    stops after ``patience`` epochs without a strict dev improvement (so
    ties keep the earlier epoch) or at ``max_epochs``; the returned model
    holds the parameters of the best dev epoch.
    """
    if len(train_set) == 0 or len(dev_set) == 0:
        raise ValueError("training and development sets must be non-empty")
    if train_set.scheme.labels != dev_set.scheme.labels:
        raise ValueError(f"label schemes differ: {train_set.scheme.name} vs {dev_set.scheme.name}")
    if model_config.num_labels != len(train_set.scheme):
        raise ValueError(f"model has {model_config.num_labels} outputs, scheme has {len(train_set.scheme)} labels")
    if model_config.k != table.dim:
        raise ValueError(f"model expects k={model_config.k}, embeddings have k={table.dim}")
    history = TrainingHistory()
    if model_config.architecture == "TREE_LSTM":
        train_set, n1 = ensure_trees(train_set)
        dev_set, n2 = ensure_trees(dev_set)
        history.tree_fallbacks = n1 + n2

    init_seq, shuffle_seq = np.random.SeedSequence(train_config.seed).spawn(2)
    model = new_model(model_config, train_set.scheme.labels, int(init_seq.generate_state(1)[0]))
    model.scheme = train_set.scheme
    rng = np.random.default_rng(shuffle_seq)
    state = AdagradState.zeros_like(model.params, train_config.epsilon)
    golds = train_set.labels()
    order = np.arange(len(train_set))
    stale = 0
    for epoch in range(1, train_config.max_epochs + 1):
        rng.shuffle(order)
        total = 0.0
        for i in order:
            total += train_step(model, train_set[i], golds[i], table, state, train_config.learning_rate)
        history.train_loss.append(total / len(order))
        dev_acc = accuracy(predict_dataset(model, dev_set, table))
        history.dev_accuracy.append(dev_acc)
        logger.debug("epoch %d loss %.4f dev %.4f", epoch, history.train_loss[-1], dev_acc)
        if dev_acc > history.best_dev_accuracy:
            history.best_dev_accuracy = dev_acc
            history.best_epoch = epoch
            history.best_params = model.snapshot()
            stale = 0
        else:
            stale += 1
            if stale >= train_config.patience:
                break
    model.restore(history.best_params)
    return model, history


# ---------------------------------------------------------------- grid search


def derive_seed(base_seed: int, cell_index: int) -> int:
    """Per-cell seed that depends only on the base seed and the cell's position."""
    return int(np.random.SeedSequence([base_seed, cell_index]).generate_state(1)[0])


@dataclass
class ExperimentRecord:
    config: ModelConfig
    learning_rate: float
    seed: int
    dev_accuracy: Optional[float] = None
    test_accuracy: Optional[float] = None
    best_epoch: Optional[int] = None
    runtime: float = 0.0
    train_loss: List[float] = field(default_factory=list)
    dev_history: List[float] = field(default_factory=list)
    error: Optional[str] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["config"] = self.config.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentRecord":
        d = dict(d)
        d["config"] = ModelConfig.from_dict(d["config"])
        return cls(**d)

    def sort_key(self):
        c = self.config
        return (ARCH_ORDER.index(c.architecture), c.k, POOL_ORDER.index(c.pooling), c.num_hidden_layers, self.learning_rate)


ARCH_ORDER = ("FF", "LSTM", "TREE_LSTM")
POOL_ORDER = ("max", "mean", "sum", "last")


def _run_cell(args) -> ExperimentRecord:
    train_set, dev_set, test_set, model_config, train_config, table = args
    record = ExperimentRecord(model_config, train_config.learning_rate, train_config.seed)
    start = time.perf_counter()
    try:
        model, history = train(train_set, dev_set, model_config, train_config, table)
        record.dev_accuracy = history.best_dev_accuracy
        record.best_epoch = history.best_epoch
        record.train_loss = history.train_loss
        record.dev_history = history.dev_accuracy
        if test_set is not None:
            if model_config.architecture == "TREE_LSTM":
                test_set, _ = ensure_trees(test_set)
            record.test_accuracy = accuracy(predict_dataset(model, test_set, table))
    except (NumericalError, ValueError, FloatingPointError) as e:
        record.error = f"{type(e).__name__}: {e}"
        logger.warning("grid cell %s lr=%g failed: %s", model_config, train_config.learning_rate, e)
    record.runtime = time.perf_counter() - start
    return record


def _preference(rec: ExperimentRecord):
    # larger dev accuracy first; then fewer layers, smaller k, lower rate
    return (-rec.dev_accuracy, rec.config.num_hidden_layers, rec.config.k, rec.learning_rate)


def grid_search(
    train_set: Dataset,
    dev_set: Dataset,
    model_configs: Sequence[ModelConfig],
    train_config: TrainConfig,
    table: WordVectorTable,
    rates: Optional[Sequence[float]] = None,
    test_set: Optional[Dataset] = None,
    jobs: int = 1,
) -> Tuple[List[ExperimentRecord], Optional[ExperimentRecord]]:
    """Train every (config, rate) cell; return all records and the best by dev accuracy."""
    rates = tuple(rates if rates is not None else train_config.learning_rates)
    cells = []
    for mc in model_configs:
        for rate in rates:
            seed = derive_seed(train_config.seed, len(cells))
            cells.append((train_set, dev_set, test_set, mc, train_config.with_rate(rate, seed), table))
    if not cells:
        raise ValueError("grid has no cells")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_cell, cells))
    else:
        records = [_run_cell(c) for c in cells]
    ok = [r for r in records if r.error is None]
    best = min(ok, key=_preference) if ok else None
    return records, best


def write_records(records: Sequence[ExperimentRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(r.to_dict()) + "\n")


def read_records(path) -> List[ExperimentRecord]:
    with open(path, encoding="utf-8") as f:
        return [ExperimentRecord.from_dict(json.loads(line)) for line in f if line.strip()]


def render_table(records: Sequence[ExperimentRecord], metric: str = "auto") -> str:
    """Architecture x k rows, depth x pooling columns, in percent.

    Each cell shows the best rate for that configuration.  ``*`` marks the
    best configuration of every architecture by dev accuracy.  ``metric``
    is ``test``, ``dev`` or ``auto`` (test when every record has it).
    """
    ok = [r for r in records if r.error is None]
    if metric == "auto":
        metric = "test" if ok and all(r.test_accuracy is not None for r in ok) else "dev"
    value = (lambda r: r.test_accuracy) if metric == "test" else (lambda r: r.dev_accuracy)

    cells: Dict[tuple, ExperimentRecord] = {}
    for r in sorted(ok, key=lambda r: r.sort_key()):
        key = (r.config.architecture, r.config.k, r.config.num_hidden_layers, r.config.pooling)
        if key not in cells or _preference(r) < _preference(cells[key]):
            cells[key] = r
    best_ids = set()
    for arch in ARCH_ORDER:
        arch_recs = [r for r in cells.values() if r.config.architecture == arch]
        if arch_recs:
            best_ids.add(id(min(arch_recs, key=_preference)))

    depths = sorted({key[2] for key in cells})
    rows = sorted({(key[0], key[1]) for key in cells}, key=lambda ak: (ARCH_ORDER.index(ak[0]), ak[1]))
    def depth_name(t):
        return "No hidden layer" if t == 0 else f"{t} hidden layer" + ("s" if t > 1 else "")

    colw = 7
    head1 = f"{'':<12} {'':>4} |" + "|".join(f"{depth_name(t):^{4 * (colw + 1) - 1}}" for t in depths) + "|"
    head2 = f"{'Architecture':<12} {'k':>4} |" + "|".join(
        " ".join(f"{p:>{colw}}" for p in POOL_ORDER) for _ in depths
    ) + "|"
    lines = [f"accuracy (%) on {metric}; * = best per architecture", head1, head2, "-" * len(head2)]
    for arch, k in rows:
        groups = []
        for t in depths:
            vals = []
            for p in POOL_ORDER:
                r = cells.get((arch, k, t, p))
                v = value(r) if r is not None else None
                if v is None:
                    vals.append(f"{'-':>{colw}}")
                else:
                    mark = "*" if id(r) in best_ids else ""
                    vals.append(f"{100 * v:.2f}{mark}".rjust(colw))
            groups.append(" ".join(vals))
        lines.append(f"{arch:<12} {k:>4} |" + "|".join(groups) + "|")
    return "\n".join(lines)
