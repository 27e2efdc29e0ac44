"""Argument encoders and the inter-argument classifier.

Three encoders turn an argument into a vector: pooled word vectors
(``FF``), a sequential LSTM (``LSTM``) and a binary tree LSTM
(``TREE_LSTM``).  Arg1 and Arg2 share the encoder; only the first
interaction layer (``W1`` vs ``W2``) tells them apart.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import numcore as nc
from .corpus import BinaryTree, LabelScheme, Leaf, RelationInstance, right_branching
from .embeddings import WordVectorTable
from .numcore import Tensor

__all__ = [
    "ARCHITECTURES",
    "POOLINGS",
    "ModelConfig",
    "Model",
    "ModelFormatError",
    "param_shapes",
    "pool",
    "word_vectors",
    "encode_ff",
    "lstm_step",
    "encode_lstm",
    "tree_node",
    "encode_tree",
    "classifier_logits",
    "interact_and_classify",
    "argmax",
]

ARCHITECTURES = ("FF", "LSTM", "TREE_LSTM")
POOLINGS = ("max", "sum", "mean", "last")
GATES = ("i", "f", "o", "c")


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    architecture: str = "FF"
    pooling: str = "sum"
    k: int = 300
    hidden_dim: int = 300
    num_hidden_layers: int = 1
    num_labels: int = 11
    lstm_dim: Optional[int] = None
    tree_tied: bool = False

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"architecture must be one of {ARCHITECTURES}, got {self.architecture!r}")
        if self.pooling not in POOLINGS:
            raise ValueError(f"pooling must be one of {POOLINGS}, got {self.pooling!r}")
        if self.pooling == "last" and self.architecture == "FF":
            raise ValueError("'last' pooling needs a recurrent encoder (LSTM or TREE_LSTM)")
        if self.num_hidden_layers < 0:
            raise ValueError("num_hidden_layers must be >= 0")
        if self.hidden_dim < 1 or self.k < 1 or self.num_labels < 1:
            raise ValueError("k, hidden_dim and num_labels must be positive")
        if self.lstm_dim is not None and self.lstm_dim < 1:
            raise ValueError("lstm_dim must be positive")

    @property
    def state_dim(self) -> int:
        return self.lstm_dim if self.lstm_dim is not None else self.k

    @property
    def arg_dim(self) -> int:
        return self.k if self.architecture == "FF" else self.state_dim

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def _tree_u_names(tied: bool) -> Dict[str, str]:
    """Map logical child weights to stored parameter names."""
    names = {}
    for g in ("i", "o", "c"):
        names[f"U_{g}_l"] = f"tree.U_{g}" if tied else f"tree.U_{g}_l"
        names[f"U_{g}_r"] = f"tree.U_{g}" if tied else f"tree.U_{g}_r"
    if tied:
        names.update({"U_fl_l": "tree.U_f_same", "U_fr_r": "tree.U_f_same",
                      "U_fl_r": "tree.U_f_cross", "U_fr_l": "tree.U_f_cross",
                      "b_fl": "tree.b_f", "b_fr": "tree.b_f"})
    else:
        for side in ("l", "r"):
            for child in ("l", "r"):
                names[f"U_f{side}_{child}"] = f"tree.U_f{side}_{child}"
            names[f"b_f{side}"] = f"tree.b_f{side}"
    return names


def param_shapes(config: ModelConfig) -> Dict[str, Tuple[int, ...]]:
    """Ordered parameter names and shapes; names starting ``b`` (after any prefix) are biases."""
    shapes: Dict[str, Tuple[int, ...]] = {}
    k, m, d, L = config.k, config.arg_dim, config.hidden_dim, config.num_labels
    if config.architecture == "LSTM":
        for g in GATES:
            shapes[f"lstm.W_{g}"] = (m, k)
            shapes[f"lstm.U_{g}"] = (m, m)
            shapes[f"lstm.b_{g}"] = (m,)
    elif config.architecture == "TREE_LSTM":
        # leaves have no children to forget, so there is no input weight for f
        for g in ("i", "o", "c"):
            shapes[f"tree.W_{g}"] = (m, k)
            shapes[f"tree.b_{g}"] = (m,)
        for name in dict.fromkeys(_tree_u_names(config.tree_tied).values()):
            shapes[name] = (m,) if name.split(".")[1].startswith("b") else (m, m)
    T = config.num_hidden_layers
    if T == 0:
        shapes["W1"] = (L, m)
        shapes["W2"] = (L, m)
        shapes["b_o"] = (L,)
        return shapes
    shapes["W1"] = (d, m)
    shapes["W2"] = (d, m)
    shapes["b_h1"] = (d,)
    for t in range(2, T + 1):
        shapes[f"W_h{t}"] = (d, d)
        shapes[f"b_h{t}"] = (d,)
    shapes["W_o"] = (L, d)
    shapes["b_o"] = (L,)
    return shapes


def is_bias(name: str) -> bool:
    return name.rsplit(".", 1)[-1].startswith("b")


# ---------------------------------------------------------------- encoders

Params = Dict[str, Tensor]


def pool(vectors: Sequence[Tensor], fn: str) -> Tensor:
    """Element-wise max, sum or mean over the vectors (``last`` returns the final one)."""
    if fn == "last":
        if not vectors:
            raise ValueError("cannot pool an empty list of vectors")
        return vectors[-1]
    return nc.pool(vectors, fn)


def word_vectors(tokens: Sequence[str], table: WordVectorTable) -> List[Tensor]:
    return [Tensor(table.lookup(t)) for t in tokens]


def encode_ff(tokens: Sequence[str], table: WordVectorTable, pooling: str) -> Tensor:
    if not tokens:
        raise ValueError("cannot encode an empty argument")
    if pooling == "last":
        raise ValueError("'last' pooling is undefined for the bag-of-words encoder")
    return nc.pool(word_vectors(tokens, table), pooling)


def lstm_step(w: Tensor, s_prev: Tensor, c_prev: Tensor, params: Params, prefix: str = "lstm.") -> Tuple[Tensor, Tensor]:
    """One LSTM step; the state is ``c_t * o_t`` with no squashing of the cell."""
    p = params
    pre = {
        g: nc.linear([(p[f"{prefix}W_{g}"], w), (p[f"{prefix}U_{g}"], s_prev)], p[f"{prefix}b_{g}"])
        for g in GATES
    }
    i = nc.sigmoid(pre["i"])
    f = nc.sigmoid(pre["f"])
    o = nc.sigmoid(pre["o"])
    cand = nc.tanh(pre["c"])
    c = nc.add(nc.mul(cand, i), nc.mul(c_prev, f))
    s = nc.mul(c, o)
    return s, c


def lstm_states(tokens: Sequence[str], table: WordVectorTable, params: Params) -> List[Tensor]:
    m = params["lstm.U_i"].shape[0]
    s = c = Tensor(np.zeros(m))
    states = []
    for w in word_vectors(tokens, table):
        s, c = lstm_step(w, s, c, params)
        states.append(s)
    return states


def encode_lstm(tokens: Sequence[str], table: WordVectorTable, params: Params, pooling: str) -> Tensor:
    if not tokens:
        raise ValueError("cannot encode an empty argument")
    return pool(lstm_states(tokens, table, params), pooling)


def tree_leaf(w: Tensor, params: Params) -> Tuple[Tensor, Tensor]:
    """A leaf consumes its word with zero child states."""
    p = params
    i = nc.sigmoid(nc.affine(p["tree.W_i"], w, p["tree.b_i"]))
    o = nc.sigmoid(nc.affine(p["tree.W_o"], w, p["tree.b_o"]))
    cand = nc.tanh(nc.affine(p["tree.W_c"], w, p["tree.b_c"]))
    c = nc.mul(cand, i)
    return nc.mul(c, o), c


def tree_node(left: Tuple[Tensor, Tensor], right: Tuple[Tensor, Tensor], params: Params, tied: bool = False) -> Tuple[Tensor, Tensor]:
    """Compose two children (state, cell) with one forget gate per child."""
    u = _tree_u_names(tied)
    p = params
    (s_l, c_l), (s_r, c_r) = left, right

    def gate(g):
        return nc.linear([(p[u[f"U_{g}_l"]], s_l), (p[u[f"U_{g}_r"]], s_r)], p[f"tree.b_{g}"])

    i = nc.sigmoid(gate("i"))
    o = nc.sigmoid(gate("o"))
    cand = nc.tanh(gate("c"))
    f_l = nc.sigmoid(nc.linear([(p[u["U_fl_l"]], s_l), (p[u["U_fl_r"]], s_r)], p[u["b_fl"]]))
    f_r = nc.sigmoid(nc.linear([(p[u["U_fr_l"]], s_l), (p[u["U_fr_r"]], s_r)], p[u["b_fr"]]))
    c = nc.add(nc.mul(cand, i), nc.mul(f_l, c_l), nc.mul(f_r, c_r))
    return nc.mul(c, o), c


def tree_states(tree: BinaryTree, table: WordVectorTable, params: Params, tied: bool = False) -> List[Tensor]:
    """Node states in post-order; the root comes last."""
    states: List[Tensor] = []
    # iterative post-order; long chains would overflow recursion
    results: List[Tuple[Tensor, Tensor]] = []
    stack = [(tree, False)]
    while stack:
        node, expanded = stack.pop()
        if isinstance(node, Leaf):
            sc = tree_leaf(Tensor(table.lookup(node.token)), params)
            results.append(sc)
            states.append(sc[0])
        elif expanded:
            right = results.pop()
            left = results.pop()
            sc = tree_node(left, right, params, tied)
            results.append(sc)
            states.append(sc[0])
        else:
            stack.append((node, True))
            stack.append((node.right, False))
            stack.append((node.left, False))
    return states


def encode_tree(tree: BinaryTree, table: WordVectorTable, params: Params, pooling: str, tied: bool = False) -> Tensor:
    if tree is None:
        raise ValueError("cannot encode a missing tree")
    return pool(tree_states(tree, table, params, tied), pooling)


# ---------------------------------------------------------------- classifier


def classifier_logits(a1: Tensor, a2: Tensor, params: Params, num_hidden_layers: int) -> Tensor:
    """Pre-softmax scores; with no hidden layer the linear combination feeds softmax directly."""
    p = params
    if num_hidden_layers == 0:
        return nc.linear([(p["W1"], a1), (p["W2"], a2)], p["b_o"])
    h = nc.tanh(nc.linear([(p["W1"], a1), (p["W2"], a2)], p["b_h1"]))
    for t in range(2, num_hidden_layers + 1):
        h = nc.tanh(nc.affine(p[f"W_h{t}"], h, p[f"b_h{t}"]))
    return nc.affine(p["W_o"], h, p["b_o"])


def interact_and_classify(a1: Tensor, a2: Tensor, params: Params, num_hidden_layers: int) -> Tensor:
    return nc.softmax(classifier_logits(a1, a2, params, num_hidden_layers))


def argmax(probs) -> int:
    """Index of the largest entry; ties go to the lowest index."""
    return int(np.argmax(np.asarray(probs.data if isinstance(probs, Tensor) else probs)))


class Model:
    """Config, label list and parameter tensors for one classifier."""

    def __init__(self, config: ModelConfig, params: Params, labels: Sequence[str]):
        expected = param_shapes(config)
        if set(params) != set(expected):
            missing = sorted(set(expected) - set(params))
            extra = sorted(set(params) - set(expected))
            raise ModelFormatError(f"parameter names do not match config (missing {missing}, unexpected {extra})")
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise ModelFormatError(f"parameter {name} has shape {params[name].shape}, config needs {shape}")
        if len(labels) != config.num_labels:
            raise ModelFormatError(f"{len(labels)} labels given for a {config.num_labels}-label config")
        self.config = config
        self.params = {name: params[name] for name in expected}
        self.labels = tuple(labels)
        self.scheme: Optional[LabelScheme] = None

    @property
    def scheme_name(self) -> Optional[str]:
        return self.scheme.name if self.scheme is not None else None

    def parameters(self) -> List[Tensor]:
        return list(self.params.values())

    def encode(self, tokens: Sequence[str], tree: Optional[BinaryTree], table: WordVectorTable) -> Tensor:
        cfg = self.config
        if cfg.architecture == "FF":
            return encode_ff(tokens, table, cfg.pooling)
        if cfg.architecture == "LSTM":
            return encode_lstm(tokens, table, self.params, cfg.pooling)
        if tree is None:
            tree = right_branching(tokens)
        return encode_tree(tree, table, self.params, cfg.pooling, cfg.tree_tied)

    def logits(self, inst: RelationInstance, table: WordVectorTable) -> Tensor:
        a1 = self.encode(inst.arg1_tokens, inst.arg1_tree, table)
        a2 = self.encode(inst.arg2_tokens, inst.arg2_tree, table)
        return classifier_logits(a1, a2, self.params, self.config.num_hidden_layers)

    def probabilities(self, inst: RelationInstance, table: WordVectorTable) -> np.ndarray:
        return nc.softmax(self.logits(inst, table)).data

    def predict(self, inst: RelationInstance, table: WordVectorTable) -> int:
        return argmax(self.logits(inst, table))

    def predict_label(self, inst: RelationInstance, table: WordVectorTable) -> str:
        return self.labels[self.predict(inst, table)]

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.params.items()}

    def restore(self, snap: Dict[str, np.ndarray]) -> None:
        for name, arr in snap.items():
            self.params[name].data[...] = arr

    def save(self, path) -> None:
        scheme = asdict(self.scheme) if self.scheme is not None else None
        meta = {"config": self.config.to_dict(), "labels": list(self.labels), "scheme": scheme,
                "params": {n: list(t.shape) for n, t in self.params.items()}}
        arrays = {f"param/{n}": t.data for n, t in self.params.items()}
        with open(path, "wb") as f:
            np.savez(f, __meta__=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8), **arrays)

    @classmethod
    def load(cls, path) -> "Model":
        with np.load(path, allow_pickle=False) as z:
            if "__meta__" not in z:
                raise ModelFormatError(f"{path}: not a model file (no metadata)")
            meta = json.loads(z["__meta__"].tobytes().decode("utf-8"))
            config = ModelConfig.from_dict(meta["config"])
            params = {}
            for name, shape in meta["params"].items():
                arr = z[f"param/{name}"]
                if list(arr.shape) != shape:
                    raise ModelFormatError(f"{path}: {name} stored with shape {arr.shape}, header says {shape}")
                params[name] = Tensor(arr, requires_grad=True, name=name)
        model = cls(config, params, meta["labels"])
        if meta.get("scheme"):
            sd = meta["scheme"]
            model.scheme = LabelScheme(
                name=sd["name"], labels=tuple(sd["labels"]), types=tuple(sd["types"]), truncate=sd["truncate"],
                type_senses=tuple(sd["type_senses"]), gold_any=sd["gold_any"],
            )
        return model
