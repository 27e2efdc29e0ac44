"""Generated toy corpora that need no licensed data.

``marker_task``: the relation is ``Marked`` iff the token ``MARK`` occurs
in either argument.  ``MARK`` owns an embedding dimension no other word
uses, so the label is a linear function of the sum-pooled vectors.

``order_task``: Arg1 always contains ``MARK`` and ``ANTI`` once each; the
label says whether ``MARK`` comes first.  Both labels draw the same bags of
words, so an order-blind encoder is at chance.
"""

from __future__ import annotations

from dataclasses import replace
from typing import List, Tuple

import numpy as np

from .corpus import Dataset, LabelScheme, RelationInstance, right_branching
from .embeddings import WordVectorTable

__all__ = [
    "MARKER_SCHEME",
    "ORDER_SCHEME",
    "toy_vectors",
    "marker_task",
    "order_task",
    "write_toy_corpus",
    "toy_corpus_dir",
]

MARKER_SCHEME = LabelScheme("TOY-MARKER", ("Unmarked", "Marked"), types=("Implicit",))
ORDER_SCHEME = LabelScheme("TOY-ORDER", ("AntiFirst", "MarkFirst"), types=("Implicit",))

MARK, ANTI = "MARK", "ANTI"


def toy_vectors(k: int = 10, vocab_size: int = 40, seed: int = 0) -> WordVectorTable:
    """Filler words ``w0..`` plus MARK and ANTI; dimension 0 is reserved for MARK."""
    rng = np.random.default_rng(seed)
    tokens = [f"w{i}" for i in range(vocab_size)] + [MARK, ANTI]
    vecs = rng.normal(scale=0.5, size=(len(tokens), k))
    vecs[:, 0] = 0.0
    vecs[vocab_size, 0] = 2.0
    return WordVectorTable(tokens, vecs)


def _fillers(rng, n: int, vocab_size: int) -> List[str]:
    return [f"w{i}" for i in rng.integers(0, vocab_size, size=n)]


def marker_task(
    n: int, seed: int = 0, vocab_size: int = 40, length: Tuple[int, int] = (3, 8), split: str = "", trees: bool = False
) -> Dataset:
    rng = np.random.default_rng(seed)
    out = []
    for j in range(n):
        marked = bool(rng.integers(0, 2))
        a1 = _fillers(rng, int(rng.integers(length[0], length[1] + 1)), vocab_size)
        a2 = _fillers(rng, int(rng.integers(length[0], length[1] + 1)), vocab_size)
        if marked:
            target = a1 if rng.integers(0, 2) else a2
            target[int(rng.integers(0, len(target)))] = MARK
        out.append(_instance(a1, a2, MARKER_SCHEME.labels[int(marked)], split, f"{split or 'toy'}-{seed}-{j}", trees))
    return Dataset(MARKER_SCHEME, tuple(out))


def order_task(
    n: int, seed: int = 0, vocab_size: int = 40, length: Tuple[int, int] = (2, 5), split: str = "", trees: bool = False
) -> Dataset:
    rng = np.random.default_rng(seed)
    out = []
    for j in range(n):
        mark_first = bool(rng.integers(0, 2))
        a1 = _fillers(rng, int(rng.integers(length[0], length[1] + 1)), vocab_size)
        p, q = sorted(rng.choice(len(a1) + 2, size=2, replace=False))
        first, second = (MARK, ANTI) if mark_first else (ANTI, MARK)
        a1.insert(p, first)
        a1.insert(q, second)
        a2 = _fillers(rng, int(rng.integers(length[0], length[1] + 1)), vocab_size)
        out.append(_instance(a1, a2, ORDER_SCHEME.labels[int(mark_first)], split, f"{split or 'toy'}-{seed}-{j}", trees))
    return Dataset(ORDER_SCHEME, tuple(out))


def _instance(a1, a2, label, split, ident, trees) -> RelationInstance:
    return RelationInstance(
        arg1_tokens=tuple(a1),
        arg2_tokens=tuple(a2),
        senses=(label,),
        relation_type="Implicit",
        arg1_tree=right_branching(a1) if trees else None,
        arg2_tree=right_branching(a2) if trees else None,
        doc_id="synthetic",
        split=split,
        id=ident,
    )


def write_toy_corpus(directory, n_train: int = 200, n_dev: int = 60, n_test: int = 60, k: int = 10, seed: int = 0) -> None:
    """Write the marker task as CoNLL-style files plus vectors, scheme and configs."""
    import json
    from pathlib import Path

    from .corpus import to_bracketed, write_conll_json
    from .embeddings import write_text_vectors

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    write_text_vectors(toy_vectors(k=k, seed=seed), out / "vectors.txt")
    lines = [f"# name: {MARKER_SCHEME.name}", "# types: Implicit"] + list(MARKER_SCHEME.labels)
    (out / "scheme.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    trees = []
    for i, (split, n) in enumerate((("train", n_train), ("dev", n_dev), ("test", n_test))):
        ds = marker_task(n, seed=seed + 1 + i, split=split)
        insts = list(ds.instances)
        # one Explicit relation per file, which every task filter drops
        explicit = _instance(["w1", "w2"], ["w3"], "Marked", split, f"{split}-explicit", False)
        insts.append(replace(explicit, relation_type="Explicit"))
        write_conll_json(insts, out / f"{split}.jsonl")
        for inst in ds.instances:
            t1, t2 = right_branching(inst.arg1_tokens), right_branching(inst.arg2_tokens)
            trees.append(f"{inst.id}\t({to_bracketed(t1)})\t({to_bracketed(t2)})")
    (out / "trees.txt").write_text("\n".join(trees) + "\n", encoding="utf-8")
    base = {"scheme": "scheme.txt", "embeddings": "vectors.txt", "train": "train.jsonl",
            "dev": "dev.jsonl", "test": "test.jsonl", "seed": 7}
    train_cfg = {**base, "out": "runs/train",
                 "model": {"architecture": "FF", "pooling": "sum", "hidden_dim": 8, "num_hidden_layers": 1},
                 "training": {"learning_rate": 0.05, "max_epochs": 20, "patience": 3}}
    grid_cfg = {**base, "out": "runs/grid", "model": {"hidden_dim": 8},
                "training": {"max_epochs": 10, "patience": 2},
                "grid": {"architecture": ["FF", "LSTM"], "pooling": ["sum"],
                         "num_hidden_layers": [0, 1], "learning_rate": [0.05]}}
    (out / "train.json").write_text(json.dumps(train_cfg, indent=2) + "\n", encoding="utf-8")
    (out / "grid.json").write_text(json.dumps(grid_cfg, indent=2) + "\n", encoding="utf-8")


def toy_corpus_dir():
    """Directory of the bundled toy corpus inside the installed package."""
    from importlib import resources

    return resources.files("implicit_disco").joinpath("data", "toy")
