"""
Three argument encoders
=======================

The same instance through the feedforward, LSTM and tree LSTM encoders.
"""

import numpy as np

from implicit_disco import ModelConfig
from implicit_disco.training import new_model
from implicit_disco.corpus import RelationInstance, binarize
from implicit_disco.synthetic import toy_vectors

table = toy_vectors(k=10)
inst = RelationInstance(
    arg1_tokens=("w1", "MARK", "w7"),
    arg2_tokens=("w3", "w4"),
    senses=("Marked",),
    arg1_tree=binarize("(S (NP w1) (VP MARK w7))"),
)

for arch, pooling in [("FF", "sum"), ("LSTM", "last"), ("TREE_LSTM", "mean")]:
    cfg = ModelConfig(arch, pooling, k=10, hidden_dim=8, num_labels=2)
    model = new_model(cfg, ["Unmarked", "Marked"], seed=0)
    vec = model.encode(inst.arg1_tokens, inst.arg1_tree, table)
    print(f"{arch:9s} {pooling:5s} |a1| = {np.linalg.norm(vec.data):.3f}  p = {model.probabilities(inst, table).round(3)}")

# the feedforward encoder ignores word order; the recurrent ones do not
ff = new_model(ModelConfig("FF", "sum", k=10, hidden_dim=8, num_labels=2), ["a", "b"], seed=0)
lstm = new_model(ModelConfig("LSTM", "sum", k=10, hidden_dim=8, num_labels=2), ["a", "b"], seed=0)
words = ["w1", "MARK", "w7"]
for name, m in [("FF", ff), ("LSTM", lstm)]:
    same = np.allclose(m.encode(words, None, table).data, m.encode(words[::-1], None, table).data)
    print(name, "order invariant:", same)
