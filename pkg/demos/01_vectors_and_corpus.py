"""
Word vectors, relation files and label schemes
==============================================

Load the bundled toy corpus, filter it for a task and look at the labels.
"""

from implicit_disco import load_scheme, load_vectors, filter_for_task, label_distribution
from implicit_disco.corpus import load_conll_json, binarize, to_bracketed
from implicit_disco.synthetic import toy_corpus_dir

toy = toy_corpus_dir()

# vectors are a fixed lookup table; unknown words map to zeros
table = load_vectors(toy / "vectors.txt")
print(table.dim, "dimensions,", len(table), "words")
print("MARK   ->", table.lookup("MARK")[:3])
print("zebra  ->", table.lookup("zebra")[:3])

# relations come one JSON object per line
relations = load_conll_json(toy / "train.jsonl", split="train")
print(len(relations), "relations read")

# the scheme decides which relation types and senses survive
scheme = load_scheme(str(toy / "scheme.txt"))
train = filter_for_task(relations, scheme)
print(len(train), "kept;", train.excluded_types, "dropped for their type")
print(label_distribution(train).render())

# the built-in 11-way scheme truncates senses to the second level
pdtb = load_scheme("PDTB-L2-11")
print(pdtb.map_sense("Contingency.Cause.Reason"))
print(pdtb.map_sense("Comparison"))

# parse trees are binarized before the tree encoder sees them
tree = binarize("(S (NP (DT the) (NN cat)) (VP (VBD sat) (ADVP down) (. .)))")
print(to_bracketed(tree))
