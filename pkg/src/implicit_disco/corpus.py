"""Discourse relation corpora: CoNLL-style relation JSON, parse trees, label schemes.

Relations are read one JSON object per line.  Argument tokens come from
``Arg1.Tokens`` (list of strings) when present, else from ``TokenList``
resolved against a ``parses.json`` file, else from ``RawText`` split on
whitespace.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

logger = logging.getLogger(__name__)

__all__ = [
    "CorpusFormatError",
    "TreeError",
    "Leaf",
    "Node",
    "BinaryTree",
    "RelationInstance",
    "LabelScheme",
    "Dataset",
    "LabelDistribution",
    "load_scheme",
    "scheme_names",
    "load_conll_json",
    "load_parses",
    "write_conll_json",
    "attach_trees",
    "filter_for_task",
    "binarize",
    "right_branching",
    "leaves",
    "to_bracketed",
    "ensure_trees",
    "label_distribution",
]

RELATION_TYPES = ("Explicit", "Implicit", "EntRel", "AltLex")


class CorpusFormatError(ValueError):
    pass


class TreeError(ValueError):
    pass


# ---------------------------------------------------------------- trees


@dataclass(frozen=True)
class Leaf:
    token: str


@dataclass(frozen=True)
class Node:
    left: "BinaryTree"
    right: "BinaryTree"


BinaryTree = Union[Leaf, Node]

_TREE_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def _parse_bracketed(text: str):
    """Parse into nested ``(label, children)`` tuples, leaves as plain strings."""
    toks = _TREE_TOKEN.findall(text)
    if not toks:
        raise TreeError("empty tree")
    if toks[0] != "(":
        if len(toks) != 1:
            raise TreeError(f"expected a bracketed tree, got {text!r}")
        return toks[0]
    pos = 0

    def parse():
        nonlocal pos
        pos += 1  # consume "("
        label = ""
        if pos < len(toks) and toks[pos] not in "()":
            label = toks[pos]
            pos += 1
        children = []
        while True:
            if pos >= len(toks):
                raise TreeError("unbalanced brackets: missing ')'")
            tok = toks[pos]
            if tok == ")":
                pos += 1
                break
            if tok == "(":
                children.append(parse())
            else:
                children.append(tok)
                pos += 1
        if not children:
            # "(x)" carries a token and no category
            if not label:
                raise TreeError("empty constituent '()'")
            return label
        return (label, children)

    tree = parse()
    if pos != len(toks):
        raise TreeError("unbalanced brackets: trailing material after tree")
    return tree


def _binarize_parsed(node) -> BinaryTree:
    if isinstance(node, str):
        return Leaf(node)
    _, children = node
    kids = [_binarize_parsed(c) for c in children]
    tree = kids[-1]
    for kid in reversed(kids[:-1]):
        tree = Node(kid, tree)
    return tree


def binarize(text: str, tokens: Optional[Sequence[str]] = None) -> BinaryTree:
    """Strip categories, collapse unary chains, right-binarize n-ary nodes.

    ``(X a b c)`` becomes ``Node(Leaf(a), Node(Leaf(b), Leaf(c)))``.  If
    ``tokens`` is given the leaf sequence must equal it.
    """
    tree = _binarize_parsed(_parse_bracketed(text))
    if tokens is not None:
        found = leaves(tree)
        if list(found) != list(tokens):
            raise TreeError(f"tree leaves {found} do not match argument tokens {list(tokens)}")
    return tree


def leaves(tree: BinaryTree) -> List[str]:
    out, stack = [], [tree]
    while stack:
        t = stack.pop()
        if isinstance(t, Leaf):
            out.append(t.token)
        else:
            stack.append(t.right)
            stack.append(t.left)
    return out


def right_branching(tokens: Sequence[str]) -> BinaryTree:
    if not tokens:
        raise TreeError("cannot build a tree over zero tokens")
    tree: BinaryTree = Leaf(tokens[-1])
    for tok in reversed(tokens[:-1]):
        tree = Node(Leaf(tok), tree)
    return tree


def to_bracketed(tree: BinaryTree) -> str:
    if isinstance(tree, Leaf):
        return tree.token
    return f"(X {to_bracketed(tree.left)} {to_bracketed(tree.right)})"


# ---------------------------------------------------------------- instances


@dataclass(frozen=True)
class RelationInstance:
    arg1_tokens: Tuple[str, ...]
    arg2_tokens: Tuple[str, ...]
    senses: Tuple[str, ...]
    relation_type: str = "Implicit"
    arg1_tree: Optional[BinaryTree] = None
    arg2_tree: Optional[BinaryTree] = None
    doc_id: str = ""
    split: str = ""
    id: str = ""


@dataclass(frozen=True)
class LabelScheme:
    """An ordered label set plus the rules mapping raw senses onto it.

    Schemes are read from plain-text files: ``# key: value`` directives then
    one label per line.  Recognized keys are ``name``, ``types`` (relation
    types kept), ``truncate`` (keep this many dot-separated levels),
    ``type-senses`` (relation types whose type name is the sense, e.g.
    EntRel) and ``gold`` (``first`` or ``any``).
    """

    name: str
    labels: Tuple[str, ...]
    types: Tuple[str, ...] = ("Implicit",)
    truncate: Optional[int] = None
    type_senses: Tuple[str, ...] = ()
    gold_any: bool = False

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"scheme {self.name} has duplicate labels")

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def __len__(self) -> int:
        return len(self.labels)

    def map_sense(self, raw: str) -> Tuple[Optional[str], str]:
        """Return ``(label, "")`` or ``(None, reason)``."""
        sense = raw.strip()
        if self.truncate is not None:
            parts = sense.split(".")
            if len(parts) < self.truncate:
                return None, "partial"
            sense = ".".join(parts[: self.truncate])
        if sense not in self.labels:
            return None, "unknown"
        return sense, ""

    @classmethod
    def parse(cls, text: str) -> "LabelScheme":
        opts: Dict[str, str] = {}
        labels = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].partition(":")
                if sep:
                    opts[key.strip()] = value.strip()
                continue
            labels.append(line)
        if "name" not in opts:
            raise ValueError("label-list file lacks a '# name:' directive")
        return cls(
            name=opts["name"],
            labels=tuple(labels),
            types=tuple(opts.get("types", "Implicit").split()),
            truncate=int(opts["truncate"]) if "truncate" in opts else None,
            type_senses=tuple(opts.get("type-senses", "").split()),
            gold_any=opts.get("gold", "first") == "any",
        )

    @classmethod
    def from_file(cls, path) -> "LabelScheme":
        return cls.parse(Path(path).read_text(encoding="utf-8"))


_BUILTIN = {"PDTB-L2-11": "pdtb_l2_11.txt", "CONLL-15": "conll_15.txt", "CDTB-10": "cdtb_10.txt"}


def scheme_names() -> Tuple[str, ...]:
    return tuple(_BUILTIN)


def load_scheme(name_or_path: Union[str, Path]) -> LabelScheme:
    """A built-in scheme by name, or a label-list file by path."""
    if isinstance(name_or_path, LabelScheme):
        return name_or_path
    if name_or_path in _BUILTIN:
        text = resources.files("implicit_disco").joinpath("data", "schemes", _BUILTIN[name_or_path]).read_text(
            encoding="utf-8"
        )
        return LabelScheme.parse(text)
    path = Path(name_or_path)
    if path.exists():
        return LabelScheme.from_file(path)
    raise ValueError(f"unknown label scheme {name_or_path!r}; built-ins are {', '.join(_BUILTIN)}")


# ---------------------------------------------------------------- loading


def load_parses(path) -> Dict[str, list]:
    """``parses.json`` as ``{doc_id: [sentence word lists]}``."""
    with open(path, encoding="utf-8") as f:
        docs = json.load(f)
    return {doc: [[w[0] for w in s["words"]] for s in d["sentences"]] for doc, d in docs.items()}


def _arg_tokens(arg: Mapping, doc_id: str, parses, lineno: int, which: str) -> Tuple[str, ...]:
    for key in ("Tokens", "Words"):
        if key in arg:
            return tuple(str(t) for t in arg[key])
    token_list = arg.get("TokenList")
    if token_list and all(isinstance(t, str) for t in token_list):
        return tuple(token_list)
    if token_list and parses is not None:
        try:
            sents = parses[doc_id]
            return tuple(sents[t[3]][t[4]] for t in token_list)
        except (KeyError, IndexError, TypeError):
            raise CorpusFormatError(f"line {lineno}: cannot resolve {which} TokenList in document {doc_id!r}") from None
    if "RawText" in arg:
        return tuple(arg["RawText"].split())
    raise CorpusFormatError(f"line {lineno}: {which} has no Tokens, resolvable TokenList, or RawText")


def load_conll_json(path, parses: Optional[Mapping] = None, split: Optional[str] = None) -> List[RelationInstance]:
    """Read newline-delimited CoNLL shared-task relations.

    ``split`` overrides any ``Split`` field in the file.  Optional
    ``Arg1.Tree`` / ``Arg2.Tree`` hold bracketed parses of the arguments.
    """
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rel = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusFormatError(f"{path}: line {lineno}: malformed JSON ({e.msg})") from None
            for key in ("Arg1", "Arg2", "Sense", "Type"):
                if key not in rel:
                    raise CorpusFormatError(f"{path}: line {lineno}: missing required field {key!r}")
            doc_id = str(rel.get("DocID", ""))
            a1 = _arg_tokens(rel["Arg1"], doc_id, parses, lineno, "Arg1")
            a2 = _arg_tokens(rel["Arg2"], doc_id, parses, lineno, "Arg2")
            trees = []
            for arg, toks in ((rel["Arg1"], a1), (rel["Arg2"], a2)):
                text = arg.get("Tree") if isinstance(arg, dict) else None
                trees.append(binarize(text, toks) if text else None)
            senses = rel["Sense"]
            if isinstance(senses, str):
                senses = [senses]
            out.append(
                RelationInstance(
                    arg1_tokens=a1,
                    arg2_tokens=a2,
                    senses=tuple(senses),
                    relation_type=rel["Type"],
                    arg1_tree=trees[0],
                    arg2_tree=trees[1],
                    doc_id=doc_id,
                    split=split if split is not None else str(rel.get("Split", "")),
                    id=str(rel.get("ID", f"{Path(path).name}:{lineno}")),
                )
            )
    return out


def write_conll_json(instances: Iterable[RelationInstance], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for inst in instances:
            rel = {
                "ID": inst.id,
                "DocID": inst.doc_id,
                "Split": inst.split,
                "Type": inst.relation_type,
                "Sense": list(inst.senses),
                "Arg1": {"Tokens": list(inst.arg1_tokens)},
                "Arg2": {"Tokens": list(inst.arg2_tokens)},
            }
            if inst.arg1_tree is not None:
                rel["Arg1"]["Tree"] = to_bracketed(inst.arg1_tree)
            if inst.arg2_tree is not None:
                rel["Arg2"]["Tree"] = to_bracketed(inst.arg2_tree)
            f.write(json.dumps(rel, ensure_ascii=False) + "\n")


def attach_trees(instances: Sequence[RelationInstance], path) -> List[RelationInstance]:
    """Attach trees from a file of ``ID<TAB>arg1 tree<TAB>arg2 tree`` lines."""
    trees = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise CorpusFormatError(f"{path}: line {lineno}: expected 3 tab-separated fields")
            trees[parts[0]] = (parts[1], parts[2])
    out = []
    for inst in instances:
        if inst.id in trees:
            t1, t2 = trees[inst.id]
            inst = replace(inst, arg1_tree=binarize(t1, inst.arg1_tokens), arg2_tree=binarize(t2, inst.arg2_tokens))
        out.append(inst)
    return out


# ---------------------------------------------------------------- filtering


@dataclass(frozen=True)
class Dataset:
    """Instances retained under a scheme; ``senses`` hold scheme labels, training label first."""

    scheme: LabelScheme
    instances: Tuple[RelationInstance, ...]
    rejects: Tuple[Tuple[str, str, str], ...] = ()
    excluded_types: int = 0

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)

    def __getitem__(self, i):
        return self.instances[i]

    def label(self, i: int) -> int:
        return self.scheme.index(self.instances[i].senses[0])

    def labels(self) -> List[int]:
        return [self.scheme.index(inst.senses[0]) for inst in self.instances]

    def gold(self, i: int) -> Tuple[str, ...]:
        inst = self.instances[i]
        return inst.senses if self.scheme.gold_any else inst.senses[:1]

    def subset(self, indices: Iterable[int]) -> "Dataset":
        return Dataset(self.scheme, tuple(self.instances[i] for i in indices))

    def split(self, name: str) -> "Dataset":
        return Dataset(self.scheme, tuple(x for x in self.instances if x.split == name))


def filter_for_task(instances, scheme) -> Dataset:
    """Keep the relations a task uses and map their senses onto its labels.

    Only the first annotated sense decides whether an instance is kept;
    under ``gold: any`` schemes further senses that map are kept as
    alternative gold labels.
    """
    scheme = load_scheme(scheme)
    if isinstance(instances, Dataset):
        instances = instances.instances
    kept, rejects, excluded = [], [], 0
    for inst in instances:
        if inst.relation_type not in scheme.types:
            excluded += 1
            continue
        if inst.relation_type in scheme.type_senses:
            raw = [inst.relation_type]
        else:
            raw = list(inst.senses)
        if not raw:
            rejects.append((inst.id, "", "no sense"))
            continue
        first, reason = scheme.map_sense(raw[0])
        if first is None:
            rejects.append((inst.id, raw[0], reason))
            continue
        mapped = [first]
        if scheme.gold_any:
            for s in raw[1:]:
                lab, _ = scheme.map_sense(s)
                if lab is not None and lab not in mapped:
                    mapped.append(lab)
        if not inst.arg1_tokens or not inst.arg2_tokens:
            rejects.append((inst.id, raw[0], "empty argument"))
            continue
        kept.append(replace(inst, senses=tuple(mapped)))
    if rejects:
        logger.info("%s: %d instances rejected", scheme.name, len(rejects))
    return Dataset(scheme, tuple(kept), tuple(rejects), excluded)


def ensure_trees(dataset: Dataset) -> Tuple[Dataset, int]:
    """Give every argument a tree, using a right-branching chain where none was parsed."""
    fallback = 0
    out = []
    for inst in dataset.instances:
        t1, t2 = inst.arg1_tree, inst.arg2_tree
        if t1 is None:
            t1, fallback = right_branching(inst.arg1_tokens), fallback + 1
        if t2 is None:
            t2, fallback = right_branching(inst.arg2_tokens), fallback + 1
        out.append(replace(inst, arg1_tree=t1, arg2_tree=t2))
    if fallback:
        logger.info("%d arguments had no parse; right-branching chains used", fallback)
    return Dataset(dataset.scheme, tuple(out), dataset.rejects, dataset.excluded_types), fallback


@dataclass(frozen=True)
class LabelDistribution:
    counts: Dict[str, int] = field(default_factory=dict)
    total: int = 0

    def __getitem__(self, label: str) -> int:
        return self.counts[label]

    def render(self) -> str:
        width = max([len(k) for k in self.counts] + [5])
        lines = [f"{lab:<{width}}  {n:>6}" for lab, n in self.counts.items()]
        lines.append(f"{'Total':<{width}}  {self.total:>6}")
        return "\n".join(lines)


def label_distribution(dataset: Dataset) -> LabelDistribution:
    counts = {lab: 0 for lab in dataset.scheme.labels}
    for inst in dataset.instances:
        counts[inst.senses[0]] += 1
    return LabelDistribution(counts, sum(counts.values()))
