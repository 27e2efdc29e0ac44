"""Fixed pretrained word vectors in word2vec text and binary formats."""

from __future__ import annotations

import hashlib
import logging
import os
from typing import Dict, Iterable, Mapping, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "EmbeddingFormatError",
    "WordVectorTable",
    "load_text_vectors",
    "load_binary_vectors",
    "load_vectors",
    "write_text_vectors",
    "write_binary_vectors",
    "lookup",
]


class EmbeddingFormatError(ValueError):
    pass


class WordVectorTable:
    """Immutable token -> k-dim vector map. Unknown tokens map to zeros.

    Lookups are case-sensitive and no normalization is applied.
    """

    def __init__(self, tokens: Sequence[str], vectors: np.ndarray, duplicates: int = 0):
        vectors = np.array(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(tokens):
            raise EmbeddingFormatError(
                f"expected {len(tokens)} rows of vectors, got array of shape {vectors.shape}"
            )
        if vectors.shape[1] < 1:
            raise EmbeddingFormatError("vector dimension must be positive")
        index: Dict[str, int] = {}
        for i, tok in enumerate(tokens):
            index[tok] = i  # last occurrence wins
        if len(index) != len(tokens):
            keep = sorted(index.values())
            tokens = [tokens[i] for i in keep]
            vectors = vectors[keep]
            index = {tok: i for i, tok in enumerate(tokens)}
        vectors.flags.writeable = False
        self._index = index
        self._tokens = tuple(tokens)
        self._vectors = vectors
        self._oov = np.zeros(vectors.shape[1])
        self._oov.flags.writeable = False
        self.duplicates = duplicates

    @classmethod
    def from_dict(cls, mapping: Mapping[str, Iterable[float]]) -> "WordVectorTable":
        tokens = list(mapping)
        return cls(tokens, np.array([list(mapping[t]) for t in tokens], dtype=np.float64))

    @property
    def dim(self) -> int:
        return self._vectors.shape[1]

    k = dim

    @property
    def tokens(self) -> Tuple[str, ...]:
        return self._tokens

    @property
    def matrix(self) -> np.ndarray:
        return self._vectors

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def lookup(self, token: str) -> np.ndarray:
        i = self._index.get(token)
        if i is None:
            return self._oov
        return self._vectors[i]

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update("\n".join(self._tokens).encode("utf-8"))
        h.update(self._vectors.tobytes())
        return h.hexdigest()

    def __repr__(self) -> str:
        return f"WordVectorTable(size={len(self)}, k={self.dim})"


def lookup(table: WordVectorTable, token: str) -> np.ndarray:
    return table.lookup(token)


def _count_duplicates(tokens: Sequence[str]) -> int:
    return len(tokens) - len(set(tokens))


def _finish(path, tokens, rows) -> WordVectorTable:
    dups = _count_duplicates(tokens)
    if dups:
        logger.warning("%s: %d duplicate tokens, last occurrence kept", path, dups)
    return WordVectorTable(tokens, np.array(rows, dtype=np.float64), duplicates=dups)


def load_text_vectors(path) -> WordVectorTable:
    """Read the word2vec text format.

    An optional first line ``"V k"`` is accepted.  Without it, ``k`` is the
    arity of the first entry.
    """
    tokens, rows = [], []
    declared = None
    dim = None
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not any(line.strip() for line in lines):
        raise EmbeddingFormatError(f"{path}: empty vector file")
    start = 0
    first = lines[0].split()
    if len(first) == 2 and all(x.isdigit() for x in first):
        declared, dim = int(first[0]), int(first[1])
        start = 1
    for lineno in range(start, len(lines)):
        fields = lines[lineno].split()
        if not fields:
            continue
        token, values = fields[0], fields[1:]
        if dim is None:
            dim = len(values)
        if len(values) != dim:
            raise EmbeddingFormatError(
                f"{path}: line {lineno + 1} has {len(values)} values, expected {dim}"
            )
        try:
            rows.append([float(v) for v in values])
        except ValueError:
            raise EmbeddingFormatError(f"{path}: line {lineno + 1} has a non-numeric field") from None
        tokens.append(token)
    if not tokens:
        raise EmbeddingFormatError(f"{path}: no vectors found")
    if dim == 0:
        raise EmbeddingFormatError(f"{path}: vectors have no components")
    if declared is not None and declared != len(tokens):
        logger.warning("%s: header declares %d entries, found %d", path, declared, len(tokens))
    return _finish(path, tokens, rows)


def load_binary_vectors(path) -> WordVectorTable:
    """Read the word2vec binary format: ``"V k\\n"`` then token, space, k float32 LE."""
    with open(path, "rb") as f:
        blob = f.read()
    nl = blob.find(b"\n")
    if nl < 0:
        raise EmbeddingFormatError(f"{path}: missing header line")
    try:
        count, dim = (int(x) for x in blob[:nl].split())
    except ValueError:
        raise EmbeddingFormatError(f"{path}: malformed header {blob[:nl]!r}") from None
    if dim < 1:
        raise EmbeddingFormatError(f"{path}: vector dimension must be positive")
    width = 4 * dim
    pos = nl + 1
    tokens, rows = [], []
    for i in range(count):
        # the reference tool writes a newline after each vector, older files do not
        while pos < len(blob) and blob[pos : pos + 1] == b"\n":
            pos += 1
        end = blob.find(b" ", pos)
        if end < 0 or end + 1 + width > len(blob):
            raise EmbeddingFormatError(
                f"{path}: truncated after {i} of {count} entries declared in header"
            )
        tokens.append(blob[pos:end].decode("utf-8", errors="replace"))
        rows.append(np.frombuffer(blob, dtype="<f4", count=dim, offset=end + 1).astype(np.float64))
        pos = end + 1 + width
    if blob[pos:].strip():
        raise EmbeddingFormatError(
            f"{path}: {len(blob) - pos} bytes of payload beyond the {count} entries in header"
        )
    return _finish(path, tokens, rows)


def load_vectors(path) -> WordVectorTable:
    """Pick the binary or text loader from the file extension."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"embedding file not found: {path}")
    if str(path).endswith(".bin"):
        return load_binary_vectors(path)
    return load_text_vectors(path)


def write_text_vectors(table: WordVectorTable, path, header: bool = True) -> None:
    with open(path, "w", encoding="utf-8") as f:
        if header:
            f.write(f"{len(table)} {table.dim}\n")
        for tok in table.tokens:
            f.write(tok + " " + " ".join(repr(float(v)) for v in table.lookup(tok)) + "\n")


def write_binary_vectors(table: WordVectorTable, path) -> None:
    with open(path, "wb") as f:
        f.write(b"%d %d\n" % (len(table), table.dim))
        for tok in table.tokens:
            f.write(tok.encode("utf-8") + b" ")
            f.write(np.asarray(table.lookup(tok), dtype="<f4").tobytes())
            f.write(b"\n")
