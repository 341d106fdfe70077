"""Precomputed embedding tables: file formats, lookup, and pooling.

Tables are always consumed, never trained. Two on-disk forms are supported:

* binary: header {magic ``EMBT``, version u32, d u32, count u64}, then per
  entry a u32-length-prefixed UTF-8 token followed by d little-endian
  float32 values;
* text: one ``token v1 v2 ... vd`` line per entry, with an optional
  leading ``count dim`` header line for interoperability.
"""

from __future__ import annotations

import logging
import struct
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..errors import PatentscapeError
from .text import tokenize

log = logging.getLogger(__name__)

_MAGIC = b"EMBT"
_VERSION = 1

OOV_POLICIES = ("skip", "zero")


class EmbeddingTable:
    """token -> real vector of a fixed dimension, with a total OOV policy."""

    def __init__(
        self,
        vectors: Mapping[str, np.ndarray],
        dimension: int | None = None,
        name: str = "",
        oov_policy: str = "skip",
    ):
        if oov_policy not in OOV_POLICIES:
            raise PatentscapeError(f"oov_policy must be one of {OOV_POLICIES}")
        self.vectors: dict[str, np.ndarray] = {}
        d = dimension
        for token, vec in vectors.items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.ndim != 1:
                raise PatentscapeError(f"embedding for {token!r} is not 1-D")
            if d is None:
                d = arr.size
            elif arr.size != d:
                raise PatentscapeError(
                    f"embedding for {token!r} has length {arr.size}, expected {d}"
                )
            self.vectors[token] = arr
        if d is None:
            raise PatentscapeError("cannot infer dimension from an empty table")
        self.dimension = int(d)
        self.name = name
        self.oov_policy = oov_policy

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def lookup(self, token: str) -> np.ndarray | None:
        """Vector for token; under the zero policy unknown tokens resolve to
        the zero vector, under skip they resolve to None."""
        vec = self.vectors.get(token)
        if vec is not None:
            return vec
        if self.oov_policy == "zero":
            return np.zeros(self.dimension)
        return None

    # -- binary format ------------------------------------------------------

    def save_binary(self, path: str | Path) -> None:
        with open(path, "wb") as f:
            f.write(_MAGIC)
            f.write(struct.pack("<IIQ", _VERSION, self.dimension, len(self.vectors)))
            for token in sorted(self.vectors):
                raw = token.encode("utf-8")
                f.write(struct.pack("<I", len(raw)))
                f.write(raw)
                f.write(self.vectors[token].astype("<f4").tobytes())

    @classmethod
    def load_binary(cls, path: str | Path, name: str = "", oov_policy: str = "skip") -> "EmbeddingTable":
        with open(path, "rb") as f:
            if f.read(4) != _MAGIC:
                raise PatentscapeError(f"{path}: not an EMBT embedding table")
            version, dim, count = struct.unpack("<IIQ", f.read(16))
            if version != _VERSION:
                raise PatentscapeError(f"{path}: unsupported EMBT version {version}")
            vectors = {}
            for _ in range(count):
                (tok_len,) = struct.unpack("<I", f.read(4))
                token = f.read(tok_len).decode("utf-8")
                vec = np.frombuffer(f.read(4 * dim), dtype="<f4").astype(np.float64)
                vectors[token] = vec
        return cls(vectors, dimension=dim, name=name or str(path), oov_policy=oov_policy)

    # -- text format ---------------------------------------------------------

    @classmethod
    def load_text(cls, path: str | Path, name: str = "", oov_policy: str = "skip") -> "EmbeddingTable":
        vectors: dict[str, np.ndarray] = {}
        dim = None
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                parts = line.rstrip("\n").split(" ")
                if not line.strip():
                    continue
                if lineno == 1 and len(parts) == 2:
                    try:
                        int(parts[0]), int(parts[1])
                        continue  # word2vec-style "count dim" header
                    except ValueError:
                        pass
                token, rest = parts[0], parts[1:]
                try:
                    vec = np.array([float(x) for x in rest])
                except ValueError as e:
                    raise PatentscapeError(f"{path}: line {lineno}: {e}") from e
                if dim is None:
                    dim = vec.size
                elif vec.size != dim:
                    raise PatentscapeError(
                        f"{path}: line {lineno}: expected {dim} values, got {vec.size}"
                    )
                vectors[token] = vec
        if dim is None:
            raise PatentscapeError(f"{path}: empty embedding file")
        return cls(vectors, dimension=dim, name=name or str(path), oov_policy=oov_policy)

    @classmethod
    def load(cls, path: str | Path, name: str = "", oov_policy: str = "skip") -> "EmbeddingTable":
        """Sniff binary vs text by the magic bytes."""
        with open(path, "rb") as f:
            magic = f.read(4)
        if magic == _MAGIC:
            return cls.load_binary(path, name=name, oov_policy=oov_policy)
        return cls.load_text(path, name=name, oov_policy=oov_policy)


def _resolve(tokens: Sequence[str], table: EmbeddingTable, max_tokens: int) -> list[np.ndarray]:
    out = []
    for t in tokens:
        vec = table.lookup(t)
        if vec is None:
            continue
        out.append(vec)
        if len(out) == max_tokens:
            break
    return out


def mean_embedding(tokens: Sequence[str], table: EmbeddingTable, max_tokens: int = 512) -> np.ndarray:
    """Arithmetic mean of the first ``max_tokens`` resolvable token vectors.

    Empty or all-OOV input yields the zero vector.
    """
    if max_tokens < 1:
        raise PatentscapeError(f"max_tokens must be >= 1, got {max_tokens}")
    resolved = _resolve(tokens, table, max_tokens)
    if not resolved:
        return np.zeros(table.dimension)
    return np.mean(resolved, axis=0)


def cpc_avg_embedding(
    codes: Sequence,
    titles: Mapping[str, str],
    table: EmbeddingTable,
    max_tokens: int = 16,
) -> np.ndarray:
    """Place-wise average of the codes' title-token embedding sequences.

    Each code's title is tokenized and embedded into a zero-padded
    (max_tokens, d) slot sequence; slot j of the output is the mean over
    codes of slot-j vectors. Titles are looked up by canonical code string
    with a subclass-level fallback; codes with no title are skipped with a
    warning. No codes yields the all-zero sequence.
    """
    if max_tokens < 1:
        raise PatentscapeError(f"max_tokens must be >= 1, got {max_tokens}")
    sequences = []
    for code in codes:
        title = titles.get(str(code))
        if title is None and hasattr(code, "subclass"):
            title = titles.get(code.subclass)
        if title is None:
            log.warning("no CPC title for %s; code skipped", code)
            continue
        seq = np.zeros((max_tokens, table.dimension))
        for j, vec in enumerate(_resolve(tokenize(title), table, max_tokens)):
            seq[j] = vec
        sequences.append(seq)
    if not sequences:
        return np.zeros((max_tokens, table.dimension))
    return np.mean(sequences, axis=0)
