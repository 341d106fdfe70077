"""Tokenization, vocabulary construction, and tf-idf vectors.

The tf-idf variant is fixed so vectors are reproducible everywhere:
raw term frequency times smoothed idf, ln((1+N)/(1+df)) + 1, then
L2 normalization.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from ..errors import PatentscapeError
from .sparse import SparseVector

# alphanumeric runs (unicode letters and digits, not underscore)
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

STOPWORD_SET_ID = "en-179-v1"
_STOPWORD_FILE = "stopwords_en_v1.txt"


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumeric runs, keep tokens of length >= 2
    that are not digits-only."""
    return [
        t
        for t in _TOKEN_RE.findall(text.lower())
        if len(t) >= 2 and not t.isdigit()
    ]


def load_stopwords() -> frozenset[str]:
    """The versioned English stop-word list shipped with the package."""
    data = resources.files("patentscape.features").joinpath("data", _STOPWORD_FILE)
    words = data.read_text(encoding="utf-8").split()
    return frozenset(words)


@dataclass(frozen=True)
class Vocabulary:
    """Token-to-column mapping with document frequencies.

    Indices are dense 0..|V|-1 in lexicographic token order, which makes the
    mapping independent of document order.
    """

    index: dict[str, int]
    document_frequency: dict[str, int]
    total_documents: int
    stopword_set_id: str = STOPWORD_SET_ID

    def __len__(self) -> int:
        return len(self.index)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": "patentscape-vocabulary",
                "version": 1,
                "stopword_set_id": self.stopword_set_id,
                "total_documents": self.total_documents,
                "tokens": [
                    {"token": t, "df": self.document_frequency[t]}
                    for t in sorted(self.index, key=self.index.__getitem__)
                ],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        obj = json.loads(text)
        if obj.get("format") != "patentscape-vocabulary" or obj.get("version") != 1:
            raise PatentscapeError("not a version-1 vocabulary file")
        tokens = obj["tokens"]
        return cls(
            index={e["token"]: i for i, e in enumerate(tokens)},
            document_frequency={e["token"]: e["df"] for e in tokens},
            total_documents=obj["total_documents"],
            stopword_set_id=obj.get("stopword_set_id", "unknown"),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def build_vocabulary(
    docs: Iterable[Sequence[str]],
    stopwords: frozenset[str] | None = None,
    min_df: int = 1,
    stopword_set_id: str | None = None,
) -> Vocabulary:
    """Vocabulary of non-stopword tokens with document frequency >= min_df."""
    if min_df < 1:
        raise PatentscapeError(f"min_df must be >= 1, got {min_df}")
    if stopwords is None:
        stopwords = load_stopwords()
        stopword_set_id = stopword_set_id or STOPWORD_SET_ID
    df: Counter = Counter()
    n_docs = 0
    for doc in docs:
        n_docs += 1
        df.update(set(doc) - stopwords)
    kept = sorted(t for t, c in df.items() if c >= min_df)
    return Vocabulary(
        index={t: i for i, t in enumerate(kept)},
        document_frequency={t: df[t] for t in kept},
        total_documents=n_docs,
        stopword_set_id=stopword_set_id or "custom",
    )


def tfidf_vector(doc: Sequence[str], vocab: Vocabulary) -> SparseVector:
    """L2-normalized tf-idf vector over the vocabulary's column space.

    value(t) = tf(t, doc) * (ln((1+N)/(1+df(t))) + 1); tokens outside the
    vocabulary are ignored.
    """
    n = vocab.total_documents
    tf = Counter(t for t in doc if t in vocab.index)
    pairs = []
    for token, count in tf.items():
        idf = math.log((1 + n) / (1 + vocab.document_frequency[token])) + 1.0
        pairs.append((vocab.index[token], count * idf))
    return SparseVector.from_pairs(len(vocab), pairs).l2_normalized()
