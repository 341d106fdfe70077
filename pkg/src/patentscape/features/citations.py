"""Citation-derived count features over frozen code spaces.

Both spaces are frozen from the training split: subclasses (or subclass
pairs) seen at inference but absent from the space are dropped, since the
model cannot have weights for them.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from ..graph import GraphIndex, khop_citation_codes
from .sparse import SparseVector


def build_code_space(index: GraphIndex, ids: Iterable[str] | None = None) -> list[str]:
    """All subclass codes observed on the given patents (default: whole
    corpus), sorted."""
    pool = index.all_ids if ids is None else ids
    seen = set()
    for pid in pool:
        seen.update(index.patent_subclasses.get(pid, ()))
    return sorted(seen)


def build_pair_space(index: GraphIndex, ids: Iterable[str] | None = None) -> list[tuple[str, str]]:
    """All ordered subclass pairs occurring on 2-hop citation paths out of
    the given patents, sorted."""
    pool = index.all_ids if ids is None else ids
    seen = set()
    for pid in pool:
        seen.update(khop_citation_codes(pid, 2, index).keys())
    return sorted(seen)


def onehop_cpc_counts(
    patent_id: str, index: GraphIndex, code_space: Sequence[str]
) -> SparseVector:
    """Counts of directly cited documents per subclass, in code_space order.

    Not normalized; codes outside the space are ignored.
    """
    position = {code: i for i, code in enumerate(code_space)}
    counts = khop_citation_codes(patent_id, 1, index)
    pairs = [(position[c], float(n)) for c, n in counts.items() if c in position]
    return SparseVector.from_pairs(len(code_space), pairs)


def twohop_pair_counts(
    patent_id: str, index: GraphIndex, pair_space: Sequence[tuple[str, str]]
) -> SparseVector:
    """Counts of 2-hop citation paths per ordered subclass pair."""
    position = {pair: i for i, pair in enumerate(pair_space)}
    counts = khop_citation_codes(patent_id, 2, index)
    pairs = [(position[p], float(n)) for p, n in counts.items() if p in position]
    return SparseVector.from_pairs(len(pair_space), pairs)
