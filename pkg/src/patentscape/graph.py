"""Citation/CPC/family indexes and the seed expansion procedure.

Expansion tiers: L1 adds patents that share a CPC code with, or are cited by,
the seed patents; L2 adds family members of L1. Everything outside L2 forms
the anti-seed pool from which easy negatives are sampled.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .corpus import CorpusStore
from .errors import PatentscapeError, UnknownIdError

CPC_LEVELS = ("subgroup", "subclass")


@dataclass(frozen=True)
class GraphIndex:
    """Immutable adjacency views over a corpus.

    ``reverse_citations`` is the exact transpose of ``forward_citations``;
    adjacency lists are sorted and duplicate-free. Cited ids absent from the
    corpus stay listed but are flagged in ``dangling_citations``.
    """

    all_ids: frozenset[str]
    forward_citations: dict[str, tuple[str, ...]]
    reverse_citations: dict[str, tuple[str, ...]]
    cpc_to_patents: dict[str, tuple[str, ...]]       # subgroup-level (full code)
    subclass_to_patents: dict[str, tuple[str, ...]]
    family_to_patents: dict[str, tuple[str, ...]]
    patent_codes: dict[str, tuple[str, ...]]         # full canonical codes
    patent_subclasses: dict[str, tuple[str, ...]]    # distinct, sorted
    patent_family: dict[str, str]
    dangling_citations: tuple[tuple[str, str], ...]  # (citing, cited-but-absent)

    def require(self, patent_id: str) -> None:
        if patent_id not in self.all_ids:
            raise UnknownIdError(patent_id)


def build_index(corpus: CorpusStore) -> GraphIndex:
    """Build all adjacency maps in one deterministic pass over sorted ids."""
    forward: dict[str, tuple[str, ...]] = {}
    reverse_sets: dict[str, set[str]] = {}
    cpc: dict[str, set[str]] = {}
    subclass: dict[str, set[str]] = {}
    families: dict[str, set[str]] = {}
    codes: dict[str, tuple[str, ...]] = {}
    subclasses: dict[str, tuple[str, ...]] = {}
    family_of: dict[str, str] = {}
    dangling: list[tuple[str, str]] = []

    ids = corpus.ids()
    known = frozenset(ids)
    for pid in ids:
        rec = corpus.get(pid)
        cited = tuple(sorted(set(rec.citations)))
        forward[pid] = cited
        for target in cited:
            reverse_sets.setdefault(target, set()).add(pid)
            if target not in known:
                dangling.append((pid, target))
        codes[pid] = tuple(sorted({str(c) for c in rec.cpc_codes}))
        subclasses[pid] = rec.subclasses()
        for code in codes[pid]:
            cpc.setdefault(code, set()).add(pid)
        for sc in subclasses[pid]:
            subclass.setdefault(sc, set()).add(pid)
        family_of[pid] = rec.family_id
        if rec.family_id:
            families.setdefault(rec.family_id, set()).add(pid)

    return GraphIndex(
        all_ids=known,
        forward_citations=forward,
        reverse_citations={k: tuple(sorted(v)) for k, v in sorted(reverse_sets.items())},
        cpc_to_patents={k: tuple(sorted(v)) for k, v in sorted(cpc.items())},
        subclass_to_patents={k: tuple(sorted(v)) for k, v in sorted(subclass.items())},
        family_to_patents={k: tuple(sorted(v)) for k, v in sorted(families.items())},
        patent_codes=codes,
        patent_subclasses=subclasses,
        patent_family=family_of,
        dangling_citations=tuple(sorted(dangling)),
    )


def expand_l1(
    seeds: Iterable[str],
    index: GraphIndex,
    cpc_level: str = "subgroup",
    include_citing: bool = False,
) -> frozenset[str]:
    """Seeds plus every patent sharing a CPC code with, or cited by, a seed.

    Code sharing is evaluated at ``subgroup`` (full code) granularity by
    default; set ``cpc_level="subclass"`` for the broader reading.
    ``include_citing`` additionally pulls in patents that cite the seeds
    (off by default; the base rule is outward-only).
    """
    if cpc_level not in CPC_LEVELS:
        raise PatentscapeError(f"cpc_level must be one of {CPC_LEVELS}, got {cpc_level!r}")
    seed_set = set(seeds)
    for pid in seed_set:
        index.require(pid)
    result = set(seed_set)
    for pid in seed_set:
        if cpc_level == "subgroup":
            for code in index.patent_codes[pid]:
                result.update(index.cpc_to_patents.get(code, ()))
        else:
            for sc in index.patent_subclasses[pid]:
                result.update(index.subclass_to_patents.get(sc, ()))
        for cited in index.forward_citations[pid]:
            if cited in index.all_ids:  # dangling targets contribute nothing
                result.add(cited)
        if include_citing:
            result.update(index.reverse_citations.get(pid, ()))
    return frozenset(result)


def expand_l2(l1: Iterable[str], index: GraphIndex) -> frozenset[str]:
    """L1 plus all patents sharing a non-empty family id with an L1 member."""
    l1_set = set(l1)
    for pid in l1_set:
        index.require(pid)
    result = set(l1_set)
    for pid in l1_set:
        fam = index.patent_family.get(pid, "")
        if fam:
            result.update(index.family_to_patents.get(fam, ()))
    return frozenset(result)


@dataclass(frozen=True)
class ExpansionResult:
    """The four-way partition {seeds, l1∖seeds, l2∖l1, antiseed_pool}."""

    seeds: frozenset[str]
    l1: frozenset[str]
    l2: frozenset[str]
    antiseed_pool: frozenset[str]

    def check(self, all_ids: frozenset[str]) -> None:
        """Assert the subset chain and exact-cover invariants."""
        assert self.seeds <= self.l1 <= self.l2 <= all_ids
        assert self.antiseed_pool == all_ids - self.l2

    def save(self, directory: str | Path) -> None:
        """Write the four sorted newline-delimited id files."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for name, ids in (
            ("seeds.txt", self.seeds),
            ("l1.txt", self.l1),
            ("l2.txt", self.l2),
            ("antiseed_pool.txt", self.antiseed_pool),
        ):
            text = "".join(pid + "\n" for pid in sorted(ids))
            (directory / name).write_text(text, encoding="utf-8")


def expand(
    seeds: Iterable[str],
    index: GraphIndex,
    cpc_level: str = "subgroup",
    include_citing: bool = False,
) -> ExpansionResult:
    seed_set = frozenset(seeds)
    l1 = expand_l1(seed_set, index, cpc_level=cpc_level, include_citing=include_citing)
    l2 = expand_l2(l1, index)
    return ExpansionResult(
        seeds=seed_set,
        l1=l1,
        l2=l2,
        antiseed_pool=frozenset(index.all_ids - l2),
    )


def sample_antiseeds(pool: Iterable[str], n: int, rng_seed: int) -> list[str]:
    """Uniform sample without replacement, reproducible for a fixed seed.

    The underlying PRNG is Python's Mersenne Twister (``mt19937``), which is
    platform-stable; output is sorted by patent id so downstream splits are
    order-independent.
    """
    ordered = sorted(pool)
    if n > len(ordered):
        raise PatentscapeError(
            f"cannot sample {n} anti-seeds from a pool of {len(ordered)}"
        )
    rng = random.Random(rng_seed)
    return sorted(rng.sample(ordered, n))


def khop_citation_codes(patent_id: str, k: int, index: GraphIndex) -> Counter:
    """Multiset of subclass codes reachable along citation paths of length k.

    k=1 counts, per directly cited corpus patent, each of its distinct
    subclass codes once. k=2 counts ordered (hop-1 subclass, hop-2 subclass)
    pairs over every 2-step citation path, with the full cross product when
    either endpoint carries several subclasses. Dangling targets contribute
    nothing.
    """
    if k not in (1, 2):
        raise PatentscapeError(f"k must be 1 or 2, got {k}")
    index.require(patent_id)
    counts: Counter = Counter()
    if k == 1:
        for q in index.forward_citations[patent_id]:
            for sc in index.patent_subclasses.get(q, ()):
                counts[sc] += 1
    else:
        for q in index.forward_citations[patent_id]:
            if q not in index.all_ids:
                continue
            for r in index.forward_citations[q]:
                for x in index.patent_subclasses.get(q, ()):
                    for y in index.patent_subclasses.get(r, ()):
                        counts[(x, y)] += 1
    return counts
