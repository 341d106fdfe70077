"""Deterministic synthetic patent corpora for end-to-end exercises.

The generator builds a world with two technology clusters. Each cluster has
its own vocabulary, its own CPC subclass pool, and homophilous citations, so
every feature family in the package (text, codes, citation graph, embeddings)
carries real signal. A per-patent purity knob controls how much the two
clusters bleed into each other: easy patents are nearly pure, hard patents
are deliberately ambiguous. Unique junk tokens are salted into the text so
bag-of-words vocabularies grow the way real corpora do.

Everything derives from one integer seed; regenerating a world is
bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Sequence

import numpy as np

import random as _random

from .corpus import CorpusStore, CpcCode, LabeledExample, PatentRecord
from .errors import PatentscapeError
from .features.embeddings import EmbeddingTable
from .graph import ExpansionResult, build_index, expand

_BASE_WORDS = (
    # cluster 0: electrochemical storage
    (
        "battery", "anode", "cathode", "electrolyte", "lithium", "cell",
        "charge", "discharge", "separator", "voltage", "capacity", "electrode",
        "ion", "polymer", "membrane", "cycling", "graphite", "cobalt",
        "nickel", "oxide", "solvent", "dendrite", "cathodic", "anodic",
        "intercalation", "busbar", "terminal", "casing", "foil",
        "slurry", "binder", "porosity", "conductivity", "impedance", "thermal",
        "runaway", "module", "pack", "balancing",
    ),
    # cluster 1: precision agriculture
    (
        "irrigation", "soil", "crop", "seedling", "harvest", "tillage",
        "furrow", "sprinkler", "moisture", "nutrient", "fertilizer", "root",
        "canopy", "drainage", "mulch", "planting", "germination", "yield",
        "orchard", "vine", "pesticide", "herbicide", "weed", "plough",
        "sowing", "greenhouse", "hydroponic", "compost", "loam", "silt",
        "drip", "emitter", "valve", "agronomy", "pasture", "grain",
        "husk", "stalk", "pollination", "rootstock",
    ),
)


def _expand_vocab(base: tuple, total: int) -> tuple:
    """Pad a base word list to `total` entries with compound terms.

    A wide vocabulary matters: small training samples must not be able to
    cover it, the way a few dozen patents never cover a real domain lexicon.
    The padding is fixed (own rng), part of the world definition.
    """
    rng = _random.Random(0xC0DE)
    words = list(base)
    seen = set(words)
    while len(words) < total:
        w = rng.choice(base) + rng.choice(base)
        if w not in seen:
            seen.add(w)
            words.append(w)
    return tuple(words)


TOPIC_WORDS = tuple(_expand_vocab(b, 500) for b in _BASE_WORDS)

SUBCLASS_POOLS = (
    ("H01M", "H02J", "H01G", "B60L", "H01B", "C01D"),
    ("A01B", "A01C", "A01G", "A01M", "E02B", "C05F"),
)

_EPOCH = datetime(2026, 1, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class SyntheticWorld:
    """A generated corpus plus the ground truth behind it."""

    store: CorpusStore
    embeddings: EmbeddingTable
    cpc_titles: dict[str, str]
    topics: dict[str, int]
    purity: dict[str, float]
    seeds: tuple[str, ...]
    expansion: ExpansionResult
    rng_seed: int

    def positives(self) -> frozenset[str]:
        return frozenset(pid for pid, t in self.topics.items() if t == 0)


def _draw_words(rng, topic: int, purity: float, n: int) -> list[str]:
    own, other = TOPIC_WORDS[topic], TOPIC_WORDS[1 - topic]
    picks = rng.random(n) < purity
    return [
        (own if from_own else other)[rng.integers(0, len(own))]
        for from_own in picks
    ]


def _junk(rng, n: int) -> list[str]:
    return ["zx" + "".join(chr(97 + d) for d in rng.integers(0, 26, size=6)) for _ in range(n)]


def _codes(rng, topic: int, purity: float) -> list[CpcCode]:
    pools = SUBCLASS_POOLS
    out = []
    for _ in range(int(rng.integers(2, 5))):
        pool = pools[topic] if rng.random() < purity else pools[1 - topic]
        subclass = pool[rng.integers(0, len(pool))]
        group = rng.integers(1, 5)
        sub = 2 * (1 + rng.integers(0, 4))
        out.append(CpcCode.parse(f"{subclass}{group}/{sub:02d}"))
    # duplicates are harmless but noisy; keep first occurrences
    seen, unique = set(), []
    for c in out:
        if str(c) not in seen:
            seen.add(str(c))
            unique.append(c)
    return unique


def _build_embeddings(rng, dim: int) -> EmbeddingTable:
    """Cluster-separated word vectors: each word sits near its topic center."""
    center = rng.normal(size=dim)
    center /= np.linalg.norm(center)
    vectors = {}
    for topic, words in enumerate(TOPIC_WORDS):
        sign = 1.0 if topic == 0 else -1.0
        # iterate in vocabulary order: rng draws must not depend on set order
        for w in words:
            vectors[w] = sign * center + rng.normal(scale=0.55, size=dim)
    return EmbeddingTable(vectors, dimension=dim, name="synthetic")


def _cpc_titles(rng) -> dict[str, str]:
    titles = {}
    for topic, pool in enumerate(SUBCLASS_POOLS):
        words = TOPIC_WORDS[topic]
        for subclass in pool:
            picks = rng.integers(0, len(words), size=3)
            titles[subclass] = " ".join(words[i] for i in picks)
    return titles


def generate_world(
    n: int = 2000,
    rng_seed: int = 0,
    hard_fraction: float = 0.25,
    homophily: float = 0.85,
    embedding_dim: int = 16,
    seed_count: int = 20,
) -> SyntheticWorld:
    """Generate a two-cluster corpus of n patents and expand it from seeds.

    Seeds are high-purity cluster-0 patents, so the L2 set is dominated by
    cluster 0 and the anti-seed pool by cluster 1.
    """
    if n < 100:
        raise PatentscapeError(f"synthetic corpus needs n >= 100, got {n}")
    rng = np.random.default_rng(rng_seed)
    embeddings = _build_embeddings(rng, embedding_dim)
    cpc_titles = _cpc_titles(rng)

    topics: dict[str, int] = {}
    purity: dict[str, float] = {}
    records: list[PatentRecord] = []
    by_topic: dict[int, list[str]] = {0: [], 1: []}
    family_sizes: dict[int, int] = {0: 0, 1: 0}
    family_counter = 0
    family_ids: dict[int, str] = {0: "", 1: ""}

    for i in range(n):
        pid = f"SYN{i:05d}"
        topic = int(rng.random() < 0.5)
        hard = rng.random() < hard_fraction
        theta = rng.uniform(0.56, 0.68) if hard else rng.uniform(0.85, 0.97)

        title = " ".join(_draw_words(rng, topic, theta, 5))
        abstract = " ".join(_draw_words(rng, topic, theta, 18) + _junk(rng, 3))
        claims = " ".join(_draw_words(rng, topic, theta, 24) + _junk(rng, 3))
        description = " ".join(_draw_words(rng, topic, theta, 30))

        citations: list[str] = []
        for _ in range(int(rng.integers(2, 6))):
            cited_topic = topic if rng.random() < homophily else 1 - topic
            pool = by_topic[cited_topic]
            if pool:
                citations.append(pool[rng.integers(0, len(pool))])

        # family runs of 1-3 consecutive same-topic patents
        if family_sizes[topic] == 0:
            family_counter += 1
            family_ids[topic] = f"FAM{family_counter:05d}"
            family_sizes[topic] = int(rng.integers(1, 4))
        family_sizes[topic] -= 1

        records.append(
            PatentRecord(
                patent_id=pid,
                title=title,
                abstract=abstract,
                claims=claims,
                description=description,
                cpc_codes=_codes(rng, topic, theta),
                citations=sorted(set(citations)),
                family_id=family_ids[topic],
            )
        )
        topics[pid] = topic
        purity[pid] = theta
        by_topic[topic].append(pid)

    store = CorpusStore(records, source=f"synthetic:{rng_seed}")
    purest = sorted(
        (pid for pid in topics if topics[pid] == 0),
        key=lambda pid: (-purity[pid], pid),
    )
    seeds = tuple(purest[:seed_count])
    expansion = expand(seeds, build_index(store))
    return SyntheticWorld(
        store=store,
        embeddings=embeddings,
        cpc_titles=cpc_titles,
        topics=topics,
        purity=purity,
        seeds=seeds,
        expansion=expansion,
        rng_seed=rng_seed,
    )


def labeled_examples(
    world: SyntheticWorld,
    hard_pos: int = 100,
    hard_neg: int = 100,
    easy_pos: int = 150,
    easy_neg: int = 150,
    rng_seed: int = 0,
) -> list[LabeledExample]:
    """Assemble the four labeled groups a landscape project accumulates.

    Easy positives come from high-purity cluster-0 patents inside L2 (the
    expert seed reading), easy negatives from the anti-seed pool, and hard
    examples from the ambiguous purity band as annotator labels.
    """
    rng = np.random.default_rng(rng_seed)
    l2 = world.expansion.l2
    pool = world.expansion.antiseed_pool

    def pick(candidates: Sequence[str], k: int, what: str) -> list[str]:
        ordered = sorted(candidates)
        if len(ordered) < k:
            raise PatentscapeError(
                f"world too small: need {k} {what}, found {len(ordered)}"
            )
        idx = rng.permutation(len(ordered))[:k]
        return [ordered[i] for i in sorted(idx)]

    easy = lambda pid: world.purity[pid] >= 0.85
    hard = lambda pid: world.purity[pid] < 0.75
    topic0 = world.positives()

    easy_pos_ids = pick([p for p in l2 if p in topic0 and easy(p)], easy_pos, "easy positives")
    easy_neg_ids = pick([p for p in pool if p not in topic0 and easy(p)], easy_neg, "easy negatives")
    taken = set(easy_pos_ids) | set(easy_neg_ids)
    hard_pos_ids = pick(
        [p for p in world.topics if p in topic0 and hard(p) and p not in taken],
        hard_pos,
        "hard positives",
    )
    hard_neg_ids = pick(
        [p for p in world.topics if p not in topic0 and hard(p) and p not in taken],
        hard_neg,
        "hard negatives",
    )

    out: list[LabeledExample] = []
    stamp = lambda k: _EPOCH + timedelta(minutes=k)
    for pid in easy_pos_ids:
        out.append(
            LabeledExample(pid, "positive", "easy", "seed", labeled_at=stamp(len(out)))
        )
    for pid in easy_neg_ids:
        out.append(
            LabeledExample(pid, "negative", "easy", "anti_seed", labeled_at=stamp(len(out)))
        )
    for j, pid in enumerate(hard_pos_ids):
        out.append(
            LabeledExample(
                pid, "positive", "hard", "annotator",
                annotator_id=f"ann-{1 + j % 2}", labeled_at=stamp(len(out)),
            )
        )
    for j, pid in enumerate(hard_neg_ids):
        out.append(
            LabeledExample(
                pid, "negative", "hard", "annotator",
                annotator_id=f"ann-{1 + j % 2}", labeled_at=stamp(len(out)),
            )
        )
    return out
