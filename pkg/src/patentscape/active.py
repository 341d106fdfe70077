"""Active-learning session: uncertainty-ranked labeling queue over a corpus.

The session holds a labeled set, an unlabeled pool, and a linear SVM over
tf-idf features of each patent's title and abstract. The pool is ranked by
ascending margin distance (uncertainty sampling); after every
``retrain_cadence`` annotator labels the model retrains on all labeled
examples and the pool re-ranks.

Every mutation appends a JSON-serializable event; replaying the event log
against the same corpus reconstructs a bit-identical session, which is also
the crash-recovery story for the HTTP service.
"""

from __future__ import annotations

import hashlib
import json
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .corpus import (
    CorpusStore,
    LabeledExample,
    PatentRecord,
    label_from_dict,
    label_to_dict,
)
from .errors import LabelConflictError, PatentscapeError, TrainingError, UnknownIdError
from .features import SparseVector, build_vocabulary, tfidf_vector, tokenize
from .svm import LinearSvmModel, margin_distance, train_linear

DEFAULT_CADENCE = 10
TRAIN_ON = ("all", "annotator")


@dataclass(frozen=True)
class SessionConfig:
    retrain_cadence: int = DEFAULT_CADENCE
    train_on: str = "all"
    text_fields: tuple[str, ...] = ("title", "abstract")
    lam: float = 1e-4
    epochs: int = 20
    min_df: int = 1

    def __post_init__(self):
        if self.retrain_cadence < 1:
            raise PatentscapeError("retrain_cadence must be >= 1")
        if self.train_on not in TRAIN_ON:
            raise PatentscapeError(f"train_on must be one of {TRAIN_ON}")

    def to_dict(self) -> dict:
        return {
            "retrain_cadence": self.retrain_cadence,
            "train_on": self.train_on,
            "text_fields": list(self.text_fields),
            "lam": self.lam,
            "epochs": self.epochs,
            "min_df": self.min_df,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SessionConfig":
        return cls(
            retrain_cadence=obj["retrain_cadence"],
            train_on=obj["train_on"],
            text_fields=tuple(obj["text_fields"]),
            lam=obj["lam"],
            epochs=obj["epochs"],
            min_df=obj["min_df"],
        )


def model_hash(model: LinearSvmModel) -> str:
    h = hashlib.sha256()
    h.update(model.weight.tobytes())
    h.update(repr(model.bias).encode())
    return h.hexdigest()


class ActiveLearningSession:
    """Single-writer labeling session; see module docstring.

    Mutations are serialized through an internal lock, so concurrent
    annotators interleave cleanly and the first label for a patent wins.
    """

    def __init__(
        self,
        corpus: CorpusStore,
        session_id: str,
        rng_seed: int,
        config: SessionConfig,
        on_event: Callable[[dict], None] | None = None,
    ):
        self.corpus = corpus
        self.session_id = session_id
        self.rng_seed = rng_seed
        self.config = config
        self.labeled: dict[str, LabeledExample] = {}
        self.pool: set[str] = set(corpus.ids())
        self.model: LinearSvmModel | None = None
        self.ranked_queue: list[str] = []
        self.labels_since_retrain = 0
        self.retrain_count = 0
        self.events: list[dict] = []
        self.on_event = on_event
        self._lock = threading.Lock()
        self._vocab = build_vocabulary(
            (self._doc_tokens(corpus.get(pid)) for pid in corpus.ids()),
            min_df=config.min_df,
        )
        self._features: dict[str, SparseVector] = {
            pid: tfidf_vector(self._doc_tokens(corpus.get(pid)), self._vocab)
            for pid in corpus.ids()
        }

    # -- internals ----------------------------------------------------------

    def _doc_tokens(self, rec: PatentRecord) -> list[str]:
        text = " ".join(getattr(rec, f) for f in self.config.text_fields)
        return tokenize(text)

    def _emit(self, event: dict) -> None:
        event["seq"] = len(self.events)
        self.events.append(event)
        if self.on_event is not None:
            self.on_event(event)

    def _training_examples(self, include_all: bool) -> list[tuple[SparseVector, int]]:
        out = []
        for pid in sorted(self.labeled):
            ex = self.labeled[pid]
            if not include_all and self.config.train_on == "annotator" and ex.source != "annotator":
                continue
            out.append((self._features[pid], 1 if ex.label == "positive" else -1))
        return out

    def _retrain(self, include_all: bool = False) -> None:
        # the initial model has only seeds to learn from, so the train_on
        # filter applies to cadence retrains alone
        data = self._training_examples(include_all)
        model = train_linear(
            data, lam=self.config.lam, epochs=self.config.epochs, rng_seed=self.rng_seed
        )
        # only swap state in once training has succeeded
        self.model = model
        self.retrain_count += 1
        self._rerank()

    def _rerank(self) -> None:
        scored = sorted(
            (margin_distance(self.model, self._features[pid]), pid) for pid in self.pool
        )
        self.ranked_queue = [pid for _, pid in scored]

    # -- queries -------------------------------------------------------------

    def next_candidates(self, k: int) -> list[PatentRecord]:
        """First k queue entries (ascending uncertainty, ties by patent id).

        Items stay re-servable until someone labels them.
        """
        if k < 1:
            raise PatentscapeError(f"k must be >= 1, got {k}")
        with self._lock:
            return [self.corpus.get(pid) for pid in self.ranked_queue[:k]]

    def uncertainty(self, patent_id: str) -> float:
        if patent_id not in self._features:
            raise UnknownIdError(patent_id)
        return margin_distance(self.model, self._features[patent_id])

    def stats(self) -> dict:
        with self._lock:
            by_category: dict[str, int] = {}
            by_source: dict[str, int] = {}
            for ex in self.labeled.values():
                by_category[ex.category] = by_category.get(ex.category, 0) + 1
                by_source[ex.source] = by_source.get(ex.source, 0) + 1
            return {
                "session_id": self.session_id,
                "pool_size": len(self.pool),
                "labels_total": len(self.labeled),
                "labels_by_category": by_category,
                "labels_by_source": by_source,
                "labels_since_retrain": self.labels_since_retrain,
                "retrain_count": self.retrain_count,
                "model_hash": model_hash(self.model) if self.model else None,
            }

    # -- mutations ------------------------------------------------------------

    def submit_label(
        self,
        patent_id: str,
        label: str,
        annotator_id: str,
        labeled_at: datetime | None = None,
    ) -> bool:
        """Record an annotator judgment. Returns True when it triggered a
        retrain. Conflicts (the id is already labeled) raise with the
        existing label and are themselves logged, so later agreement
        analysis can see both judgments.
        """
        with self._lock:
            if patent_id not in self.pool:
                if patent_id in self.labeled:
                    existing = self.labeled[patent_id]
                    self._emit({
                        "type": "conflict",
                        "patent_id": patent_id,
                        "label": label,
                        "annotator_id": annotator_id,
                        "existing_label": existing.label,
                        "existing_annotator_id": existing.annotator_id,
                    })
                    raise LabelConflictError(patent_id, existing)
                raise UnknownIdError(patent_id)
            example = LabeledExample(
                patent_id=patent_id,
                label=label,
                difficulty="hard",
                source="annotator",
                annotator_id=annotator_id,
                labeled_at=labeled_at or datetime.now(timezone.utc),
            )
            self.pool.discard(patent_id)
            if patent_id in self.ranked_queue:
                self.ranked_queue.remove(patent_id)
            self.labeled[patent_id] = example
            self.labels_since_retrain += 1
            self._emit({"type": "label", **label_to_dict(example)})
            return self._maybe_retrain_locked()

    def _maybe_retrain_locked(self) -> bool:
        if self.labels_since_retrain < self.config.retrain_cadence:
            return False
        self._retrain()
        self.labels_since_retrain = 0
        self._emit({
            "type": "retrain",
            "model_hash": model_hash(self.model),
            "labeled_count": len(self.labeled),
        })
        return True

    def maybe_retrain(self) -> bool:
        """Retrain + re-rank if the cadence is due; no-op otherwise."""
        with self._lock:
            return self._maybe_retrain_locked()

    def override_label(
        self,
        patent_id: str,
        label: str,
        annotator_id: str,
        labeled_at: datetime | None = None,
    ) -> LabeledExample:
        """Explicit conflict resolution: replace an existing label.

        Overrides do not advance the retrain counter (they correct
        information rather than add it); the change lands in the model at
        the next cadence retrain.
        """
        with self._lock:
            if patent_id not in self.labeled:
                raise UnknownIdError(
                    patent_id, f"cannot override: {patent_id!r} has no label"
                )
            example = LabeledExample(
                patent_id=patent_id,
                label=label,
                difficulty="hard",
                source="annotator",
                annotator_id=annotator_id,
                labeled_at=labeled_at or datetime.now(timezone.utc),
            )
            self.labeled[patent_id] = example
            self._emit({"type": "override", **label_to_dict(example)})
            return example


def init_session(
    corpus: CorpusStore,
    seed_examples: Sequence[LabeledExample],
    rng_seed: int = 0,
    session_id: str | None = None,
    config: SessionConfig | None = None,
    on_event: Callable[[dict], None] | None = None,
) -> ActiveLearningSession:
    """Train the initial model on the seed examples and rank the full pool."""
    config = config or SessionConfig()
    labels = {ex.label for ex in seed_examples}
    if labels != {"positive", "negative"}:
        raise TrainingError("seed examples must contain both labels")
    session = ActiveLearningSession(
        corpus=corpus,
        session_id=session_id or str(uuid.uuid4()),
        rng_seed=rng_seed,
        config=config,
        on_event=on_event,
    )
    for ex in seed_examples:
        if ex.patent_id not in corpus:
            raise UnknownIdError(ex.patent_id)
        if ex.patent_id in session.labeled:
            raise LabelConflictError(ex.patent_id, session.labeled[ex.patent_id])
        session.labeled[ex.patent_id] = ex
        session.pool.discard(ex.patent_id)
    session._emit({
        "type": "init",
        "session_id": session.session_id,
        "rng_seed": rng_seed,
        "config": config.to_dict(),
        "seeds": [label_to_dict(ex) for ex in seed_examples],
    })
    session._retrain(include_all=True)
    session._emit({
        "type": "retrain",
        "model_hash": model_hash(session.model),
        "labeled_count": len(session.labeled),
    })
    return session


# ---------------------------------------------------------------------------
# Event log persistence and replay
# ---------------------------------------------------------------------------


def write_events(events: Iterable[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for event in events:
            f.write(json.dumps(event, ensure_ascii=False) + "\n")


def read_events(path: str | Path) -> list[dict]:
    events = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                events.append(json.loads(line))
    return events


def replay_session(
    corpus: CorpusStore,
    events: Sequence[dict],
    on_event: Callable[[dict], None] | None = None,
) -> ActiveLearningSession:
    """Rebuild a session by re-executing its event log.

    Label and override events are re-applied with their recorded
    timestamps; retrain events re-fire from the cadence and are checked
    against the logged model hashes; conflict events are appended verbatim
    (they carry no state). The result is bit-identical to the original.
    """
    if not events or events[0].get("type") != "init":
        raise PatentscapeError("event log must start with an init event")
    head = events[0]
    session = init_session(
        corpus,
        [label_from_dict(obj) for obj in head["seeds"]],
        rng_seed=head["rng_seed"],
        session_id=head["session_id"],
        config=SessionConfig.from_dict(head["config"]),
    )
    for event in events[1:]:
        kind = event["type"]
        if kind == "label":
            ex = label_from_dict(event)
            try:
                session.submit_label(
                    ex.patent_id, ex.label, ex.annotator_id, labeled_at=ex.labeled_at
                )
            except TrainingError:
                # The original session hit (and survived) the same failed
                # cadence retrain; the label itself is already applied.
                pass
        elif kind == "override":
            ex = label_from_dict(event)
            session.override_label(
                ex.patent_id, ex.label, ex.annotator_id, labeled_at=ex.labeled_at
            )
        elif kind == "conflict":
            # state-free; keep the log faithful
            session._emit({k: v for k, v in event.items() if k != "seq"})
        elif kind == "retrain":
            expected = event["model_hash"]
            got = session.events[-1].get("model_hash") if session.events else None
            if session.events[-1].get("type") != "retrain" or got != expected:
                raise PatentscapeError(
                    f"replay diverged: expected retrain hash {expected[:12]}..., "
                    f"got {str(got)[:12]}..."
                )
        else:
            raise PatentscapeError(f"unknown event type {kind!r}")
    session.on_event = on_event
    return session


def state_digest(session: ActiveLearningSession) -> str:
    """Hash of everything that defines the session's current state."""
    h = hashlib.sha256()
    payload = {
        "session_id": session.session_id,
        "rng_seed": session.rng_seed,
        "config": session.config.to_dict(),
        "labeled": [label_to_dict(session.labeled[pid]) for pid in sorted(session.labeled)],
        "pool": sorted(session.pool),
        "queue": session.ranked_queue,
        "labels_since_retrain": session.labels_since_retrain,
        "retrain_count": session.retrain_count,
        "model_hash": model_hash(session.model) if session.model else None,
    }
    h.update(json.dumps(payload, sort_keys=True).encode("utf-8"))
    return h.hexdigest()
