"""JSON-over-HTTP facade for annotation sessions.

Single process, in-memory sessions, event log flushed to disk on every
mutation. A crashed server rebuilds its sessions by replaying the logs, so
every response is a pure function of the log contents.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .active import (
    ActiveLearningSession,
    SessionConfig,
    init_session,
    read_events,
    replay_session,
)
from .corpus import CorpusStore, LabeledExample, record_to_dict
from .errors import (
    LabelConflictError,
    PatentscapeError,
    RecordValidationError,
    TrainingError,
    UnknownIdError,
)
from .evaluation import cohens_kappa

CLAIMS_EXCERPT_CHARS = 1000

_SOURCE_FOR_LABEL = {"positive": "seed", "negative": "anti_seed"}
_DIFFICULTY_FOR_SOURCE = {"seed": "easy", "anti_seed": "easy", "annotator": "hard"}


class SeedItem(BaseModel):
    patent_id: str
    label: str
    source: str | None = None
    annotator_id: str | None = None


class CreateSessionRequest(BaseModel):
    seeds: list[SeedItem]
    rng_seed: int = 0
    session_id: str | None = None
    config: dict = {}


class LabelRequest(BaseModel):
    patent_id: str
    label: str
    annotator_id: str


@dataclass
class ApiSession:
    """A live session plus the bookkeeping the HTTP layer owns."""

    session: ActiveLearningSession
    log_path: Path
    served: dict[str, list[str]] = field(default_factory=dict)

    def record_served(self, annotator_id: str | None, patent_ids: Sequence[str]) -> None:
        if not annotator_id:
            return
        seen = self.served.setdefault(annotator_id, [])
        for pid in patent_ids:
            if pid not in seen:
                seen.append(pid)


def _appender(path: Path):
    lock = threading.Lock()

    def write(event: dict) -> None:
        with lock:
            with path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(event, sort_keys=True, default=str) + "\n")

    return write


def _seed_examples(items: Sequence[SeedItem]) -> list[LabeledExample]:
    out = []
    for item in items:
        source = item.source or _SOURCE_FOR_LABEL.get(item.label)
        if source not in _DIFFICULTY_FOR_SOURCE:
            raise RecordValidationError(f"seed {item.patent_id}: bad source {source!r}")
        out.append(
            LabeledExample(
                patent_id=item.patent_id,
                label=item.label,
                difficulty=_DIFFICULTY_FOR_SOURCE[source],
                source=source,
                annotator_id=item.annotator_id,
            )
        )
    return out


def pairwise_kappa(events: Sequence[dict]) -> list[dict]:
    """Agreement between annotator pairs, from judgments on shared patents.

    The session keeps one label per patent, so overlap comes from conflict
    events: each one records a second annotator's judgment on an item someone
    already labeled. Pairs with no overlap are omitted.
    """
    judgments: dict[str, dict[str, str]] = {}

    def note(annotator: str | None, pid: str, label: str) -> None:
        if annotator:
            judgments.setdefault(annotator, {}).setdefault(pid, label)

    for ev in events:
        if ev.get("type") in ("label", "override"):
            note(ev.get("annotator_id"), ev["patent_id"], ev["label"])
        elif ev.get("type") == "conflict":
            note(ev.get("annotator_id"), ev["patent_id"], ev["label"])
            note(ev.get("existing_annotator_id"), ev["patent_id"], ev["existing_label"])

    names = sorted(judgments)
    out = []
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            shared = set(judgments[a]) & set(judgments[b])
            if not shared:
                continue
            out.append(
                {
                    "annotators": [a, b],
                    "kappa": cohens_kappa(judgments[a], judgments[b]),
                    "overlap": len(shared),
                }
            )
    return out


def load_sessions(corpus: CorpusStore, log_dir: Path) -> dict[str, ApiSession]:
    """Rebuild every session whose event log survives in log_dir."""
    sessions: dict[str, ApiSession] = {}
    for path in sorted(log_dir.glob("*.jsonl")):
        events = read_events(path)
        session = replay_session(corpus, events)
        session.on_event = _appender(path)
        sessions[session.session_id] = ApiSession(session=session, log_path=path)
    return sessions


def create_app(
    corpus: CorpusStore,
    log_dir: str | Path,
    cors_origins: Sequence[str] = ("*",),
    recover: bool = True,
) -> FastAPI:
    log_dir = Path(log_dir)
    log_dir.mkdir(parents=True, exist_ok=True)
    app = FastAPI(title="patentscape", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.corpus = corpus
    app.state.log_dir = log_dir
    app.state.sessions = load_sessions(corpus, log_dir) if recover else {}
    app.state.create_lock = threading.Lock()

    def error(status: int, code: str, message: str, detail=None) -> JSONResponse:
        body = {"code": code, "message": message}
        if detail is not None:
            body["detail"] = detail
        return JSONResponse(body, status_code=status)

    @app.exception_handler(UnknownIdError)
    async def _unknown(request: Request, exc: UnknownIdError):
        return error(404, "not_found", str(exc))

    @app.exception_handler(LabelConflictError)
    async def _conflict(request: Request, exc: LabelConflictError):
        return error(
            409,
            "conflict",
            str(exc),
            detail={
                "patent_id": exc.patent_id,
                "existing_label": exc.existing.label,
                "existing_annotator_id": exc.existing.annotator_id,
            },
        )

    @app.exception_handler(RecordValidationError)
    async def _invalid(request: Request, exc: RecordValidationError):
        return error(422, "invalid", str(exc))

    @app.exception_handler(TrainingError)
    async def _training(request: Request, exc: TrainingError):
        return error(422, "invalid", str(exc))

    @app.exception_handler(PatentscapeError)
    async def _bad(request: Request, exc: PatentscapeError):
        return error(400, "bad_request", str(exc))

    @app.exception_handler(RequestValidationError)
    async def _schema(request: Request, exc: RequestValidationError):
        return error(422, "invalid", "request body failed validation", detail=exc.errors())

    def get_session(session_id: str) -> ApiSession:
        try:
            return app.state.sessions[session_id]
        except KeyError:
            raise UnknownIdError(session_id, f"unknown session id: {session_id!r}") from None

    @app.post("/api/v1/sessions", status_code=201)
    def create_session(body: CreateSessionRequest):
        defaults = SessionConfig().to_dict()
        unknown = set(body.config) - set(defaults)
        if unknown:
            raise RecordValidationError(f"unknown config keys: {sorted(unknown)}")
        config = SessionConfig.from_dict({**defaults, **body.config})
        seeds = _seed_examples(body.seeds)
        with app.state.create_lock:
            session = init_session(
                app.state.corpus,
                seeds,
                rng_seed=body.rng_seed,
                session_id=body.session_id,
                config=config,
            )
            if session.session_id in app.state.sessions:
                raise PatentscapeError(f"session {session.session_id!r} already exists")
            path = app.state.log_dir / f"{session.session_id}.jsonl"
            appender = _appender(path)
            for event in session.events:  # init happened before the hook existed
                appender(event)
            session.on_event = appender
            app.state.sessions[session.session_id] = ApiSession(session=session, log_path=path)
        return {
            "session_id": session.session_id,
            "queue_size": len(session.ranked_queue),
            "labels_total": len(session.labeled),
        }

    @app.get("/api/v1/sessions/{session_id}/queue")
    def queue(session_id: str, k: int = 10, annotator_id: str | None = None):
        api = get_session(session_id)
        items = []
        if k > 0:
            for rec in api.session.next_candidates(k):
                items.append(
                    {
                        "patent_id": rec.patent_id,
                        "title": rec.title,
                        "abstract": rec.abstract,
                        "claims_excerpt": rec.claims[:CLAIMS_EXCERPT_CHARS],
                        "uncertainty": api.session.uncertainty(rec.patent_id),
                    }
                )
        api.record_served(annotator_id, [i["patent_id"] for i in items])
        return {"items": items}

    @app.post("/api/v1/sessions/{session_id}/labels")
    def submit_label(session_id: str, body: LabelRequest):
        api = get_session(session_id)
        retrained = api.session.submit_label(body.patent_id, body.label, body.annotator_id)
        return {"retrained": retrained, "labels_total": len(api.session.labeled)}

    @app.get("/api/v1/sessions/{session_id}/stats")
    def stats(session_id: str):
        api = get_session(session_id)
        snapshot = api.session.stats()
        snapshot["kappa_pairs"] = pairwise_kappa(api.session.events)
        snapshot["served"] = {a: len(ids) for a, ids in api.served.items()}
        return snapshot

    @app.get("/api/v1/patents/{patent_id}")
    def patent(patent_id: str):
        return record_to_dict(app.state.corpus.get(patent_id))

    return app
