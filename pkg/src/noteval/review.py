"""Blind review service: serve notes one at a time, collect verdicts, export.

Reviewers see a tag-free note body and an opaque note alias, never the
reference note, the transcript, or which model produced the note (the
canonical note ids encode the model, so payloads carry a hashed alias and
exports translate back).  Submissions land in an append-only JSONL log;
replaying the log reconstructs the exact service state, so a restart loses
nothing.
"""

from __future__ import annotations

import hashlib
import json
import random
import threading
import time
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .agreement import RatingMatrix, Verdict
from .corpus import CorpusLoad, load_corpus
from .judge import Criterion
from .notes import render_note

CRITERION_KEYS = tuple(c.value for c in Criterion)


class ReviewError(Exception):
    def __init__(self, code: str, message: str, status: int):
        self.code = code
        self.status = status
        super().__init__(message)


def _error(code: str, message: str, status: int) -> ReviewError:
    return ReviewError(code=code, message=message, status=status)


@dataclass(frozen=True)
class ReviewItem:
    canonical_id: str
    alias_id: str
    text: str


@dataclass
class Session:
    session_id: str
    reviewer_id: str
    seed: int
    order: tuple[int, ...]
    cursor: int = 0
    rated: set[str] = dataclass_field(default_factory=set)


def _alias(run_id: str, canonical_id: str) -> str:
    digest = hashlib.sha256(f"{run_id}:{canonical_id}".encode("utf-8")).hexdigest()
    return f"note-{digest[:12]}"


def _permutation(n: int, seed: int) -> tuple[int, ...]:
    order = list(range(n))
    random.Random(seed).shuffle(order)
    return tuple(order)


class ReviewStore:
    """All mutable review state; submissions serialize through one lock."""

    def __init__(self, corpus: CorpusLoad, run_id: str, log_path: Path):
        self.run_id = run_id
        self.log_path = log_path
        self.items: list[ReviewItem] = [
            ReviewItem(
                canonical_id=note.note_id,
                alias_id=_alias(run_id, note.note_id),
                text=render_note(note, with_tags=False),
            )
            for note in corpus.all_hypothesis_notes()
        ]
        self._by_alias = {item.alias_id: item for item in self.items}
        self.sessions: dict[str, Session] = {}
        self._session_by_reviewer: dict[str, str] = {}
        self.ratings: dict[tuple[str, str], dict[str, str]] = {}
        self._lock = threading.Lock()
        if log_path.exists():
            self._replay()

    # -- log -----------------------------------------------------------------

    def _append(self, entry: dict) -> None:
        with self.log_path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(entry, sort_keys=True) + "\n")
            handle.flush()

    def _replay(self) -> None:
        for line in self.log_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            entry = json.loads(line)
            if entry["kind"] == "session":
                self._register_session(
                    entry["session_id"], entry["reviewer_id"], entry["seed"]
                )
            elif entry["kind"] == "rating":
                session = self.sessions[entry["session_id"]]
                self._apply_rating(session, entry["note_id"], entry["verdicts"])

    # -- sessions ------------------------------------------------------------

    def _register_session(self, session_id: str, reviewer_id: str, seed: int) -> Session:
        session = Session(
            session_id=session_id,
            reviewer_id=reviewer_id,
            seed=seed,
            order=_permutation(len(self.items), seed),
        )
        self.sessions[session_id] = session
        self._session_by_reviewer[reviewer_id] = session_id
        return session

    def create_session(self, reviewer_id: str, seed: int, run_id: str | None) -> Session:
        if run_id is not None and run_id != self.run_id:
            raise _error("unknown_corpus", f"no corpus run {run_id!r} here", 404)
        with self._lock:
            existing_id = self._session_by_reviewer.get(reviewer_id)
            if existing_id is not None:
                existing = self.sessions[existing_id]
                if existing.seed != seed:
                    raise _error(
                        "seed_conflict",
                        f"reviewer {reviewer_id!r} already has a session with seed {existing.seed}",
                        409,
                    )
                return existing
            session_id = f"s{len(self.sessions) + 1:03d}-{reviewer_id}"
            session = self._register_session(session_id, reviewer_id, seed)
            self._append(
                {
                    "kind": "session",
                    "session_id": session_id,
                    "reviewer_id": reviewer_id,
                    "seed": seed,
                }
            )
            return session

    def _session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise _error("unknown_session", f"no session {session_id!r}", 404)
        return session

    def next_item(self, session_id: str) -> dict:
        session = self._session(session_id)
        if session.cursor >= len(session.order):
            raise _error("session_complete", "all notes have been rated", 409)
        item = self.items[session.order[session.cursor]]
        return {
            "session_id": session.session_id,
            "note_id": item.alias_id,
            "text": item.text,
            "position": session.cursor + 1,
            "total": len(session.order),
        }

    # -- submissions ---------------------------------------------------------

    def _apply_rating(self, session: Session, canonical_id: str, verdicts: dict[str, str]) -> None:
        session.rated.add(canonical_id)
        session.cursor += 1
        self.ratings[(canonical_id, session.reviewer_id)] = dict(verdicts)

    def submit(self, session_id: str, alias_id: str, verdicts: dict[str, str]) -> dict:
        with self._lock:
            session = self._session(session_id)
            missing = [key for key in CRITERION_KEYS if key not in verdicts]
            invalid = [
                key
                for key, value in verdicts.items()
                if key not in CRITERION_KEYS or value not in ("TRUE", "FALSE")
            ]
            if missing or invalid:
                raise _error(
                    "incomplete_submission",
                    f"missing criteria {missing}; invalid entries {invalid}",
                    422,
                )
            item = self._by_alias.get(alias_id)
            if item is None:
                raise _error("unknown_note", f"no note {alias_id!r}", 404)
            if item.canonical_id in session.rated:
                raise _error(
                    "duplicate_submission", f"note {alias_id!r} was already rated", 409
                )
            if session.cursor >= len(session.order):
                raise _error("session_complete", "all notes have been rated", 409)
            current = self.items[session.order[session.cursor]]
            if current.alias_id != alias_id:
                raise _error(
                    "out_of_order",
                    f"expected the current note {current.alias_id!r}, got {alias_id!r}",
                    409,
                )
            clean = {key: verdicts[key] for key in CRITERION_KEYS}
            self._append(
                {
                    "kind": "rating",
                    "session_id": session.session_id,
                    "note_id": item.canonical_id,
                    "verdicts": clean,
                    "ts": time.time(),
                }
            )
            self._apply_rating(session, item.canonical_id, clean)
            return {
                "accepted": True,
                "position": session.cursor,
                "total": len(session.order),
                "completed": session.cursor >= len(session.order),
            }

    # -- export ----------------------------------------------------------------

    def matrices(self) -> dict[str, RatingMatrix]:
        if not self.ratings:
            raise _error("no_data", "no ratings have been submitted", 409)
        reviewers = sorted({reviewer for _, reviewer in self.ratings})
        items = tuple(item.canonical_id for item in self.items)
        out = {}
        for key in CRITERION_KEYS:
            cells = {
                (canonical_id, reviewer): Verdict(verdicts[key])
                for (canonical_id, reviewer), verdicts in self.ratings.items()
            }
            out[key] = RatingMatrix(
                criterion=key, items=items, raters=tuple(reviewers), cells=cells
            )
        return out


class SessionRequest(BaseModel):
    reviewer_id: str
    seed: int = 0
    run_id: str | None = None


class RatingRequest(BaseModel):
    note_id: str
    verdicts: dict[str, str]


def create_app(
    corpus_path: str | Path,
    run_id: str | None = None,
    log_path: str | Path | None = None,
) -> FastAPI:
    """Build the review app for one corpus run."""
    corpus = load_corpus(corpus_path)
    resolved_run_id = run_id or corpus.digest[:12]
    resolved_log = Path(log_path) if log_path else Path(corpus_path).with_suffix(".review_log.jsonl")
    store = ReviewStore(corpus, resolved_run_id, resolved_log)

    app = FastAPI(title="noteval review service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.store = store

    @app.exception_handler(ReviewError)
    async def _review_error(_, exc: ReviewError) -> JSONResponse:
        return JSONResponse(
            status_code=exc.status,
            content={"detail": {"code": exc.code, "message": str(exc)}},
        )

    @app.get("/healthz")
    def healthz() -> dict:
        return {"ok": True, "run_id": store.run_id, "notes": len(store.items)}

    @app.post("/sessions")
    def create_session(request: SessionRequest) -> dict:
        session = store.create_session(request.reviewer_id, request.seed, request.run_id)
        return {
            "session_id": session.session_id,
            "reviewer_id": session.reviewer_id,
            "position": session.cursor + 1,
            "total": len(session.order),
            "completed": session.cursor >= len(session.order),
        }

    @app.get("/sessions/{session_id}/next")
    def next_item(session_id: str) -> dict:
        return store.next_item(session_id)

    @app.post("/sessions/{session_id}/ratings")
    def submit_rating(session_id: str, request: RatingRequest) -> dict:
        return store.submit(session_id, request.note_id, request.verdicts)

    @app.get("/runs/{run_id}/export.csv")
    def export_csv(run_id: str, criterion: str) -> PlainTextResponse:
        if run_id != store.run_id:
            raise _error("unknown_corpus", f"no corpus run {run_id!r} here", 404)
        if criterion not in CRITERION_KEYS:
            raise _error("unknown_criterion", f"criterion must be one of {CRITERION_KEYS}", 422)
        matrix = store.matrices()[criterion]
        lines = ["note_id,rater_id,criterion,verdict"]
        lines += [",".join(row) for row in matrix.iter_rows()]
        return PlainTextResponse("\n".join(lines) + "\n", media_type="text/csv")

    return app
