"""User-study backend: sessions, timed trials, answer scoring, aggregation.

The study presents a pair of images per round; the participant has 5 seconds
to answer. Scores: 0 when the fake side is correctly identified, 1 when the
real image is mistaken for the fake, 0.5 for "don't know" — and overtime
answers become "don't know" regardless of payload. In a-vs-b mode (preference
studies between two methods) the same machinery scores "candidate preferred"
as 1, with the candidate occupying the fake slot of the manifest.

Timing authority is strictly server-side: issued_at is recorded when the
trial is committed, answered_at when the answer arrives, both from the
service clock (injectable for tests); client timestamps are never trusted.

Persistence is a single append-only JSONL event log. "answer" events carry
exactly the TrialRecord fields, one record per line; "session" and "issued"
events exist so that issued trials are durable before the response leaves the
server and sessions survive restarts. Replaying the log reproduces aggregate
results exactly.
"""

from __future__ import annotations

import json
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .bench_harness import BUCKET_LABELS
from .errors import ConfigError, DomainError, IdsBenchError
from .rng import generator_from, split_seed

DEADLINE_MS = 5000

ANSWERS = ("left", "right", "dont_know")
MODES = ("real-vs-fake", "a-vs-b")

__all__ = [
    "DEADLINE_MS",
    "PairEntry",
    "StudyManifest",
    "StudySession",
    "TrialRecord",
    "StudyService",
    "StudyError",
    "ServiceNotReady",
    "UnknownSession",
    "UnknownTrial",
    "PendingTrial",
    "StudyComplete",
    "score_answer",
]


class StudyError(IdsBenchError):
    exit_code = 2


class ServiceNotReady(StudyError):
    pass


class UnknownSession(StudyError):
    pass


class UnknownTrial(StudyError):
    """Unknown trial id or duplicate submission; no state change happened."""


class PendingTrial(StudyError):
    """A trial is already issued and unanswered for this session."""

    def __init__(self, view: dict):
        self.view = view
        super().__init__(f"trial {view['trial_id']} is pending")


class StudyComplete(StudyError):
    """No unserved pair remains for this session."""


@dataclass(frozen=True)
class PairEntry:
    pair_id: str
    method: str
    bucket: str
    real_path: Path
    fake_path: Path


class StudyManifest:
    """Validated list of study pairs plus the answer-semantics mode."""

    def __init__(self, entries: list[PairEntry], mode: str = "real-vs-fake"):
        if not entries:
            raise ConfigError("manifest has no entries")
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
        seen = set()
        for e in entries:
            if e.pair_id in seen:
                raise ConfigError(f"duplicate pair_id {e.pair_id!r}")
            seen.add(e.pair_id)
            if e.bucket not in BUCKET_LABELS:
                raise ConfigError(
                    f"pair {e.pair_id}: bucket {e.bucket!r} not in {BUCKET_LABELS}"
                )
            for p in (e.real_path, e.fake_path):
                if not Path(p).is_file():
                    raise ConfigError(f"pair {e.pair_id}: missing image {p}")
        self.entries = list(entries)
        self.mode = mode
        self.by_id = {e.pair_id: e for e in entries}

    @staticmethod
    def load(path) -> "StudyManifest":
        raw = json.loads(Path(path).read_text())
        base = Path(path).parent
        if isinstance(raw, list):  # bare entry list defaults to real-vs-fake
            raw = {"mode": "real-vs-fake", "entries": raw}
        entries = [
            PairEntry(
                pair_id=str(e["pair_id"]),
                method=e.get("method", "default"),
                bucket=e["bucket"],
                real_path=(base / e["real"]).resolve(),
                fake_path=(base / e["fake"]).resolve(),
            )
            for e in raw["entries"]
        ]
        return StudyManifest(entries, raw.get("mode", "real-vs-fake"))


@dataclass
class StudySession:
    session_id: str
    participant: str
    served_pair_ids: list[str] = field(default_factory=list)
    served_real_images: set = field(default_factory=set)
    completed_trials: int = 0
    pending: dict | None = None  # committed but unanswered trial
    trial_seq: int = 0


@dataclass(frozen=True)
class TrialRecord:
    session_id: str
    pair_id: str
    presentation: str  # side that showed the fake: "left" | "right"
    issued_at: int  # ms
    answered_at: int  # ms
    answer: str  # left | right | dont_know | overtime
    score: float  # 0, 0.5, or 1

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "pair_id": self.pair_id,
            "presentation": self.presentation,
            "issued_at": self.issued_at,
            "answered_at": self.answered_at,
            "answer": self.answer,
            "score": self.score,
        }

    @staticmethod
    def from_dict(d: dict) -> "TrialRecord":
        return TrialRecord(
            session_id=d["session_id"],
            pair_id=d["pair_id"],
            presentation=d["presentation"],
            issued_at=d["issued_at"],
            answered_at=d["answered_at"],
            answer=d["answer"],
            score=d["score"],
        )


def score_answer(answer: str, fake_side: str, elapsed_ms: int, mode: str = "real-vs-fake") -> tuple[str, float]:
    """Pure scoring rule: returns (stored answer, score).

    Overtime (> DEADLINE_MS, exactly 5000 ms is still in time) forces the
    stored answer to "overtime" and scores 0.5, whatever the payload said.
    """
    if elapsed_ms > DEADLINE_MS:
        return "overtime", 0.5
    if answer == "dont_know":
        return answer, 0.5
    if answer not in ("left", "right"):
        raise DomainError(f"invalid answer {answer!r}")
    picked_fake_slot = answer == fake_side
    if mode == "a-vs-b":
        # preference study: picking the candidate (fake slot) scores 1
        return answer, 1.0 if picked_fake_slot else 0.0
    # real-vs-fake: correctly identifying the fake scores 0
    return answer, 0.0 if picked_fake_slot else 1.0


class StudyService:
    """In-process study engine; the HTTP layer lives in study_server."""

    def __init__(
        self,
        manifest: StudyManifest,
        log_path,
        clock: Callable[[], int] | None = None,
        seed: int | None = None,
    ):
        self.manifest = manifest
        self.log_path = Path(log_path)
        self._clock = clock or (lambda: int(time.time() * 1000))
        self._seed = seed
        self._lock = threading.RLock()
        self.sessions: dict[str, StudySession] = {}
        self.records: list[TrialRecord] = []
        self._session_counter = 0
        if self.log_path.exists():
            self._replay()

    # -- persistence -----------------------------------------------------

    def _append(self, event: dict) -> None:
        with open(self.log_path, "a") as fh:
            fh.write(json.dumps(event) + "\n")
            fh.flush()

    def _replay(self) -> None:
        for line in self.log_path.read_text().splitlines():
            if not line.strip():
                continue
            event = json.loads(line)
            kind = event.get("kind", "answer")
            if kind == "session":
                self.sessions[event["session_id"]] = StudySession(
                    session_id=event["session_id"], participant=event["participant"]
                )
                self._session_counter += 1
            elif kind == "issued":
                session = self.sessions[event["session_id"]]
                session.served_pair_ids.append(event["pair_id"])
                entry = self.manifest.by_id[event["pair_id"]]
                session.served_real_images.add(str(entry.real_path))
                session.trial_seq += 1
                session.pending = {
                    "trial_id": event["trial_id"],
                    "pair_id": event["pair_id"],
                    "fake_side": event["fake_side"],
                    "issued_at": event["issued_at"],
                }
            elif kind == "answer":
                record = TrialRecord.from_dict(event)
                self.records.append(record)
                session = self.sessions.get(record.session_id)
                if session is not None:
                    session.completed_trials += 1
                    if session.pending and record.pair_id == session.pending["pair_id"]:
                        session.pending = None
            else:
                raise ConfigError(f"unknown log event kind {kind!r}")

    # -- session lifecycle -------------------------------------------------

    def create_session(self, participant: str = "") -> StudySession:
        if self.manifest is None:
            raise ServiceNotReady("no manifest loaded")
        with self._lock:
            session = StudySession(
                session_id=secrets.token_hex(16),
                participant=participant.strip() or "anonymous",
            )
            self.sessions[session.session_id] = session
            self._session_counter += 1
            if self._seed is not None:
                session_rng_seed = split_seed(self._seed, "session", self._session_counter)
                session._rng = generator_from(session_rng_seed)  # type: ignore[attr-defined]
            self._append(
                {
                    "kind": "session",
                    "session_id": session.session_id,
                    "participant": session.participant,
                    "ts": self._clock(),
                }
            )
            return session

    def _session(self, session_id: str) -> StudySession:
        session = self.sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"unknown session {session_id!r}")
        return session

    def _session_rng(self, session: StudySession):
        rng = getattr(session, "_rng", None)
        if rng is None:
            if self._seed is not None:
                # replayed session in seeded mode: derive from its position
                rng = generator_from(
                    split_seed(self._seed, "session-resumed", session.session_id)
                )
            else:
                rng = secrets.SystemRandom()
            session._rng = rng  # type: ignore[attr-defined]
        return rng

    def _pending_view(self, session: StudySession) -> dict:
        pending = session.pending
        return {
            "trial_id": pending["trial_id"],
            "pair_id": pending["pair_id"],
            "left": f"/images/{pending['pair_id']}/left?session={session.session_id}",
            "right": f"/images/{pending['pair_id']}/right?session={session.session_id}",
            "deadline_ms": DEADLINE_MS,
        }

    def next_trial(self, session_id: str) -> dict:
        """Issue the next trial: a uniformly random unserved pair, fake side
        uniform. The trial is committed to the log before it is returned; a
        second call while one is pending is rejected (the rejection carries
        the pending view so clients can resume)."""
        with self._lock:
            session = self._session(session_id)
            if session.pending is not None:
                raise PendingTrial(self._pending_view(session))
            candidates = [
                e
                for e in self.manifest.entries
                if e.pair_id not in session.served_pair_ids
                and str(e.real_path) not in session.served_real_images
            ]
            if not candidates:
                raise StudyComplete("all pairs served for this session")
            rng = self._session_rng(session)
            if isinstance(rng, secrets.SystemRandom):
                entry = candidates[rng.randrange(len(candidates))]
                fake_side = "left" if rng.random() < 0.5 else "right"
            else:
                entry = candidates[int(rng.integers(0, len(candidates)))]
                fake_side = "left" if rng.random() < 0.5 else "right"
            session.trial_seq += 1
            trial_id = f"{session.session_id}-{session.trial_seq}"
            issued_at = self._clock()
            session.pending = {
                "trial_id": trial_id,
                "pair_id": entry.pair_id,
                "fake_side": fake_side,
                "issued_at": issued_at,
            }
            session.served_pair_ids.append(entry.pair_id)
            session.served_real_images.add(str(entry.real_path))
            self._append(
                {
                    "kind": "issued",
                    "session_id": session.session_id,
                    "trial_id": trial_id,
                    "pair_id": entry.pair_id,
                    "fake_side": fake_side,
                    "issued_at": issued_at,
                }
            )
            return self._pending_view(session)

    def submit_answer(self, session_id: str, trial_id: str, answer: str) -> TrialRecord:
        """Score and persist the answer for the pending trial. Unknown trial
        ids and duplicate submissions are rejected without any state change."""
        if answer not in ANSWERS:
            raise DomainError(f"answer must be one of {ANSWERS}, got {answer!r}")
        with self._lock:
            session = self._session(session_id)
            pending = session.pending
            if pending is None or pending["trial_id"] != trial_id:
                raise UnknownTrial(f"trial {trial_id!r} is not awaiting an answer")
            answered_at = self._clock()
            elapsed = answered_at - pending["issued_at"]
            stored_answer, score = score_answer(
                answer, pending["fake_side"], elapsed, self.manifest.mode
            )
            record = TrialRecord(
                session_id=session.session_id,
                pair_id=pending["pair_id"],
                presentation=pending["fake_side"],
                issued_at=pending["issued_at"],
                answered_at=answered_at,
                answer=stored_answer,
                score=score,
            )
            self._append({"kind": "answer", **record.to_dict()})
            session.pending = None
            session.completed_trials += 1
            self.records.append(record)
            return record

    # -- results -----------------------------------------------------------

    def aggregate_results(self) -> dict:
        """Preference rate (mean score) per (method, bucket) cell, plus answer
        counts; recomputable exactly by replaying the log."""
        with self._lock:
            records = list(self.records)
        cells: dict[tuple[str, str], list[float]] = {}
        counts = {"answered": 0, "dont_know": 0, "overtime": 0}
        for r in records:
            entry = self.manifest.by_id[r.pair_id]
            cells.setdefault((entry.method, entry.bucket), []).append(r.score)
            if r.answer in ("left", "right"):
                counts["answered"] += 1
            else:
                counts[r.answer] += 1
        table = [
            {
                "method": method,
                "bucket": bucket,
                "preference_rate": sum(scores) / len(scores),
                "rounds": len(scores),
            }
            for (method, bucket), scores in sorted(cells.items())
        ]
        return {"mode": self.manifest.mode, "total_rounds": len(records), "counts": counts, "cells": table}

    def image_bytes(self, pair_id: str, side: str, session_id: str) -> bytes:
        """Serve the image shown on `side` for this session's trial of the
        pair. The URL never encodes which side is fake."""
        if side not in ("left", "right"):
            raise DomainError(f"side must be left or right, got {side!r}")
        with self._lock:
            session = self._session(session_id)
            fake_side = None
            if session.pending and session.pending["pair_id"] == pair_id:
                fake_side = session.pending["fake_side"]
            else:
                for r in self.records:
                    if r.session_id == session_id and r.pair_id == pair_id:
                        fake_side = r.presentation
                        break
            if fake_side is None:
                raise UnknownTrial(f"pair {pair_id!r} was not issued to this session")
            entry = self.manifest.by_id.get(pair_id)
            if entry is None:
                raise UnknownTrial(f"unknown pair {pair_id!r}")
            path = entry.fake_path if side == fake_side else entry.real_path
            return Path(path).read_bytes()
