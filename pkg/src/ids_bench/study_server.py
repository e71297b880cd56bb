"""HTTP+JSON layer over :class:`StudyService`.

Routes:
    POST /sessions {participant}            -> {session_id}
    GET  /sessions/{id}/next                -> trial view | {"complete": true}
    POST /sessions/{id}/answers             -> recorded trial
    GET  /results                           -> aggregate table
    GET  /images/{pair_id}/{side}?session=  -> PNG bytes for that trial slot
    GET  /                                  -> built frontend, when provided
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from .errors import DomainError
from .study_service import (
    PendingTrial,
    ServiceNotReady,
    StudyComplete,
    StudyService,
    UnknownSession,
    UnknownTrial,
)

__all__ = ["create_app"]


def create_app(service: StudyService, static_dir=None) -> FastAPI:
    app = FastAPI(title="ids-bench study service", docs_url=None, redoc_url=None)

    @app.exception_handler(UnknownSession)
    async def _unknown_session(_, exc):
        return JSONResponse({"error": str(exc)}, status_code=404)

    @app.exception_handler(UnknownTrial)
    async def _unknown_trial(_, exc):
        return JSONResponse({"error": str(exc)}, status_code=409)

    @app.exception_handler(PendingTrial)
    async def _pending(_, exc: PendingTrial):
        return JSONResponse({"error": "trial-pending", "pending": exc.view}, status_code=409)

    @app.exception_handler(ServiceNotReady)
    async def _not_ready(_, exc):
        return JSONResponse({"error": str(exc)}, status_code=503)

    @app.exception_handler(DomainError)
    async def _domain(_, exc):
        return JSONResponse({"error": str(exc)}, status_code=400)

    @app.post("/sessions")
    async def create_session(request: Request):
        body = {}
        if int(request.headers.get("content-length") or 0):
            body = await request.json()
        session = service.create_session(str(body.get("participant", "")))
        return {"session_id": session.session_id}

    @app.get("/sessions/{session_id}/next")
    def next_trial(session_id: str):
        try:
            view = service.next_trial(session_id)
        except StudyComplete:
            return {"complete": True}
        return {
            "trial_id": view["trial_id"],
            "left_url": view["left"],
            "right_url": view["right"],
            "deadline_ms": view["deadline_ms"],
        }

    @app.post("/sessions/{session_id}/answers")
    async def submit_answer(session_id: str, request: Request):
        body = await request.json()
        record = service.submit_answer(
            session_id, str(body.get("trial_id", "")), str(body.get("answer", ""))
        )
        return {
            "trial_id": str(body.get("trial_id")),
            "answer": record.answer,
            "score": record.score,
        }

    @app.get("/results")
    def results():
        return service.aggregate_results()

    @app.get("/images/{pair_id}/{side}")
    def image(pair_id: str, side: str, session: str = Query(...)):
        data = service.image_bytes(pair_id, side, session)
        return Response(content=data, media_type="image/png")

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="frontend")

    return app
