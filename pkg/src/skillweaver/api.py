"""HTTP service tying providers, knowledge index, sessions, and agents together.

Every non-2xx response body is an ApiError envelope with a code from the
documented closed set. Request logs carry route, status, and latency only;
transcript content never reaches a log line.
"""

from __future__ import annotations

import logging
import re
import secrets
import threading
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass

from fastapi import Body, FastAPI, File, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from . import agents
from .knowledge import VectorIndex
from .providers import (
    AudioPayload,
    ProviderError,
    ProviderUnavailable,
    UnsupportedMediaType,
)
from .session import (
    InvalidCustomDescription,
    Scenario,
    SessionNotFound,
    SessionSettings,
    SessionStore,
    Turn,
    UnknownScenario,
)

logger = logging.getLogger("skillweaver.api")

MESSAGE_MAX_BYTES = 4096
AUDIO_MAX_BYTES = 10 * 1024 * 1024
EVICT_INTERVAL_SECONDS = 60.0

# Documented closed set of machine-readable error codes.
ERROR_CODES = frozenset({
    "invalid_body",
    "unknown_scenario",
    "session_not_found",
    "empty_text",
    "payload_too_large",
    "no_user_turns",
    "stt_disabled",
    "unsupported_media_type",
    "provider_unavailable",
    "feedback_parse_error",
    "report_not_found",
    "audio_not_found",
    "internal_error",
})

_ID_SEGMENT_RE = re.compile(r"(/api/(?:sessions|audio)/)[^/?]+")


@dataclass(frozen=True)
class ApiError:
    code: str
    message: str
    retryable: bool = False

    def __post_init__(self):
        if self.code not in ERROR_CODES:
            raise ValueError(f"undocumented error code {self.code!r}")


def _error(status: int, code: str, message: str,
           retryable: bool = False) -> JSONResponse:
    err = ApiError(code=code, message=message, retryable=retryable)
    return JSONResponse(
        status_code=status,
        content={"code": err.code, "message": err.message,
                 "retryable": err.retryable},
    )


def _scenario_json(scenario: Scenario) -> dict:
    return {
        "id": scenario.id,
        "title": scenario.title,
        "description": scenario.description,
        "agent_role": scenario.agent_role,
        "preset": scenario.preset,
    }


def _report_json(report: agents.FeedbackReport) -> dict:
    return {
        "overall_style": report.overall_style,
        "strengths": list(report.strengths),
        "improvements": list(report.improvements),
        "recommendations": list(report.recommendations),
        "grounding": [
            {"chunk_id": r.chunk_id, "score": r.score, "chunk_text": r.chunk_text}
            for r in report.grounding
        ],
        "generated_at": report.generated_at,
    }


class _OneShotAudioBox:
    """Memory-only stash for synthesized replies; each entry is served once."""

    def __init__(self):
        self._items: dict[str, AudioPayload] = {}
        self._lock = threading.Lock()

    def put(self, payload: AudioPayload) -> str:
        token = secrets.token_urlsafe(16)
        with self._lock:
            self._items[token] = payload
        return token

    def pop(self, token: str) -> AudioPayload | None:
        with self._lock:
            return self._items.pop(token, None)


def create_app(*, provider, store: SessionStore, index: VectorIndex,
               provider_mode: str = "stub", cors_origin: str | None = None,
               evict_interval: float = EVICT_INTERVAL_SECONDS) -> FastAPI:
    """Build the service with its dependencies injected."""

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        stop = threading.Event()

        def evict_loop():
            while not stop.wait(evict_interval):
                evicted = store.evict_expired()
                if evicted:
                    logger.info("evicted %d expired sessions", evicted)

        worker = threading.Thread(target=evict_loop, daemon=True,
                                  name="session-evictor")
        worker.start()
        try:
            yield
        finally:
            stop.set()
            worker.join(timeout=2.0)

    app = FastAPI(title="skillweaver", lifespan=lifespan)
    audio_box = _OneShotAudioBox()

    if cors_origin:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=[cors_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.middleware("http")
    async def access_log(request: Request, call_next):
        started = time.perf_counter()
        response = await call_next(request)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        route = _ID_SEGMENT_RE.sub(r"\1{id}", request.url.path)
        logger.info("%s %s %d %.1fms", request.method, route,
                    response.status_code, elapsed_ms)
        return response

    @app.exception_handler(RequestValidationError)
    async def on_invalid_request(request: Request, exc: RequestValidationError):
        return _error(400, "invalid_body", "request body is invalid")

    @app.exception_handler(SessionNotFound)
    async def on_session_not_found(request: Request, exc: SessionNotFound):
        return _error(404, "session_not_found", "session not found or expired")

    @app.exception_handler(ProviderError)
    async def on_provider_error(request: Request, exc: ProviderError):
        return _error(502, "provider_unavailable",
                      "upstream provider request failed",
                      retryable=isinstance(exc, ProviderUnavailable))

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "index_chunks": len(index),
                "provider_mode": provider_mode}

    @app.get("/api/scenarios")
    def list_scenarios():
        return [_scenario_json(s) for s in store.list_scenarios()]

    @app.post("/api/sessions", status_code=201)
    def create_session(body: dict = Body(...)):
        if not isinstance(body, dict):
            return _error(400, "invalid_body", "request body must be a JSON object")
        scenario_id = body.get("scenario_id")
        custom_description = body.get("custom_description")
        if (scenario_id is None) == (custom_description is None):
            return _error(400, "invalid_body",
                          "provide exactly one of scenario_id or custom_description")
        if scenario_id is not None and not isinstance(scenario_id, str):
            return _error(400, "invalid_body", "scenario_id must be a string")
        if custom_description is not None and not isinstance(custom_description, str):
            return _error(400, "invalid_body",
                          "custom_description must be a string")
        raw_settings = body.get("settings") or {}
        if not isinstance(raw_settings, dict):
            return _error(400, "invalid_body", "settings must be an object")
        settings = SessionSettings(
            tts_enabled=bool(raw_settings.get("tts_enabled", False)),
            stt_enabled=bool(raw_settings.get("stt_enabled", True)),
        )
        try:
            session = store.create(scenario_id=scenario_id,
                                   custom_description=custom_description,
                                   settings=settings)
        except UnknownScenario:
            return _error(400, "unknown_scenario",
                          f"unknown scenario id {scenario_id!r}")
        except (InvalidCustomDescription, ValueError):
            return _error(400, "invalid_body", "invalid session request")

        payload = {
            "session_id": session.id,
            "scenario": _scenario_json(session.scenario),
            "settings": {"tts_enabled": settings.tts_enabled,
                         "stt_enabled": settings.stt_enabled},
        }
        opening = session.scenario.opening_line
        if opening:
            store.append_turn(session.id,
                              Turn(role="agent", text=opening, at=time.time()))
            payload["opening_line"] = opening
        return payload

    def _converse(session_id: str, text: str) -> JSONResponse | dict:
        if not text:
            return _error(422, "empty_text", "message text must be non-empty")
        if len(text.encode("utf-8")) > MESSAGE_MAX_BYTES:
            return _error(413, "payload_too_large",
                          f"message exceeds {MESSAGE_MAX_BYTES} bytes")
        reply = agents.converse(store, session_id, text, provider)
        return {"reply": reply, "turn_count": len(store.get(session_id).turns)}

    @app.post("/api/sessions/{session_id}/messages")
    def post_message(session_id: str, body: dict = Body(...)):
        text = body.get("text") if isinstance(body, dict) else None
        result = _converse(session_id, text if isinstance(text, str) else "")
        return result

    @app.post("/api/sessions/{session_id}/feedback")
    def post_feedback(session_id: str):
        snapshot = store.get(session_id)
        try:
            report = agents.generate_feedback(snapshot, index, provider)
        except agents.NoUserTurns:
            return _error(409, "no_user_turns",
                          "the session has no user turns to analyse")
        except agents.FeedbackParseError:
            return _error(500, "feedback_parse_error",
                          "provider reply was not in the required format")
        store.set_report(session_id, report)
        return _report_json(report)

    @app.get("/api/sessions/{session_id}/feedback/export")
    def export_feedback(session_id: str):
        session = store.get(session_id)
        if session.last_report is None:
            return _error(404, "report_not_found",
                          "no feedback report has been generated for this session")
        html_doc = agents.render_feedback_html(session.last_report,
                                               session.scenario)
        return Response(
            content=html_doc,
            media_type="text/html",
            headers={"Content-Disposition":
                     'attachment; filename="conversation-feedback.html"'},
        )

    @app.post("/api/sessions/{session_id}/restart")
    def restart_session(session_id: str):
        session = store.restart(session_id)
        return {
            "session_id": session.id,
            "turn_count": 0,
            "scenario": _scenario_json(session.scenario),
        }

    @app.post("/api/sessions/{session_id}/audio")
    async def post_audio(session_id: str, audio: UploadFile = File(...)):
        session = store.get(session_id)
        if not session.settings.stt_enabled:
            return _error(409, "stt_disabled",
                          "speech input is disabled for this session")
        data = await audio.read()
        if len(data) > AUDIO_MAX_BYTES:
            return _error(413, "payload_too_large",
                          f"audio exceeds {AUDIO_MAX_BYTES} bytes")
        media_type = audio.content_type or "audio/wav"
        try:
            payload = AudioPayload(data=data, media_type=media_type)
        except UnsupportedMediaType:
            return _error(415, "unsupported_media_type",
                          f"unsupported audio media type {media_type!r}")
        except ValueError:
            return _error(400, "invalid_body", "audio payload is empty")

        transcript = provider.transcribe(payload)
        result = _converse(session_id, transcript.strip())
        if isinstance(result, JSONResponse):
            return result

        body = {"transcript": transcript, "reply": result["reply"],
                "turn_count": result["turn_count"]}
        if session.settings.tts_enabled:
            reply_audio = provider.synthesize(result["reply"])
            token = audio_box.put(reply_audio)
            body["reply_audio_url"] = f"/api/audio/{token}"
        return body

    @app.get("/api/audio/{token}")
    def fetch_audio(token: str):
        payload = audio_box.pop(token)
        if payload is None:
            return _error(404, "audio_not_found",
                          "audio not found (one-shot URLs are served once)")
        return Response(content=payload.data, media_type=payload.media_type)

    return app
