"""Clients for upstream model services: chat, embeddings, STT, TTS.

Two implementations share one surface: :class:`OpenAIProvider` speaks the
OpenAI-compatible wire format against a configurable base URL, and
:class:`StubProvider` is a pure, deterministic double so every downstream
test runs offline.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import httpx

from .knowledge import stub_embed_text

RETRY_BASE_DELAY = 0.25  # seconds; doubles per attempt, full jitter

ALLOWED_AUDIO_TYPES = frozenset({
    "audio/wav",
    "audio/x-wav",
    "audio/wave",
    "audio/mpeg",
    "audio/mp3",
    "audio/mp4",
    "audio/m4a",
    "audio/webm",
    "audio/ogg",
    "audio/flac",
})

TEXT_TO_SPEECH_MAX_CHARS = 4096

DEFAULT_ROLEPLAY_TEMPERATURE = 0.7
DEFAULT_FEEDBACK_TEMPERATURE = 0.2
DEFAULT_ROLEPLAY_MAX_TOKENS = 512
DEFAULT_FEEDBACK_MAX_TOKENS = 1024

FEEDBACK_MODE_MARKER = "[FEEDBACK_MODE]"


class ProviderError(Exception):
    """Base class for upstream-provider failures."""

    retryable = False


class AuthError(ProviderError):
    """Credentials rejected (HTTP 401/403); never retried."""


class ProviderUnavailable(ProviderError):
    """Transient failures persisted past the retry budget."""

    retryable = True


class MalformedResponse(ProviderError):
    """Provider answered but the payload is missing required fields."""


class UnsupportedMediaType(ProviderError):
    """Audio media type outside the allow-list."""


class TextTooLong(ProviderError):
    """Text exceeds the synthesis guard length."""


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"invalid role {self.role!r}")
        if self.role in ("user", "assistant") and not self.content:
            raise ValueError(f"{self.role} message content must be non-empty")


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[ChatMessage, ...]
    temperature: float = DEFAULT_ROLEPLAY_TEMPERATURE
    max_tokens: int = DEFAULT_ROLEPLAY_MAX_TOKENS

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))
        if not self.messages:
            raise ValueError("messages must be non-empty")
        for i, msg in enumerate(self.messages):
            if msg.role == "system" and i != 0:
                raise ValueError("system message allowed only at position 0")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class ProviderConfig:
    base_url: str = "https://api.openai.com/v1"
    api_key: str = field(default="", repr=False)
    chat_model: str = "gpt-4o-mini"
    embed_model: str = "text-embedding-3-small"
    stt_model: str = "whisper-1"
    tts_model: str = "tts-1"
    timeout: float = 30.0
    max_retries: int = 3

    def __post_init__(self):
        if not self.base_url.startswith(("http://", "https://")):
            raise ValueError("base_url must be an absolute http(s) URL")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")

    def to_dict(self) -> dict:
        """Serializable view; never includes the api_key."""
        return {
            "base_url": self.base_url,
            "chat_model": self.chat_model,
            "embed_model": self.embed_model,
            "stt_model": self.stt_model,
            "tts_model": self.tts_model,
            "timeout": self.timeout,
            "max_retries": self.max_retries,
        }


@dataclass(frozen=True)
class AudioPayload:
    data: bytes
    media_type: str

    def __post_init__(self):
        if not self.data:
            raise ValueError("audio payload must be non-empty")
        if self.media_type not in ALLOWED_AUDIO_TYPES:
            raise UnsupportedMediaType(f"unsupported media type {self.media_type!r}")


def _check_embed_inputs(texts: Sequence[str]) -> None:
    if not texts:
        raise ValueError("texts must be non-empty")
    for i, text in enumerate(texts):
        if not text:
            raise ValueError(f"texts[{i}] must be non-empty")


def _check_tts_input(text: str) -> None:
    if not text:
        raise ValueError("text must be non-empty")
    if len(text) > TEXT_TO_SPEECH_MAX_CHARS:
        raise TextTooLong(
            f"text length {len(text)} exceeds {TEXT_TO_SPEECH_MAX_CHARS} characters"
        )


STUB_FEEDBACK_TEXT = """\
## Overall Communication Style
You kept a friendly, cooperative tone and stayed on topic for the whole
conversation, responding each time you were spoken to.

## Key Strengths
- You opened with a clear greeting before making your request.
- You answered questions directly instead of changing the subject.

## Areas for Improvement
- Several replies were a single short phrase, which can read as disinterest.
- You rarely asked the other person anything back, so the exchange stayed one-sided.

## Actionable Recommendations
- Add one extra detail when you answer, for example "A burger, please, without onions."
- Ask one follow-up question per exchange, such as "What do you recommend?"
"""


def stub_chat(request: ChatRequest) -> str:
    """Deterministic chat double: a pure function of the request.

    A system prompt carrying the feedback-mode marker yields the canonical
    four-section feedback fixture; anything else echoes the last user message.
    """
    system = request.messages[0] if request.messages[0].role == "system" else None
    if system is not None and FEEDBACK_MODE_MARKER in system.content:
        return STUB_FEEDBACK_TEXT
    last_user = ""
    for msg in reversed(request.messages):
        if msg.role == "user":
            last_user = msg.content
            break
    return f"You said: {last_user}"


class StubProvider:
    """Offline provider: no I/O, no state, byte-identical repeated outputs."""

    chat_model = "stub-chat"
    embed_model = "stub-embed"

    def chat_complete(self, request: ChatRequest) -> str:
        return stub_chat(request)

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        _check_embed_inputs(texts)
        return [stub_embed_text(t) for t in texts]

    def transcribe(self, audio: AudioPayload) -> str:
        try:
            return audio.data.decode("utf-8")
        except UnicodeDecodeError:
            return ""

    def synthesize(self, text: str) -> AudioPayload:
        _check_tts_input(text)
        return AudioPayload(data=text.encode("utf-8"), media_type="audio/wav")

    def close(self) -> None:
        pass


class OpenAIProvider:
    """HTTP client for OpenAI-compatible endpoints with bounded retries.

    Transient failures (HTTP 429, 5xx, timeouts) are retried up to
    ``config.max_retries`` times with exponential backoff and full jitter.
    Instances are immutable after construction and safe to share across
    threads; httpx's connection pool handles concurrent requests.
    """

    def __init__(self, config: ProviderConfig, *,
                 transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep,
                 rng: random.Random | None = None):
        self._config = config
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._client = httpx.Client(
            base_url=config.base_url.rstrip("/"),
            headers={"Authorization": f"Bearer {config.api_key}"},
            timeout=config.timeout,
            transport=transport,
        )

    @property
    def chat_model(self) -> str:
        return self._config.chat_model

    @property
    def embed_model(self) -> str:
        return self._config.embed_model

    def close(self) -> None:
        self._client.close()

    def _send_with_retries(self, what: str, send: Callable[[], httpx.Response]
                           ) -> httpx.Response:
        attempts = self._config.max_retries + 1
        last_failure = ""
        for attempt in range(attempts):
            try:
                response = send()
            except httpx.TimeoutException:
                last_failure = f"{what}: request timed out"
            except httpx.TransportError as exc:
                last_failure = f"{what}: transport error ({type(exc).__name__})"
            else:
                status = response.status_code
                if status in (401, 403):
                    raise AuthError(f"{what}: authentication rejected (HTTP {status})")
                if status == 429 or status >= 500:
                    last_failure = f"{what}: HTTP {status}"
                elif status >= 400:
                    raise MalformedResponse(f"{what}: unexpected HTTP {status}")
                else:
                    return response
            if attempt < attempts - 1:
                self._sleep(self._rng.uniform(0.0, RETRY_BASE_DELAY * (2 ** attempt)))
        raise ProviderUnavailable(
            f"{what}: giving up after {attempts} attempts ({last_failure})"
        )

    def chat_complete(self, request: ChatRequest) -> str:
        payload = {
            "model": request.model,
            "messages": [{"role": m.role, "content": m.content}
                         for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        response = self._send_with_retries(
            "chat", lambda: self._client.post("/chat/completions", json=payload))
        try:
            content = response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(f"chat: missing choices/content ({exc})") from exc
        if not isinstance(content, str):
            raise MalformedResponse("chat: content is not a string")
        return content

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        _check_embed_inputs(texts)
        payload = {"model": self._config.embed_model, "input": list(texts)}
        response = self._send_with_retries(
            "embed", lambda: self._client.post("/embeddings", json=payload))
        try:
            data = sorted(response.json()["data"], key=lambda d: d["index"])
            vectors = [[float(x) for x in d["embedding"]] for d in data]
        except (ValueError, KeyError, TypeError) as exc:
            raise MalformedResponse(f"embed: malformed payload ({exc})") from exc
        if len(vectors) != len(texts):
            raise MalformedResponse(
                f"embed: expected {len(texts)} vectors, got {len(vectors)}")
        if len({len(v) for v in vectors}) > 1:
            raise MalformedResponse("embed: vectors have mixed dimensions")
        return vectors

    def transcribe(self, audio: AudioPayload) -> str:
        files = {"file": ("audio", audio.data, audio.media_type)}
        data = {"model": self._config.stt_model}
        response = self._send_with_retries(
            "transcribe",
            lambda: self._client.post("/audio/transcriptions", files=files, data=data))
        try:
            text = response.json()["text"]
        except (ValueError, KeyError, TypeError) as exc:
            raise MalformedResponse(f"transcribe: missing text ({exc})") from exc
        if not isinstance(text, str):
            raise MalformedResponse("transcribe: text is not a string")
        return text

    def synthesize(self, text: str) -> AudioPayload:
        _check_tts_input(text)
        payload = {"model": self._config.tts_model, "input": text, "voice": "alloy"}
        response = self._send_with_retries(
            "synthesize", lambda: self._client.post("/audio/speech", json=payload))
        media_type = response.headers.get("content-type", "audio/mpeg").split(";")[0]
        if media_type not in ALLOWED_AUDIO_TYPES:
            media_type = "audio/mpeg"
        return AudioPayload(data=response.content, media_type=media_type)
