"""The two conversation-therapy agents and their prompt/report machinery.

The role-play agent keeps a scenario persona over a windowed history; the
feedback agent retrieves grounding from the knowledge index, asks the chat
provider for a four-section analysis, and parses it into a structured report.
Both agents are stateless pipelines; all conversation state lives in the
session store.
"""

from __future__ import annotations

import html
import re
import time
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from importlib import resources
from typing import Callable, Protocol, Sequence

from .knowledge import DEFAULT_TOP_K, RetrievalResult, VectorIndex, search_top_k
from .providers import (
    ChatMessage,
    ChatRequest,
    DEFAULT_FEEDBACK_MAX_TOKENS,
    DEFAULT_FEEDBACK_TEMPERATURE,
    DEFAULT_ROLEPLAY_MAX_TOKENS,
    DEFAULT_ROLEPLAY_TEMPERATURE,
    FEEDBACK_MODE_MARKER,
)
from .session import Scenario, Session, SessionStore, Turn

DEFAULT_HISTORY_WINDOW = 20
FEEDBACK_QUERY_MAX_CHARS = 2000

# Fixed analysis axes; the feedback prompt covers these plus turn-taking.
FEEDBACK_DIMENSIONS = ("tone", "engagement", "alternative phrasing")

SECTION_OVERALL = "Overall Communication Style"
SECTION_STRENGTHS = "Key Strengths"
SECTION_IMPROVEMENTS = "Areas for Improvement"
SECTION_RECOMMENDATIONS = "Actionable Recommendations"
SECTION_TITLES = (SECTION_OVERALL, SECTION_STRENGTHS,
                  SECTION_IMPROVEMENTS, SECTION_RECOMMENDATIONS)

REFORMAT_NUDGE = (
    "Your previous reply was not in the required format. Reply again with "
    "exactly the four required `##` sections and nothing else."
)


class NoUserTurns(ValueError):
    """The history holds no user turns, so there is nothing to analyse."""


class FeedbackParseError(ValueError):
    """Model output missing one or more required feedback sections."""

    def __init__(self, missing: Sequence[str]):
        self.missing = list(missing)
        super().__init__(f"missing or empty sections: {', '.join(self.missing)}")


class ChatProvider(Protocol):
    chat_model: str

    def chat_complete(self, request: ChatRequest) -> str: ...


def _load_asset(name: str) -> str:
    return (resources.files("skillweaver") / "assets" / name).read_text("utf-8")


def _fill(template: str, values: dict[str, str]) -> str:
    for key, value in values.items():
        template = template.replace("{" + key + "}", value)
    return template


BIAS_PREAMBLE = _load_asset("bias_preamble.txt").strip()
ROLEPLAY_TEMPLATE = _load_asset("roleplay_system.txt").strip()
FEEDBACK_TEMPLATE = _load_asset("feedback_system.txt").strip()


@dataclass(frozen=True)
class PromptBundle:
    system: str
    messages: tuple[ChatMessage, ...]

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))
        if not self.system:
            raise ValueError("system text must be non-empty")
        if not self.messages or self.messages[-1].role != "user":
            raise ValueError("last message must have role=user")
        for prev, cur in zip(self.messages, self.messages[1:]):
            if prev.role == cur.role:
                raise ValueError("messages must alternate user/assistant roles")

    def to_request(self, model: str, *, temperature: float,
                   max_tokens: int) -> ChatRequest:
        return ChatRequest(
            model=model,
            messages=(ChatMessage("system", self.system), *self.messages),
            temperature=temperature,
            max_tokens=max_tokens,
        )


@dataclass(frozen=True)
class FeedbackReport:
    overall_style: str
    strengths: tuple[str, ...]
    improvements: tuple[str, ...]
    recommendations: tuple[str, ...]
    grounding: tuple[RetrievalResult, ...] = ()
    generated_at: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "strengths", tuple(self.strengths))
        object.__setattr__(self, "improvements", tuple(self.improvements))
        object.__setattr__(self, "recommendations", tuple(self.recommendations))
        object.__setattr__(self, "grounding", tuple(self.grounding))
        if not self.overall_style:
            raise ValueError("overall_style must be non-empty")
        for name, items in (("strengths", self.strengths),
                            ("improvements", self.improvements),
                            ("recommendations", self.recommendations)):
            if not items or any(not item for item in items):
                raise ValueError(f"{name} must contain at least one non-empty item")


def _turn_to_message(turn: Turn) -> ChatMessage:
    role = "user" if turn.role == "user" else "assistant"
    return ChatMessage(role, turn.text)


def build_roleplay_prompt(scenario: Scenario, history: Sequence[Turn],
                          user_input: str,
                          window: int = DEFAULT_HISTORY_WINDOW) -> PromptBundle:
    """Assemble the role-play prompt from the most recent ``window`` turns."""
    if not user_input:
        raise ValueError("user_input must be non-empty")
    system = BIAS_PREAMBLE + "\n\n" + _fill(ROLEPLAY_TEMPLATE, {
        "agent_role": scenario.agent_role,
        "scenario_description": scenario.description,
    })
    windowed = list(history)[-window:] if window > 0 else []
    messages = [_turn_to_message(t) for t in windowed]
    messages.append(ChatMessage("user", user_input))
    return PromptBundle(system=system, messages=tuple(messages))


def converse(store: SessionStore, session_id: str, user_input: str,
             provider: ChatProvider, *, window: int = DEFAULT_HISTORY_WINDOW,
             clock: Callable[[], float] = time.time) -> str:
    """One role-play exchange: prompt, call the provider, append both turns.

    The session is locked for the whole exchange, and the user/agent turn
    pair is appended only after the provider call succeeds; a failed call
    leaves the session exactly as it was.
    """
    with store.session_scope(session_id) as session:
        bundle = build_roleplay_prompt(session.scenario, session.turns,
                                       user_input, window=window)
        request = bundle.to_request(
            provider.chat_model,
            temperature=DEFAULT_ROLEPLAY_TEMPERATURE,
            max_tokens=DEFAULT_ROLEPLAY_MAX_TOKENS,
        )
        reply = provider.chat_complete(request)
        now = clock()
        store.append_turns(session_id, [
            Turn(role="user", text=user_input, at=now),
            Turn(role="agent", text=reply, at=now),
        ])
        return reply


def build_feedback_query(history: Sequence[Turn]) -> str:
    """Join the user's turns (newest last) for retrieval, capped at 2000 chars.

    Whole turns are dropped oldest-first to stay within the cap, so the query
    always ends on a turn boundary; a single oversized turn falls back to its
    trailing 2000 characters.
    """
    user_texts = [t.text for t in history if t.role == "user"]
    if not user_texts:
        raise NoUserTurns("history contains no user turns")

    kept: list[str] = []
    total = 0
    for text in reversed(user_texts):
        cost = len(text) if not kept else len(text) + 1  # +1 joining newline
        if total + cost > FEEDBACK_QUERY_MAX_CHARS:
            break
        kept.append(text)
        total += cost
    if not kept:
        return user_texts[-1][-FEEDBACK_QUERY_MAX_CHARS:]
    return "\n".join(reversed(kept))


def _format_transcript(history: Sequence[Turn]) -> str:
    labels = {"user": "User", "agent": "Agent"}
    return "\n".join(f"{labels[t.role]}: {t.text}" for t in history)


def _format_guidance(results: Sequence[RetrievalResult]) -> str:
    if not results:
        return "(no guidance retrieved; rely on general good practice)"
    return "\n\n".join(f"[{i}] {r.chunk_text}" for i, r in enumerate(results, 1))


def build_feedback_prompt(history: Sequence[Turn],
                          results: Sequence[RetrievalResult]) -> PromptBundle:
    system = "\n\n".join([
        FEEDBACK_MODE_MARKER,
        BIAS_PREAMBLE,
        _fill(FEEDBACK_TEMPLATE, {
            "guidance": _format_guidance(results),
            "transcript": _format_transcript(history),
        }),
    ])
    messages = (ChatMessage("user", "Please write the structured feedback now."),)
    return PromptBundle(system=system, messages=messages)


def generate_feedback(session: Session, index: VectorIndex | None,
                      provider: ChatProvider, k: int = DEFAULT_TOP_K, *,
                      clock: Callable[[], float] = time.time) -> FeedbackReport:
    """Retrieve grounding, ask for the analysis, parse it into a report.

    A reply that fails to parse triggers exactly one re-ask carrying the
    reformat nudge; a second failure propagates FeedbackParseError.
    """
    query = build_feedback_query(session.turns)
    results = search_top_k(index, query, k) if index is not None else []
    bundle = build_feedback_prompt(session.turns, results)
    request = bundle.to_request(
        provider.chat_model,
        temperature=DEFAULT_FEEDBACK_TEMPERATURE,
        max_tokens=DEFAULT_FEEDBACK_MAX_TOKENS,
    )
    raw = provider.chat_complete(request)
    try:
        report = parse_feedback(raw)
    except FeedbackParseError:
        retry_request = ChatRequest(
            model=request.model,
            messages=(*request.messages,
                      ChatMessage("assistant", raw or "(empty reply)"),
                      ChatMessage("user", REFORMAT_NUDGE)),
            temperature=request.temperature,
            max_tokens=request.max_tokens,
        )
        report = parse_feedback(provider.chat_complete(retry_request))
    return replace(report, grounding=tuple(results), generated_at=clock())


_HEADER_RE = re.compile(
    r"^[ \t]*##[ \t]*("
    + "|".join(re.escape(title) for title in SECTION_TITLES)
    + r")[ \t]*:?[ \t]*$",
    re.IGNORECASE | re.MULTILINE,
)
_BULLET_RE = re.compile(r"[ \t]*(?:[-*]|\d+[.)])[ \t]+(.*)")

_CANONICAL_TITLES = {title.lower(): title for title in SECTION_TITLES}


def _split_items(section: str) -> list[str]:
    items: list[str] = []
    current: str | None = None
    for line in section.splitlines():
        bullet = _BULLET_RE.fullmatch(line)
        if bullet:
            if current:
                items.append(current)
            current = bullet.group(1).strip()
        elif line.strip():
            current = f"{current} {line.strip()}" if current else line.strip()
    if current:
        items.append(current)
    return [item for item in items if item]


def parse_feedback(raw: str) -> FeedbackReport:
    """Parse the four `##` sections (any order, any case) into a report.

    Total over arbitrary input: returns a report or raises
    :class:`FeedbackParseError` naming every missing or empty section.
    """
    if not isinstance(raw, str):
        raise FeedbackParseError(list(SECTION_TITLES))

    sections: dict[str, str] = {}
    matches = list(_HEADER_RE.finditer(raw))
    for i, match in enumerate(matches):
        start = match.end()
        end = matches[i + 1].start() if i + 1 < len(matches) else len(raw)
        title = _CANONICAL_TITLES[match.group(1).lower()]
        sections[title] = raw[start:end].strip()

    overall = " ".join(sections.get(SECTION_OVERALL, "").split())
    strengths = _split_items(sections.get(SECTION_STRENGTHS, ""))
    improvements = _split_items(sections.get(SECTION_IMPROVEMENTS, ""))
    recommendations = _split_items(sections.get(SECTION_RECOMMENDATIONS, ""))

    missing = [title for title, ok in (
        (SECTION_OVERALL, bool(overall)),
        (SECTION_STRENGTHS, bool(strengths)),
        (SECTION_IMPROVEMENTS, bool(improvements)),
        (SECTION_RECOMMENDATIONS, bool(recommendations)),
    ) if not ok]
    if missing:
        raise FeedbackParseError(missing)

    return FeedbackReport(
        overall_style=overall,
        strengths=tuple(strengths),
        improvements=tuple(improvements),
        recommendations=tuple(recommendations),
    )


_HTML_STYLE = """\
body { font-family: system-ui, sans-serif; max-width: 44rem; margin: 2rem auto;
       padding: 0 1rem; color: #1a1a2e; }
h1 { font-size: 1.4rem; } h2 { font-size: 1.1rem; margin-top: 1.5rem; }
.meta { color: #555; font-size: 0.9rem; }
footer { margin-top: 2rem; border-top: 1px solid #ccc; font-size: 0.85rem; }
"""


def render_feedback_html(report: FeedbackReport, scenario: Scenario) -> str:
    """Render a standalone HTML5 document; all dynamic text is escaped."""
    def esc(text: str) -> str:
        return html.escape(text, quote=True)

    def items(values: Sequence[str]) -> str:
        lines = "\n".join(f"      <li>{esc(v)}</li>" for v in values)
        return f"    <ul>\n{lines}\n    </ul>"

    generated = datetime.fromtimestamp(report.generated_at, tz=timezone.utc)
    sources = "\n".join(
        f"      <li><code>{esc(r.chunk_id)}</code> (score {r.score:.3f}): "
        f"{esc(r.chunk_text)}</li>"
        for r in report.grounding
    ) or "      <li>No guidance sources were retrieved.</li>"

    return f"""<!DOCTYPE html>
<html lang="en">
<head>
  <meta charset="utf-8">
  <title>Conversation feedback: {esc(scenario.title)}</title>
  <style>
{_HTML_STYLE}  </style>
</head>
<body>
  <h1>Conversation feedback: {esc(scenario.title)}</h1>
  <p class="meta">Scenario: {esc(scenario.description)}</p>
  <p class="meta">Generated at {generated.strftime('%Y-%m-%d %H:%M:%S UTC')}</p>
  <section>
    <h2>{SECTION_OVERALL}</h2>
    <p>{esc(report.overall_style)}</p>
  </section>
  <section>
    <h2>{SECTION_STRENGTHS}</h2>
{items(report.strengths)}
  </section>
  <section>
    <h2>{SECTION_IMPROVEMENTS}</h2>
{items(report.improvements)}
  </section>
  <section>
    <h2>{SECTION_RECOMMENDATIONS}</h2>
{items(report.recommendations)}
  </section>
  <footer>
    <h3>Guidance sources</h3>
    <ol>
{sources}
    </ol>
  </footer>
</body>
</html>
"""
