"""Scenario library and the memory-only session store.

Sessions live exclusively in process memory: nothing here writes transcripts,
ids, or audio to disk, and idle sessions are evicted after a TTL. That is the
server-side analogue of a browser flushing its state on refresh.
"""

from __future__ import annotations

import secrets
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, replace
from importlib import resources
from typing import TYPE_CHECKING, Callable, Iterator

if TYPE_CHECKING:
    from .agents import FeedbackReport

DEFAULT_TTL_SECONDS = 30 * 60
CUSTOM_TITLE_MAX_CHARS = 40


class SessionNotFound(KeyError):
    pass


class UnknownScenario(KeyError):
    pass


class InvalidCustomDescription(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    id: str
    title: str
    description: str
    agent_role: str
    preset: bool = True
    opening_line: str | None = None

    def __post_init__(self):
        if not self.description:
            raise ValueError("scenario description must be non-empty")


@dataclass(frozen=True)
class Turn:
    role: str  # "user" | "agent"
    text: str
    at: float

    def __post_init__(self):
        if self.role not in ("user", "agent"):
            raise ValueError(f"invalid turn role {self.role!r}")
        if not self.text:
            raise ValueError("turn text must be non-empty")


@dataclass(frozen=True)
class SessionSettings:
    tts_enabled: bool = False
    stt_enabled: bool = True


@dataclass
class Session:
    id: str
    scenario: Scenario
    turns: list[Turn]
    settings: SessionSettings
    created_at: float
    last_active_at: float
    last_report: "FeedbackReport | None" = None


def _parse_scenario_records(text: str) -> list[Scenario]:
    scenarios: list[Scenario] = []
    for block in text.split("\n\n"):
        fields: dict[str, str] = {}
        for line in block.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition(":")
            fields[key.strip()] = value.strip()
        if not fields:
            continue
        scenarios.append(Scenario(
            id=fields["id"],
            title=fields["title"],
            description=fields["description"],
            agent_role=fields["agent_role"],
            preset=True,
            opening_line=fields.get("opening_line") or None,
        ))
    ids = [s.id for s in scenarios]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate scenario ids in library")
    return scenarios


def load_scenario_library() -> list[Scenario]:
    """Load the bundled preset scenarios, preserving file order."""
    text = (resources.files("skillweaver") / "assets" / "scenarios.txt").read_text(
        encoding="utf-8")
    return _parse_scenario_records(text)


def new_session_id() -> str:
    """128 bits of cryptographic randomness, URL-safe."""
    return secrets.token_urlsafe(16)


class SessionStore:
    """Volatile, thread-safe session registry.

    Global operations take the registry lock; per-session mutation is
    serialized by a per-session lock (see :meth:`session_scope`) so paired
    turn appends never interleave.
    """

    def __init__(self, scenarios: list[Scenario] | None = None,
                 ttl_seconds: float = DEFAULT_TTL_SECONDS,
                 clock: Callable[[], float] = time.time):
        self._scenarios = scenarios if scenarios is not None else load_scenario_library()
        self._ttl = ttl_seconds
        self._clock = clock
        self._sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.RLock] = {}
        self._registry_lock = threading.RLock()

    # -- scenarios ---------------------------------------------------------

    def list_scenarios(self) -> list[Scenario]:
        return list(self._scenarios)

    def find_scenario(self, scenario_id: str) -> Scenario:
        for scenario in self._scenarios:
            if scenario.id == scenario_id:
                return scenario
        raise UnknownScenario(scenario_id)

    # -- lifecycle ---------------------------------------------------------

    def create(self, scenario_id: str | None = None,
               custom_description: str | None = None,
               settings: SessionSettings | None = None) -> Session:
        if (scenario_id is None) == (custom_description is None):
            raise ValueError(
                "exactly one of scenario_id or custom_description is required")
        if scenario_id is not None:
            scenario = self.find_scenario(scenario_id)
        else:
            if not custom_description or not custom_description.strip():
                raise InvalidCustomDescription("custom description must be non-empty")
            description = custom_description.strip()
            scenario = Scenario(
                id="custom",
                title=description[:CUSTOM_TITLE_MAX_CHARS],
                description=description,
                agent_role="conversation partner",
                preset=False,
            )
        now = self._clock()
        session = Session(
            id=new_session_id(),
            scenario=scenario,
            turns=[],
            settings=settings or SessionSettings(),
            created_at=now,
            last_active_at=now,
        )
        with self._registry_lock:
            self._sessions[session.id] = session
            self._locks[session.id] = threading.RLock()
        return session

    def _live_session(self, session_id: str) -> Session:
        with self._registry_lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise SessionNotFound(session_id)
        return session

    def get(self, session_id: str) -> Session:
        """Consistent snapshot; mutating the result does not touch the store."""
        with self._session_lock(session_id):
            session = self._live_session(session_id)
            return replace(session, turns=list(session.turns))

    def _session_lock(self, session_id: str) -> threading.RLock:
        with self._registry_lock:
            lock = self._locks.get(session_id)
        if lock is None:
            raise SessionNotFound(session_id)
        return lock

    @contextmanager
    def session_scope(self, session_id: str) -> Iterator[Session]:
        """Exclusive access to one live session for a compound operation."""
        lock = self._session_lock(session_id)
        with lock:
            yield self._live_session(session_id)

    def append_turn(self, session_id: str, turn: Turn) -> None:
        self.append_turns(session_id, [turn])

    def append_turns(self, session_id: str, turns: list[Turn]) -> None:
        """Append all turns as one atomic step and refresh the idle clock."""
        with self._session_lock(session_id):
            session = self._live_session(session_id)
            session.turns.extend(turns)
            session.last_active_at = self._clock()

    def set_report(self, session_id: str, report: "FeedbackReport") -> None:
        with self._session_lock(session_id):
            session = self._live_session(session_id)
            session.last_report = report
            session.last_active_at = self._clock()

    def restart(self, session_id: str) -> Session:
        """Clear turns and cached report; scenario, settings, and id persist."""
        with self._session_lock(session_id):
            session = self._live_session(session_id)
            session.turns.clear()
            session.last_report = None
            session.last_active_at = self._clock()
            return replace(session, turns=[])

    def evict_expired(self, now: float | None = None,
                      ttl: float | None = None) -> int:
        now = self._clock() if now is None else now
        ttl = self._ttl if ttl is None else ttl
        with self._registry_lock:
            expired = [sid for sid, s in self._sessions.items()
                       if s.last_active_at + ttl < now]
            for sid in expired:
                del self._sessions[sid]
                del self._locks[sid]
        return len(expired)
