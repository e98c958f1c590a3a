import pytest
from hypothesis import given
from hypothesis import strategies as st

from skillweaver import agents
from skillweaver.agents import (
    BIAS_PREAMBLE,
    FEEDBACK_DIMENSIONS,
    FeedbackParseError,
    FeedbackReport,
    NoUserTurns,
    SECTION_IMPROVEMENTS,
    SECTION_OVERALL,
    SECTION_RECOMMENDATIONS,
    SECTION_STRENGTHS,
    SECTION_TITLES,
    build_feedback_query,
    build_roleplay_prompt,
    converse,
    generate_feedback,
    parse_feedback,
    render_feedback_html,
)
from skillweaver.knowledge import VectorIndex, stub_embed_text
from skillweaver.providers import (
    FEEDBACK_MODE_MARKER,
    ProviderUnavailable,
    STUB_FEEDBACK_TEXT,
    StubProvider,
)
from skillweaver.session import Scenario, SessionStore, Turn

from html_checker import StructuredHTML


class ScriptedChatProvider:
    """Replays canned replies (or raises scripted errors); records requests."""

    chat_model = "scripted"

    def __init__(self, replies):
        self.replies = list(replies)
        self.requests = []

    def chat_complete(self, request):
        self.requests.append(request)
        action = self.replies.pop(0)
        if isinstance(action, Exception):
            raise action
        return action


SCENARIO = Scenario(id="ordering-food", title="Ordering food",
                    description="You want to order a meal at a cafe.",
                    agent_role="waiter")


def turn(role, text, at=0.0):
    return Turn(role=role, text=text, at=at)


def alternating_history(n, start="user"):
    roles = ["user", "agent"] if start == "user" else ["agent", "user"]
    return [turn(roles[i % 2], f"{roles[i % 2]}-msg-{i}") for i in range(n)]


def realistic_history(n):
    """History as the store produces it: optional agent opener + (user, agent)
    pairs, so it always ends on an agent turn."""
    return alternating_history(n, start="agent" if n % 2 else "user")


# --- role-play prompt ---------------------------------------------------------

def test_prompt_with_empty_history():
    bundle = build_roleplay_prompt(SCENARIO, [], "Hi")
    assert [(m.role, m.content) for m in bundle.messages] == [("user", "Hi")]


def test_prompt_windows_most_recent_turns():
    history = alternating_history(30)
    bundle = build_roleplay_prompt(SCENARIO, history, "now", window=20)
    assert len(bundle.messages) == 21
    expected = [t.text for t in history[-20:]]
    assert [m.content for m in bundle.messages[:-1]] == expected
    assert bundle.messages[-1].content == "now"


@pytest.mark.parametrize("length", [0, 1, 5, 19, 20, 21, 40])
def test_prompt_window_bound_property(length):
    history = realistic_history(length)
    bundle = build_roleplay_prompt(SCENARIO, history, "ping", window=20)
    assert len(bundle.messages) == min(length, 20) + 1
    windowed = bundle.messages[:-1]
    assert [m.content for m in windowed] == [t.text for t in history[-20:]]


def test_prompt_contains_scenario_description_verbatim():
    bundle = build_roleplay_prompt(SCENARIO, [], "Hi")
    assert SCENARIO.description in bundle.system
    assert SCENARIO.agent_role in bundle.system


def test_prompt_embeds_bias_preamble():
    roleplay = build_roleplay_prompt(SCENARIO, [], "Hi")
    assert BIAS_PREAMBLE in roleplay.system
    feedback = agents.build_feedback_prompt([turn("user", "Hi")], [])
    assert BIAS_PREAMBLE in feedback.system


def test_prompt_rejects_empty_input():
    with pytest.raises(ValueError):
        build_roleplay_prompt(SCENARIO, [], "")


# --- converse --------------------------------------------------------------------

@pytest.fixture
def store():
    return SessionStore()


def test_converse_appends_pair(store):
    session = store.create(scenario_id="ordering-food")
    reply = converse(store, session.id, "Hello", StubProvider())
    assert reply == "You said: Hello"
    turns = store.get(session.id).turns
    assert [(t.role, t.text) for t in turns] == [
        ("user", "Hello"), ("agent", "You said: Hello")]


def test_converse_failure_leaves_session_unchanged(store):
    session = store.create(scenario_id="ordering-food")
    converse(store, session.id, "one", StubProvider())
    before = [(t.role, t.text) for t in store.get(session.id).turns]
    with pytest.raises(ProviderUnavailable):
        converse(store, session.id, "two",
                 ScriptedChatProvider([ProviderUnavailable("down")]))
    after = [(t.role, t.text) for t in store.get(session.id).turns]
    assert after == before


def test_three_exchanges_alternate(store):
    session = store.create(scenario_id="ordering-food")
    for text in ("a", "b", "c"):
        converse(store, session.id, text, StubProvider())
    turns = store.get(session.id).turns
    assert len(turns) == 6
    assert [t.role for t in turns] == ["user", "agent"] * 3


def test_generation_parameter_defaults(store):
    session = store.create(scenario_id="ordering-food")
    roleplay_provider = ScriptedChatProvider(["Sure thing!"])
    converse(store, session.id, "hello", roleplay_provider)
    request = roleplay_provider.requests[0]
    assert request.temperature == 0.7
    assert request.max_tokens == 512

    feedback_provider = ScriptedChatProvider([STUB_FEEDBACK_TEXT])
    generate_feedback(store.get(session.id), VectorIndex(), feedback_provider)
    request = feedback_provider.requests[0]
    assert request.temperature == 0.2
    assert request.max_tokens == 1024


# --- feedback query -----------------------------------------------------------

def test_feedback_query_single_turn():
    history = [turn("agent", "Welcome!"), turn("user", "Can I have a burger?")]
    assert build_feedback_query(history) == "Can I have a burger?"


def test_feedback_query_requires_user_turns():
    with pytest.raises(NoUserTurns):
        build_feedback_query([turn("agent", "Hello?")])
    with pytest.raises(NoUserTurns):
        build_feedback_query([])


def test_feedback_query_uses_only_user_turns():
    history = [turn("user", "first"), turn("agent", "IGNORED-REPLY"),
               turn("user", "second")]
    assert build_feedback_query(history) == "first\nsecond"


def test_feedback_query_truncation_hand_computed():
    # Turn sizes 3001 + 999 + 1000 = 5000 chars of user text. Keeping whole
    # turns newest-first: 1000, then 1000 + (999+1) = 2000 exactly, and the
    # 3001-char turn no longer fits, so the query is the last two turns.
    history = [turn("user", "a" * 3001), turn("agent", "r1"),
               turn("user", "b" * 999), turn("agent", "r2"),
               turn("user", "c" * 1000)]
    query = build_feedback_query(history)
    assert query == "b" * 999 + "\n" + "c" * 1000
    assert len(query) == 2000


def test_feedback_query_single_oversized_turn_tail():
    history = [turn("user", "x" * 2600 + "y" * 2400)]
    query = build_feedback_query(history)
    assert query == "y" * 2000


# --- feedback parsing -----------------------------------------------------------

def test_parse_canonical_fixture():
    report = parse_feedback(STUB_FEEDBACK_TEXT)
    assert report.overall_style.startswith("You kept a friendly")
    assert len(report.strengths) == 2
    assert len(report.improvements) == 2
    assert len(report.recommendations) == 2


def test_parse_missing_section_named():
    broken = STUB_FEEDBACK_TEXT.replace("## Key Strengths", "## Observations")
    with pytest.raises(FeedbackParseError) as excinfo:
        parse_feedback(broken)
    assert "Key Strengths" in str(excinfo.value)
    assert excinfo.value.missing == [SECTION_STRENGTHS]


def test_parse_empty_section_is_missing():
    raw = (f"## {SECTION_OVERALL}\nFine style.\n"
           f"## {SECTION_STRENGTHS}\n\n"
           f"## {SECTION_IMPROVEMENTS}\n- thing\n"
           f"## {SECTION_RECOMMENDATIONS}\n- other\n")
    with pytest.raises(FeedbackParseError) as excinfo:
        parse_feedback(raw)
    assert excinfo.value.missing == [SECTION_STRENGTHS]


def test_parse_numbered_bullets_and_continuations():
    raw = (f"## {SECTION_OVERALL}\nCalm and\nclear.\n"
           f"## {SECTION_STRENGTHS}\n1. first point\n   carried over\n2) second\n"
           f"## {SECTION_IMPROVEMENTS}\n- one thing\n"
           f"## {SECTION_RECOMMENDATIONS}\n- try this\n")
    report = parse_feedback(raw)
    assert report.overall_style == "Calm and clear."
    assert report.strengths == ("first point carried over", "second")


def canonical_sections():
    return {
        SECTION_OVERALL: "A steady, polite style overall.",
        SECTION_STRENGTHS: "- greeted first\n- asked clearly",
        SECTION_IMPROVEMENTS: "- short answers\n- few questions",
        SECTION_RECOMMENDATIONS: "- add detail\n- ask back",
    }


@given(order=st.permutations(list(SECTION_TITLES)),
       case=st.sampled_from(["lower", "upper", "title", "as-is"]))
def test_parse_header_order_and_case_independent(order, case):
    transform = {"lower": str.lower, "upper": str.upper,
                 "title": str.title, "as-is": lambda s: s}[case]
    sections = canonical_sections()
    raw = "\n".join(f"## {transform(title)}\n{sections[title]}\n"
                    for title in order)
    report = parse_feedback(raw)
    baseline = parse_feedback("\n".join(
        f"## {title}\n{sections[title]}\n" for title in SECTION_TITLES))
    assert report == baseline


@given(st.text(max_size=500))
def test_parse_feedback_total_on_arbitrary_text(raw):
    try:
        report = parse_feedback(raw)
    except FeedbackParseError:
        return
    assert report.overall_style
    assert report.strengths and report.improvements and report.recommendations


# --- feedback generation ----------------------------------------------------------

def make_index(texts):
    index = VectorIndex()
    for i, text in enumerate(texts):
        index.add(f"g:{i}", "g", (0, len(text)), text, stub_embed_text(text))
    return index


def session_with_turns(store, turns):
    session = store.create(scenario_id="ordering-food")
    if turns:
        store.append_turns(session.id, turns)
    return store.get(session.id)


def test_generate_feedback_with_stub(store):
    snapshot = session_with_turns(store, [
        turn("user", "Could I order a burger please"),
        turn("agent", "Of course!"),
    ])
    index = make_index(["ordering food politely includes please",
                        "thank the waiter after ordering"])
    report = generate_feedback(snapshot, index, StubProvider(), k=2)
    assert report.overall_style
    assert report.strengths and report.improvements and report.recommendations
    assert len(report.grounding) == 2
    assert report.generated_at > 0


def test_generate_feedback_empty_index_gives_empty_grounding(store):
    snapshot = session_with_turns(store, [turn("user", "hello there")])
    report = generate_feedback(snapshot, VectorIndex(), StubProvider())
    assert report.grounding == ()


def test_generate_feedback_requires_user_turns(store):
    snapshot = session_with_turns(store, [turn("agent", "Welcome!")])
    with pytest.raises(NoUserTurns):
        generate_feedback(snapshot, VectorIndex(), StubProvider())


def test_generate_feedback_reasks_once_on_parse_failure(store):
    snapshot = session_with_turns(store, [turn("user", "hi")])
    provider = ScriptedChatProvider(["not structured at all",
                                     STUB_FEEDBACK_TEXT])
    report = generate_feedback(snapshot, VectorIndex(), provider)
    assert report.overall_style
    assert len(provider.requests) == 2
    retry_messages = provider.requests[1].messages
    assert retry_messages[-1].role == "user"
    assert "not in the required format" in retry_messages[-1].content
    assert retry_messages[-2].content == "not structured at all"


def test_generate_feedback_fails_after_second_bad_reply(store):
    snapshot = session_with_turns(store, [turn("user", "hi")])
    provider = ScriptedChatProvider(["garbage one", "garbage two"])
    with pytest.raises(FeedbackParseError):
        generate_feedback(snapshot, VectorIndex(), provider)
    assert len(provider.requests) == 2


def test_feedback_prompt_structure(store):
    snapshot = session_with_turns(store, [
        turn("user", "one burger please"), turn("agent", "Coming up!")])
    index = make_index(["guidance about ordering a burger politely",
                        "guidance about saying please and thanks"])
    provider = ScriptedChatProvider([STUB_FEEDBACK_TEXT])
    report = generate_feedback(snapshot, index, provider, k=2)

    system = provider.requests[0].messages[0]
    assert system.role == "system"
    assert FEEDBACK_MODE_MARKER in system.content
    assert BIAS_PREAMBLE in system.content
    # grounding faithfulness: every cited chunk appears verbatim in the prompt
    assert report.grounding
    for result in report.grounding:
        assert result.chunk_text in system.content
    # full transcript present
    assert "User: one burger please" in system.content
    assert "Agent: Coming up!" in system.content
    # analysis axes spelled out
    for axis in FEEDBACK_DIMENSIONS:
        assert axis in system.content
    assert "turn-taking" in system.content
    # exact section headers requested
    for title in SECTION_TITLES:
        assert f"## {title}" in system.content


# --- HTML rendering ----------------------------------------------------------------


def sample_report(**overrides):
    fields = dict(
        overall_style="Polite and steady throughout.",
        strengths=("clear greeting", "direct answers"),
        improvements=("short replies", "few questions back"),
        recommendations=("add one detail", "ask a follow-up"),
        grounding=(),
        generated_at=1_700_000_000.0,
    )
    fields.update(overrides)
    return FeedbackReport(**fields)


def test_html_contains_exactly_four_section_headings():
    doc = render_feedback_html(sample_report(), SCENARIO)
    parsed = StructuredHTML.check(doc)
    h2 = [text for tag, text in parsed.headings if tag == "h2"]
    assert h2 == list(SECTION_TITLES)
    assert SCENARIO.title in [t for tag, t in parsed.headings if tag == "h1"][0]


def test_html_escapes_user_content():
    report = sample_report(strengths=("used <script>alert(1)</script> safely",))
    doc = render_feedback_html(report, SCENARIO)
    assert "<script>" not in doc
    assert "&lt;script&gt;" in doc
    StructuredHTML.check(doc)


def test_html_extraction_oracle_recovers_report():
    report = sample_report()
    parsed = StructuredHTML.check(render_feedback_html(report, SCENARIO))
    assert parsed.sections[SECTION_OVERALL] == [report.overall_style]
    assert tuple(parsed.sections[SECTION_STRENGTHS]) == report.strengths
    assert tuple(parsed.sections[SECTION_IMPROVEMENTS]) == report.improvements
    assert tuple(parsed.sections[SECTION_RECOMMENDATIONS]) == report.recommendations


def test_html_lists_grounding_sources():
    from skillweaver.knowledge import RetrievalResult
    report = sample_report(grounding=(
        RetrievalResult("doc:0", 0.91234, "be polite & clear"),))
    doc = render_feedback_html(report, SCENARIO)
    assert "doc:0" in doc
    assert "0.912" in doc
    assert "be polite &amp; clear" in doc


def test_html_render_is_deterministic():
    report = sample_report()
    assert (render_feedback_html(report, SCENARIO)
            == render_feedback_html(report, SCENARIO))
