import { describe, expect, it } from "vitest";

import type { FeedbackReport, Scenario } from "../src/api.js";
import { InvalidTransition, UiState } from "../src/state.js";

const SCENARIO: Scenario = {
  id: "ordering-food",
  title: "Ordering food",
  description: "Order a meal at a cafe.",
  agent_role: "waiter",
  preset: true,
};

const REPORT: FeedbackReport = {
  overall_style: "Friendly and clear.",
  strengths: ["greeted first"],
  improvements: ["short replies"],
  recommendations: ["add a detail"],
  grounding: [],
  generated_at: 1,
};

function chattingState(): UiState {
  const state = new UiState();
  state.startSession("sid-1", SCENARIO, { tts: false, stt: true });
  return state;
}

describe("phase transitions", () => {
  it("starts in picking with empty state", () => {
    const state = new UiState();
    expect(state.phase).toBe("picking");
    expect(state.transcript).toEqual([]);
    expect(state.lastReport).toBeNull();
  });

  it("picking -> chatting -> feedback -> chatting", () => {
    const state = chattingState();
    expect(state.phase).toBe("chatting");
    state.showFeedback(REPORT);
    expect(state.phase).toBe("feedback");
    state.returnToChat();
    expect(state.phase).toBe("chatting");
  });

  it("rejects skipping ahead", () => {
    const state = new UiState();
    expect(() => state.showFeedback(REPORT)).toThrow(InvalidTransition);
    const chatting = chattingState();
    expect(() => chatting.startSession("sid-2", SCENARIO,
                                       { tts: false, stt: true }))
      .toThrow(InvalidTransition);
  });

  it("feedback -> chatting keeps the transcript intact", () => {
    const state = chattingState();
    state.recordExchange("Hello", "You said: Hello", 2);
    state.showFeedback(REPORT);
    state.returnToChat();
    expect(state.transcript).toHaveLength(2);
    expect(state.lastReport).toEqual(REPORT);
  });
});

describe("transcript mirror", () => {
  it("matches the server turn count after each exchange", () => {
    const state = chattingState();
    state.recordExchange("one", "You said: one", 2);
    state.recordExchange("two", "You said: two", 4);
    expect(state.turnCount).toBe(4);
    expect(state.transcript.map((t) => t.role)).toEqual(
      ["user", "agent", "user", "agent"]);
  });

  it("throws when the mirror drifts from the server", () => {
    const state = chattingState();
    expect(() => state.recordExchange("one", "reply", 5)).toThrow(/out of sync/);
  });

  it("counts an opening line as the first agent turn", () => {
    const state = new UiState();
    state.startSession("sid-3", SCENARIO, { tts: false, stt: true },
                       "Welcome in!");
    expect(state.transcript).toEqual([{ role: "agent", text: "Welcome in!" }]);
    state.recordExchange("Hi", "You said: Hi", 3);
    expect(state.turnCount).toBe(3);
  });
});

describe("restart", () => {
  it("clears transcript and report, keeps session and scenario", () => {
    const state = chattingState();
    state.recordExchange("one", "You said: one", 2);
    state.showFeedback(REPORT);
    state.restartChat();
    expect(state.phase).toBe("chatting");
    expect(state.transcript).toEqual([]);
    expect(state.turnCount).toBe(0);
    expect(state.lastReport).toBeNull();
    expect(state.sessionId).toBe("sid-1");
    expect(state.scenario).toEqual(SCENARIO);
  });
});
