// In-memory UI state. Nothing here is ever written to persistent storage:
// a page refresh reconstructs a fresh instance in the picking phase.

import type { FeedbackReport, Scenario } from "./api.js";

export type Phase = "picking" | "chatting" | "feedback";

export interface TranscriptEntry {
  role: "user" | "agent";
  text: string;
}

export interface Settings {
  tts: boolean;
  stt: boolean;
}

const ALLOWED: Record<Phase, Phase[]> = {
  picking: ["chatting"],
  chatting: ["feedback"],
  feedback: ["chatting", "picking"],
};

export class InvalidTransition extends Error {
  constructor(from: Phase, to: Phase) {
    super(`invalid phase transition ${from} -> ${to}`);
    this.name = "InvalidTransition";
  }
}

export class UiState {
  phase: Phase = "picking";
  sessionId: string | null = null;
  scenario: Scenario | null = null;
  settings: Settings = { tts: false, stt: true };
  transcript: TranscriptEntry[] = [];
  turnCount = 0;
  lastReport: FeedbackReport | null = null;
  busy = false;

  private listeners: Array<() => void> = [];

  subscribe(listener: () => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  private transition(to: Phase): void {
    if (!ALLOWED[this.phase].includes(to)) {
      throw new InvalidTransition(this.phase, to);
    }
    this.phase = to;
  }

  startSession(sessionId: string, scenario: Scenario, settings: Settings,
               openingLine?: string): void {
    this.transition("chatting");
    this.sessionId = sessionId;
    this.scenario = scenario;
    this.settings = settings;
    this.transcript = [];
    this.turnCount = 0;
    this.lastReport = null;
    if (openingLine) {
      this.transcript.push({ role: "agent", text: openingLine });
      this.turnCount = 1;
    }
    this.emit();
  }

  /** Record one completed exchange; the mirror must match the server count. */
  recordExchange(userText: string, reply: string, serverTurnCount: number): void {
    this.transcript.push({ role: "user", text: userText });
    this.transcript.push({ role: "agent", text: reply });
    this.turnCount = this.transcript.length;
    if (this.turnCount !== serverTurnCount) {
      throw new Error(
        `transcript mirror out of sync: local ${this.turnCount}, ` +
        `server ${serverTurnCount}`);
    }
    this.emit();
  }

  showFeedback(report: FeedbackReport): void {
    this.transition("feedback");
    this.lastReport = report;
    this.emit();
  }

  returnToChat(): void {
    this.transition("chatting");
    this.emit();
  }

  restartChat(): void {
    if (this.phase === "feedback") {
      this.transition("chatting");
    }
    this.transcript = [];
    this.turnCount = 0;
    this.lastReport = null;
    this.emit();
  }

  setBusy(busy: boolean): void {
    this.busy = busy;
    this.emit();
  }
}
