// Shared test harness: a happy-dom window plus a scripted fake API server.

import { Window } from "happy-dom";

import { ApiClient, FetchFn, Scenario } from "../src/api.js";
import { App, AppDeps } from "../src/app.js";
import { UiState } from "../src/state.js";

export const SCENARIOS: Scenario[] = [
  { id: "ordering-food", title: "Ordering food",
    description: "Order a meal at a cafe.", agent_role: "waiter",
    preset: true },
  { id: "joining-group", title: "Joining a group conversation",
    description: "Join coworkers chatting at a table.",
    agent_role: "coworker", preset: true },
];

export const REPORT = {
  overall_style: "Friendly and to the point.",
  strengths: ["clear request", "polite close"],
  improvements: ["short replies"],
  recommendations: ["add one detail"],
  grounding: [{ chunk_id: "g:0", score: 0.9, chunk_text: "be polite" }],
  generated_at: 1700000000,
};

export function makeDom() {
  const window = new Window({ url: "http://ui.test/" });
  const document = window.document as unknown as Document;
  const root = document.createElement("div");
  root.id = "app";
  document.body.append(root);
  return { window, document, root };
}

export interface FakeApiOptions {
  failSendWith?: { status: number; code: string; message: string;
                   retryable: boolean };
  openingLine?: string;
}

export class FakeApi {
  readonly urls: string[] = [];
  turnCount = 0;
  restarted = 0;

  constructor(private readonly options: FakeApiOptions = {}) {}

  get fetchFn(): FetchFn {
    return (input, init) => this.handle(String(input), init);
  }

  private json(body: unknown, status = 200): Response {
    return new Response(JSON.stringify(body), {
      status,
      headers: { "content-type": "application/json" },
    });
  }

  private async handle(url: string, init?: RequestInit): Promise<Response> {
    this.urls.push(url);
    const path = new URL(url).pathname;
    if (path === "/api/scenarios") {
      return this.json(SCENARIOS);
    }
    if (path === "/api/sessions") {
      const body = JSON.parse(String(init?.body ?? "{}"));
      const scenario = SCENARIOS.find((s) => s.id === body.scenario_id)
        ?? { id: "custom", title: String(body.custom_description).slice(0, 40),
             description: body.custom_description, agent_role: "partner",
             preset: false };
      this.turnCount = this.options.openingLine ? 1 : 0;
      const payload: Record<string, unknown> = {
        session_id: "fake-session-1",
        scenario,
        settings: body.settings,
      };
      if (this.options.openingLine) {
        payload.opening_line = this.options.openingLine;
      }
      return this.json(payload, 201);
    }
    if (path.endsWith("/messages")) {
      if (this.options.failSendWith) {
        const err = this.options.failSendWith;
        return this.json(err, err.status);
      }
      const text = JSON.parse(String(init?.body ?? "{}")).text as string;
      this.turnCount += 2;
      return this.json({ reply: `You said: ${text}`,
                         turn_count: this.turnCount });
    }
    if (path.endsWith("/audio")) {
      const form = init?.body as FormData;
      const clip = form.get("audio") as Blob;
      const transcript = await new Response(clip).text();
      this.turnCount += 2;
      return this.json({
        transcript,
        reply: `You said: ${transcript}`,
        turn_count: this.turnCount,
        reply_audio_url: "/api/audio/one-shot-token",
      });
    }
    if (path.startsWith("/api/audio/")) {
      return new Response(new Blob([new Uint8Array([1, 2, 3])]), {
        status: 200, headers: { "content-type": "audio/wav" },
      });
    }
    if (path.endsWith("/feedback")) {
      if (this.turnCount === 0) {
        return this.json({ code: "no_user_turns", message: "no user turns",
                           retryable: false }, 409);
      }
      return this.json(REPORT);
    }
    if (path.endsWith("/feedback/export")) {
      return new Response("<!DOCTYPE html><html><body>ok</body></html>", {
        status: 200, headers: { "content-type": "text/html" },
      });
    }
    if (path.endsWith("/restart")) {
      this.restarted += 1;
      this.turnCount = 0;
      return this.json({ session_id: "fake-session-1", turn_count: 0,
                         scenario: SCENARIOS[0] });
    }
    return this.json({ code: "internal_error", message: `no route ${path}`,
                       retryable: false }, 500);
  }
}

export interface Harness {
  window: Window;
  document: Document;
  root: HTMLElement;
  app: App;
  state: UiState;
  fake: FakeApi;
  downloads: Array<{ html: string; filename: string }>;
  played: Blob[];
}

export async function bootApp(
  options: FakeApiOptions = {},
  extraDeps: Partial<AppDeps> = {},
): Promise<Harness> {
  const { window, document, root } = makeDom();
  const fake = new FakeApi(options);
  const state = new UiState();
  const downloads: Array<{ html: string; filename: string }> = [];
  const played: Blob[] = [];
  const app = new App(root, {
    api: new ApiClient("http://api.test", fake.fetchFn),
    state,
    download: (html, filename) => downloads.push({ html, filename }),
    playBlob: async (blob) => played.push(blob),
    ...extraDeps,
  });
  await app.init();
  return { window, document, root, app, state, fake, downloads, played };
}

export function click(root: HTMLElement, selector: string): void {
  const node = root.querySelector(selector) as HTMLElement | null;
  if (!node) {
    throw new Error(`no element matches ${selector}`);
  }
  node.click();
}

export async function until(condition: () => boolean,
                            timeoutMs = 5000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (condition()) {
      return;
    }
    await new Promise((resolve) => setTimeout(resolve, 10));
  }
  throw new Error("condition not met within timeout");
}

export async function submitMessage(harness: Harness,
                                    text: string): Promise<void> {
  const input = harness.root.querySelector("#message-input") as HTMLInputElement;
  input.value = text;
  const form = harness.root.querySelector("#message-form") as HTMLFormElement;
  form.dispatchEvent(new (harness.window as unknown as {
    Event: typeof Event;
  }).Event("submit", { bubbles: true, cancelable: true }));
}
