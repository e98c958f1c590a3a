// The single-page app: options sidebar, role-play chat, and the feedback page.
//
// All dynamic text reaches the DOM through textContent (never innerHTML), so
// model output cannot inject markup. Every control is a native, labelled
// element, which keeps the whole loop keyboard-operable and screen-reader
// friendly. No state is ever written to persistent browser storage.

import { ApiClient, ApiError, FeedbackReport, Scenario } from "./api.js";
import { RecorderFactory, RecorderHandle, createMicrophoneRecorder,
         playClip } from "./audio.js";
import { UiState } from "./state.js";

export interface AppDeps {
  api: ApiClient;
  state: UiState;
  recorderFactory?: RecorderFactory;
  playBlob?: (blob: Blob) => Promise<unknown>;
  download?: (html: string, filename: string) => void;
}

const FEEDBACK_SECTIONS: Array<[keyof FeedbackReport, string]> = [
  ["overall_style", "Overall Communication Style"],
  ["strengths", "Key Strengths"],
  ["improvements", "Areas for Improvement"],
  ["recommendations", "Actionable Recommendations"],
];

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document, tag: K, attrs: Record<string, string> = {}, text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function defaultDownload(html: string, filename: string): void {
  const url = URL.createObjectURL(new Blob([html], { type: "text/html" }));
  const anchor = document.createElement("a");
  anchor.href = url;
  anchor.download = filename;
  document.body.append(anchor);
  anchor.click();
  anchor.remove();
  URL.revokeObjectURL(url);
}

export class App {
  private readonly api: ApiClient;
  private readonly state: UiState;
  private readonly recorderFactory: RecorderFactory;
  private readonly playBlob: (blob: Blob) => Promise<unknown>;
  private readonly download: (html: string, filename: string) => void;
  private readonly doc: Document;

  private scenarios: Scenario[] = [];
  private main!: HTMLElement;
  private sidebarError!: HTMLElement;
  private chatError: HTMLElement | null = null;
  private messageInput: HTMLInputElement | null = null;
  private ttsToggle!: HTMLInputElement;
  private sttToggle!: HTMLInputElement;
  private activeRecorder: RecorderHandle | null = null;
  private draft = "";

  constructor(private readonly root: HTMLElement, deps: AppDeps) {
    this.api = deps.api;
    this.state = deps.state;
    this.recorderFactory = deps.recorderFactory ?? createMicrophoneRecorder;
    this.playBlob = deps.playBlob ?? playClip;
    this.download = deps.download ?? defaultDownload;
    this.doc = root.ownerDocument;
    this.state.subscribe(() => this.renderMain());
  }

  async init(): Promise<void> {
    this.scenarios = await this.api.listScenarios();
    this.renderShell();
    this.renderMain();
    // a refresh always lands on the picking phase; drop any stale route
    if (this.doc.defaultView && this.doc.defaultView.location.hash) {
      this.doc.defaultView.location.hash = "";
    }
  }

  // -- layout -----------------------------------------------------------

  private renderShell(): void {
    this.root.textContent = "";
    const header = el(this.doc, "header");
    header.append(el(this.doc, "h1", {}, "Conversation practice"));
    const layout = el(this.doc, "div", { class: "layout" });
    layout.append(this.buildSidebar());
    this.main = el(this.doc, "main", { id: "main" });
    layout.append(this.main);
    this.root.append(header, layout);
  }

  private buildSidebar(): HTMLElement {
    const aside = el(this.doc, "aside", { "aria-label": "Options" });
    aside.append(el(this.doc, "h2", {}, "Options"));

    this.ttsToggle = el(this.doc, "input",
                        { type: "checkbox", id: "tts-toggle" });
    const ttsLabel = el(this.doc, "label", { for: "tts-toggle" },
                        "Read replies aloud (text-to-speech)");
    this.sttToggle = el(this.doc, "input",
                        { type: "checkbox", id: "stt-toggle", checked: "" });
    this.sttToggle.checked = true;
    this.sttToggle.addEventListener("change", () => this.renderMain());
    const sttLabel = el(this.doc, "label", { for: "stt-toggle" },
                        "Enable voice input (speech-to-text)");
    for (const [toggle, label] of [[this.ttsToggle, ttsLabel],
                                   [this.sttToggle, sttLabel]] as const) {
      const row = el(this.doc, "div", { class: "toggle-row" });
      row.append(toggle, label);
      aside.append(row);
    }

    aside.append(el(this.doc, "label", { for: "scenario-select" },
                    "Preset scenario"));
    const select = el(this.doc, "select", { id: "scenario-select" });
    for (const scenario of this.scenarios) {
      select.append(el(this.doc, "option", { value: scenario.id },
                       scenario.title));
    }
    aside.append(select);
    const startPreset = el(this.doc, "button", { id: "start-preset" },
                           "Start Preset Scenario");
    startPreset.addEventListener("click", () => {
      void this.startSession({ scenario_id: select.value });
    });
    aside.append(startPreset);

    aside.append(el(this.doc, "label", { for: "custom-text" },
                    "Or describe your own situation"));
    const custom = el(this.doc, "textarea",
                      { id: "custom-text", rows: "3" });
    aside.append(custom);
    const startCustom = el(this.doc, "button", { id: "start-custom" },
                           "Start Custom Scenario");
    startCustom.addEventListener("click", () => {
      const description = custom.value.trim();
      if (!description) {
        this.sidebarError.textContent =
          "Describe the situation first, then start.";
        return;
      }
      void this.startSession({ custom_description: description });
    });
    aside.append(startCustom);

    this.sidebarError = el(this.doc, "p",
                           { id: "sidebar-error", role: "alert" });
    aside.append(this.sidebarError);
    return aside;
  }

  private async startSession(body: {
    scenario_id?: string; custom_description?: string;
  }): Promise<void> {
    if (this.state.phase !== "picking") {
      return;
    }
    this.sidebarError.textContent = "";
    try {
      const created = await this.api.createSession({
        ...body,
        settings: {
          tts_enabled: this.ttsToggle.checked,
          stt_enabled: this.sttToggle.checked,
        },
      });
      this.state.startSession(created.session_id, created.scenario, {
        tts: created.settings.tts_enabled,
        stt: created.settings.stt_enabled,
      }, created.opening_line);
    } catch (error) {
      this.sidebarError.textContent = describe(error);
    }
  }

  // -- main region --------------------------------------------------------

  private renderMain(): void {
    if (!this.main) {
      return;
    }
    this.main.textContent = "";
    this.chatError = null;
    this.messageInput = null;
    switch (this.state.phase) {
      case "picking":
        this.renderPicking();
        break;
      case "chatting":
        this.renderChat();
        break;
      case "feedback":
        this.renderFeedback();
        break;
    }
    this.syncRoute();
  }

  private syncRoute(): void {
    const win = this.doc.defaultView;
    if (!win) {
      return;
    }
    const wanted = this.state.phase === "feedback" ? "#/feedback" : "";
    if (win.location.hash !== wanted) {
      win.location.hash = wanted;
    }
  }

  private renderPicking(): void {
    const intro = el(this.doc, "section", { "aria-label": "How to use" });
    intro.append(el(this.doc, "h2", {}, "How to use"));
    const steps = el(this.doc, "ol");
    for (const step of [
      "Pick a preset scenario in the sidebar, or describe your own.",
      "Chat with the practice partner by typing or speaking.",
      "Press Get Feedback for a structured review of how you communicated.",
      "Continue the conversation, restart, or download the analysis.",
    ]) {
      steps.append(el(this.doc, "li", {}, step));
    }
    intro.append(steps);
    intro.append(el(this.doc, "p", {},
                    "Nothing you say is stored: a page refresh clears the "
                    + "conversation on both sides."));
    this.main.append(intro);
  }

  private renderChat(): void {
    const scenario = this.state.scenario;
    const header = el(this.doc, "section", { class: "scenario-header" });
    header.append(el(this.doc, "h2", {}, scenario ? scenario.title : ""));
    header.append(el(this.doc, "p", { class: "description" },
                     scenario ? scenario.description : ""));
    this.main.append(header);

    const transcript = el(this.doc, "ul", {
      id: "transcript", "aria-label": "Conversation",
    });
    for (const entry of this.state.transcript) {
      const bubble = el(this.doc, "li", { class: `bubble ${entry.role}` });
      bubble.append(el(this.doc, "span", { class: "who" },
                       entry.role === "user" ? "You" : "Partner"));
      bubble.append(el(this.doc, "span", { class: "text" }, entry.text));
      transcript.append(bubble);
    }
    this.main.append(transcript);

    const typing = el(this.doc, "p", {
      id: "typing-indicator", "aria-live": "polite",
    }, this.state.busy ? "Partner is typing…" : "");
    this.main.append(typing);

    this.chatError = el(this.doc, "p", { id: "chat-error", role: "alert" });
    this.main.append(this.chatError);

    const controls = el(this.doc, "div", { class: "chat-controls" });
    const restart = el(this.doc, "button", { id: "restart-button" },
                       "Restart");
    restart.addEventListener("click", () => { void this.onRestart(); });
    const feedback = el(this.doc, "button", { id: "feedback-button" },
                        "Get Feedback");
    feedback.addEventListener("click", () => { void this.onGetFeedback(); });
    controls.append(restart, feedback);
    if (this.state.settings.stt && this.sttToggle.checked) {
      controls.append(this.buildRecordButton());
    }
    this.main.append(controls);

    const form = el(this.doc, "form", { id: "message-form" });
    form.append(el(this.doc, "label", { for: "message-input" },
                   "Your message"));
    this.messageInput = el(this.doc, "input", {
      type: "text", id: "message-input", autocomplete: "off",
    });
    this.messageInput.value = this.draft;
    this.messageInput.addEventListener("input", () => {
      this.draft = this.messageInput ? this.messageInput.value : "";
    });
    const send = el(this.doc, "button",
                    { id: "send-button", type: "submit" }, "Send");
    send.disabled = this.state.busy;
    form.append(this.messageInput, send);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.onSend();
    });
    this.main.append(form);
  }

  private buildRecordButton(): HTMLButtonElement {
    const recording = this.activeRecorder !== null;
    const button = el(this.doc, "button", {
      id: "record-button", "aria-pressed": String(recording),
    }, recording ? "Stop recording" : "Start recording");
    button.addEventListener("click", () => { void this.onRecordToggle(); });
    return button;
  }

  private async onSend(): Promise<void> {
    const input = this.messageInput;
    const sessionId = this.state.sessionId;
    if (!input || !sessionId || this.state.busy) {
      return;
    }
    const text = input.value.trim();
    if (!text) {
      return;
    }
    this.state.setBusy(true);
    try {
      const reply = await this.api.sendMessage(sessionId, text);
      this.draft = "";
      this.state.setBusy(false);
      this.state.recordExchange(text, reply.reply, reply.turn_count);
      this.focusInput("");
    } catch (error) {
      this.draft = text;  // keep the draft for retry
      this.state.setBusy(false);
      this.showChatError(describe(error));
      this.focusInput(text);
    }
  }

  private async onRecordToggle(): Promise<void> {
    const sessionId = this.state.sessionId;
    if (!sessionId) {
      return;
    }
    if (this.activeRecorder === null) {
      try {
        this.activeRecorder = await this.recorderFactory();
      } catch (error) {
        this.showChatError(`Microphone unavailable: ${describe(error)}`);
        return;
      }
      this.renderMain();
      return;
    }
    const recorder = this.activeRecorder;
    this.activeRecorder = null;
    this.state.setBusy(true);
    try {
      const { blob, filename } = await recorder.stop();
      const reply = await this.api.sendAudio(sessionId, blob, filename);
      this.state.setBusy(false);
      if (reply.transcript.trim()) {
        this.state.recordExchange(reply.transcript.trim(), reply.reply,
                                  reply.turn_count);
      }
      if (reply.reply_audio_url) {
        const clip = await this.api.fetchReplyAudio(reply.reply_audio_url);
        await this.playBlob(clip);
      }
    } catch (error) {
      this.state.setBusy(false);
      this.showChatError(describe(error));
    }
  }

  private async onGetFeedback(): Promise<void> {
    const sessionId = this.state.sessionId;
    if (!sessionId || this.state.busy) {
      return;
    }
    this.state.setBusy(true);
    try {
      const report = await this.api.getFeedback(sessionId);
      this.state.setBusy(false);
      this.state.showFeedback(report);
    } catch (error) {
      this.state.setBusy(false);
      this.showChatError(describe(error));
    }
  }

  private async onRestart(): Promise<void> {
    const sessionId = this.state.sessionId;
    if (!sessionId) {
      return;
    }
    try {
      await this.api.restart(sessionId);
      this.state.restartChat();
    } catch (error) {
      this.showChatError(describe(error));
    }
  }

  private renderFeedback(): void {
    const report = this.state.lastReport;
    const page = el(this.doc, "section", { "aria-label": "Feedback" });
    page.append(el(this.doc, "h2", {}, "Your feedback"));
    if (report) {
      for (const [field, title] of FEEDBACK_SECTIONS) {
        const section = el(this.doc, "section", { class: "feedback-section" });
        section.append(el(this.doc, "h3", {}, title));
        const value = report[field];
        if (typeof value === "string") {
          section.append(el(this.doc, "p", {}, value));
        } else if (Array.isArray(value)) {
          const list = el(this.doc, "ul");
          for (const item of value as string[]) {
            list.append(el(this.doc, "li", {}, item));
          }
          section.append(list);
        }
        page.append(section);
      }
    }

    const actions = el(this.doc, "div", { class: "feedback-actions" });
    const download = el(this.doc, "button", { id: "download-button" },
                        "Download analysis");
    download.addEventListener("click", () => { void this.onDownload(); });
    const back = el(this.doc, "button", { id: "continue-button" },
                    "Continue the chat");
    back.addEventListener("click", () => this.state.returnToChat());
    actions.append(download, back);
    page.append(actions);
    this.main.append(page);
  }

  private async onDownload(): Promise<void> {
    const sessionId = this.state.sessionId;
    if (!sessionId) {
      return;
    }
    const html = await this.api.downloadExport(sessionId);
    this.download(html, "conversation-feedback.html");
  }

  private showChatError(message: string): void {
    if (this.chatError) {
      this.chatError.textContent = message;
    }
  }

  private focusInput(value: string): void {
    if (this.messageInput) {
      this.messageInput.value = value;
      this.messageInput.focus();
    }
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) {
    return error.retryable
      ? `${error.message} (temporary; please try again)`
      : error.message;
  }
  return error instanceof Error ? error.message : String(error);
}
