// Typed client for the practice-service JSON API. Every request goes to the
// single configured base URL; the app never talks to any other origin.

export interface Scenario {
  id: string;
  title: string;
  description: string;
  agent_role: string;
  preset: boolean;
}

export interface SessionSettings {
  tts_enabled: boolean;
  stt_enabled: boolean;
}

export interface SessionCreated {
  session_id: string;
  scenario: Scenario;
  settings: SessionSettings;
  opening_line?: string;
}

export interface MessageReply {
  reply: string;
  turn_count: number;
}

export interface AudioReply extends MessageReply {
  transcript: string;
  reply_audio_url?: string;
}

export interface GroundingChunk {
  chunk_id: string;
  score: number;
  chunk_text: string;
}

export interface FeedbackReport {
  overall_style: string;
  strengths: string[];
  improvements: string[];
  recommendations: string[];
  grounding: GroundingChunk[];
  generated_at: number;
}

export interface RestartReply {
  session_id: string;
  turn_count: number;
  scenario: Scenario;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly retryable: boolean,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchFn = typeof fetch;

export class ApiClient {
  private readonly base: string;
  private readonly fetchFn: FetchFn;

  constructor(baseUrl: string, fetchFn: FetchFn = fetch) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn;
  }

  get baseUrl(): string {
    return this.base;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.base}${path}`, init);
    if (!response.ok) {
      throw await toApiError(response);
    }
    return (await response.json()) as T;
  }

  listScenarios(): Promise<Scenario[]> {
    return this.request<Scenario[]>("/api/scenarios");
  }

  createSession(body: {
    scenario_id?: string;
    custom_description?: string;
    settings?: { tts_enabled: boolean; stt_enabled: boolean };
  }): Promise<SessionCreated> {
    return this.request<SessionCreated>("/api/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  sendMessage(sessionId: string, text: string): Promise<MessageReply> {
    return this.request<MessageReply>(
      `/api/sessions/${encodeURIComponent(sessionId)}/messages`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ text }),
      },
    );
  }

  sendAudio(sessionId: string, clip: Blob, filename = "clip.webm"):
      Promise<AudioReply> {
    const form = new FormData();
    form.append("audio", clip, filename);
    return this.request<AudioReply>(
      `/api/sessions/${encodeURIComponent(sessionId)}/audio`,
      { method: "POST", body: form },
    );
  }

  getFeedback(sessionId: string): Promise<FeedbackReport> {
    return this.request<FeedbackReport>(
      `/api/sessions/${encodeURIComponent(sessionId)}/feedback`,
      { method: "POST" },
    );
  }

  async downloadExport(sessionId: string): Promise<string> {
    const response = await this.fetchFn(
      `${this.base}/api/sessions/${encodeURIComponent(sessionId)}/feedback/export`,
    );
    if (!response.ok) {
      throw await toApiError(response);
    }
    return response.text();
  }

  restart(sessionId: string): Promise<RestartReply> {
    return this.request<RestartReply>(
      `/api/sessions/${encodeURIComponent(sessionId)}/restart`,
      { method: "POST" },
    );
  }

  async fetchReplyAudio(url: string): Promise<Blob> {
    // reply_audio_url is a one-shot path on the same API origin
    const response = await this.fetchFn(`${this.base}${url}`);
    if (!response.ok) {
      throw await toApiError(response);
    }
    return response.blob();
  }
}

async function toApiError(response: Response): Promise<ApiError> {
  let code = "internal_error";
  let message = `request failed with HTTP ${response.status}`;
  let retryable = false;
  try {
    const body = (await response.json()) as {
      code?: string; message?: string; retryable?: boolean;
    };
    if (body && typeof body.code === "string") {
      code = body.code;
      message = body.message ?? message;
      retryable = body.retryable ?? false;
    }
  } catch {
    // non-JSON error body; keep the fallback fields
  }
  return new ApiError(response.status, code, message, retryable);
}
