import type { DocumentResult, FrameAck, SessionResult, SessionSummary } from "./types.js";

/** Thin client over the service endpoints; all rendering derives from these. */
export class TriageApi {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: typeof fetch = fetch.bind(globalThis),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchFn(`${this.base}${path}`, init);
    if (!response.ok && response.status !== 204) {
      let detail = `${response.status}`;
      try {
        const body = await response.json();
        if (body && typeof body.error === "string") detail = `${detail}: ${body.error}`;
      } catch {
        /* body was not JSON; the status alone is the message */
      }
      throw new Error(`request failed (${detail})`);
    }
    return response;
  }

  async classifyDocument(image: Blob): Promise<DocumentResult> {
    const form = new FormData();
    form.append("image", image, "frame.png");
    const response = await this.request("/v1/documents", { method: "POST", body: form });
    return response.json();
  }

  async createSession(): Promise<string> {
    const response = await this.request("/v1/sessions", { method: "POST" });
    const body = await response.json();
    return body.session_id;
  }

  async postFrame(sessionId: string, image: Blob): Promise<FrameAck> {
    const form = new FormData();
    form.append("image", image, "frame.png");
    const response = await this.request(`/v1/sessions/${sessionId}/frames`, {
      method: "POST",
      body: form,
    });
    return response.json();
  }

  /** null when the session has not produced a result yet (204). */
  async getResult(sessionId: string): Promise<SessionResult | null> {
    const response = await this.request(`/v1/sessions/${sessionId}/result`);
    if (response.status === 204) return null;
    return response.json();
  }

  async patchConfig(sessionId: string, overrides: Record<string, unknown>): Promise<void> {
    await this.request(`/v1/sessions/${sessionId}/config`, {
      method: "PATCH",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(overrides),
    });
  }

  async closeSession(sessionId: string): Promise<SessionSummary> {
    const response = await this.request(`/v1/sessions/${sessionId}`, { method: "DELETE" });
    return response.json();
  }
}
