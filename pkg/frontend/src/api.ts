// Thin client over the documented chat API; the base URL is the only
// configuration.

import type { AgentReply, SessionSnapshot } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!resp.ok) {
      let message = `HTTP ${resp.status}`;
      try {
        const doc = await resp.json();
        if (doc && doc.message) message = doc.message;
      } catch {
        // non-JSON error body; keep the status message
      }
      throw new ApiError(resp.status, message);
    }
    return (await resp.json()) as T;
  }

  createSession(userId: string): Promise<{ session_id: string }> {
    return this.request("/api/v1/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ user_id: userId }),
    });
  }

  sendMessage(sessionId: string, text: string): Promise<AgentReply> {
    return this.request(`/api/v1/sessions/${sessionId}/messages`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ text }),
    });
  }

  sendFeedback(
    sessionId: string,
    productId: string,
    outcome: "accept" | "reject",
  ): Promise<unknown> {
    return this.request(`/api/v1/sessions/${sessionId}/feedback`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ product_id: productId, outcome }),
    });
  }

  getSession(sessionId: string): Promise<SessionSnapshot> {
    return this.request(`/api/v1/sessions/${sessionId}`);
  }

  streamUrl(sessionId: string): string {
    return `${this.baseUrl}/api/v1/sessions/${sessionId}/stream`;
  }
}
