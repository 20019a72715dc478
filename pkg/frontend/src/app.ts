// Application wiring: store + API client + reply stream + view. Every
// external effect is injectable for tests.

import { ApiClient, ApiError, type FetchLike } from "./api.js";
import { initialState, reduce, type ChatEvent, type ChatState } from "./store.js";
import { ReplyStream, type EventSourceFactory } from "./stream.js";
import { render, skeleton, wire, type ViewCallbacks } from "./view.js";

export interface AppOptions {
  baseUrl?: string;
  userId?: string;
  fetchImpl?: FetchLike;
  streamFactory?: EventSourceFactory;
}

export class ChatApp {
  state: ChatState = initialState();
  private api: ApiClient;
  private stream: ReplyStream | null = null;
  private streamFactory?: EventSourceFactory;

  constructor(
    private root: HTMLElement,
    private options: AppOptions = {},
  ) {
    this.api = new ApiClient(options.baseUrl ?? "", options.fetchImpl);
    this.streamFactory = options.streamFactory;
    skeleton(root);
    wire(root, this.callbacks());
    this.render();
  }

  dispatch(event: ChatEvent): void {
    this.state = reduce(this.state, event);
    this.render();
  }

  private render(): void {
    render(this.root, this.state, this.callbacks());
  }

  private callbacks(): ViewCallbacks {
    return {
      onSend: (text) => void this.sendMessage(text),
      onRetry: (index) => void this.retryMessage(index),
      onFeedback: (productId, outcome) => void this.sendFeedback(productId, outcome),
      onTogglePanel: () => this.dispatch({ type: "toggle_panel" }),
    };
  }

  async start(): Promise<void> {
    const { session_id } = await this.api.createSession(this.options.userId ?? "web");
    this.dispatch({ type: "session_created", sessionId: session_id });
    this.connectStream();
  }

  private connectStream(): void {
    if (!this.state.sessionId) return;
    this.stream = new ReplyStream(
      this.api.streamUrl(this.state.sessionId),
      {
        onFrame: (reply) => this.dispatch({ type: "agent_reply", reply }),
        onStatus: (status) => this.dispatch({ type: "connection", status }),
        onReconnect: () => void this.reconcile(),
      },
      this.streamFactory,
    );
    this.stream.connect();
  }

  /** After a reconnect, pull the authoritative snapshot so missed replies
   * appear and later duplicate frames dedupe by turn index. */
  private async reconcile(): Promise<void> {
    if (!this.state.sessionId) return;
    try {
      const snapshot = await this.api.getSession(this.state.sessionId);
      this.dispatch({ type: "session_snapshot", snapshot });
    } catch (err) {
      this.dispatch({ type: "notice", message: `reconcile failed: ${describe(err)}` });
    }
  }

  async sendMessage(text: string): Promise<void> {
    if (!this.state.sessionId || this.state.closed) return;
    this.dispatch({ type: "user_message", text });
    try {
      const reply = await this.api.sendMessage(this.state.sessionId, text);
      this.dispatch({ type: "message_delivered" });
      this.dispatch({ type: "agent_reply", reply });
    } catch (err) {
      this.dispatch({ type: "message_failed" });
      this.dispatch({ type: "notice", message: describe(err) });
    }
  }

  private async retryMessage(index: number): Promise<void> {
    const entry = this.state.transcript[index];
    if (!entry || entry.status !== "failed" || !this.state.sessionId) return;
    this.dispatch({ type: "retry_message", index });
    try {
      const reply = await this.api.sendMessage(this.state.sessionId, entry.text);
      this.dispatch({ type: "message_delivered" });
      this.dispatch({ type: "agent_reply", reply });
      this.dispatch({ type: "notice", message: null });
    } catch (err) {
      this.dispatch({ type: "message_failed" });
      this.dispatch({ type: "notice", message: describe(err) });
    }
  }

  async sendFeedback(productId: string, outcome: "accept" | "reject"): Promise<void> {
    const card = this.state.cards.find((c) => c.productId === productId);
    if (!card || card.decision !== null || !this.state.sessionId) return;
    this.dispatch({ type: "feedback_chosen", productId, outcome });
    try {
      await this.api.sendFeedback(this.state.sessionId, productId, outcome);
    } catch (err) {
      this.dispatch({ type: "notice", message: `feedback failed: ${describe(err)}` });
    }
  }

  dispose(): void {
    this.stream?.dispose();
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.status}: ${err.message}`;
  return err instanceof Error ? err.message : String(err);
}
