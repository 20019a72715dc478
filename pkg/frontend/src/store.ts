// The chat view model as a pure reducer: UI state is a function of the
// event stream (API responses + user input events) and nothing else, so
// recorded event streams replay into identical states.

import type { AgentReply, SessionSnapshot, StateSummary } from "./types.js";

export type ConnectionStatus = "connecting" | "live" | "retrying" | "closed";

export interface TranscriptEntry {
  speaker: "user" | "machine";
  text: string;
  status: "pending" | "sent" | "failed";
}

export interface Card {
  productId: string;
  name: string;
  price: number;
  score: number;
  turn: number;
  decision: "accept" | "reject" | null;
}

export interface ChatState {
  sessionId: string | null;
  transcript: TranscriptEntry[];
  cards: Card[];
  slots: StateSummary;
  order: AgentReply["order"];
  closed: boolean;
  connection: ConnectionStatus;
  seenTurns: number[];
  panelVisible: boolean;
  notice: string | null;
}

export type ChatEvent =
  | { type: "session_created"; sessionId: string }
  | { type: "user_message"; text: string }
  | { type: "message_delivered" }
  | { type: "message_failed" }
  | { type: "retry_message"; index: number }
  | { type: "agent_reply"; reply: AgentReply }
  | { type: "session_snapshot"; snapshot: SessionSnapshot }
  | { type: "feedback_chosen"; productId: string; outcome: "accept" | "reject" }
  | { type: "connection"; status: ConnectionStatus }
  | { type: "toggle_panel" }
  | { type: "notice"; message: string | null };

export function initialState(): ChatState {
  return {
    sessionId: null,
    transcript: [],
    cards: [],
    slots: { filled: {}, missing_required: [], order_placed: false },
    order: null,
    closed: false,
    connection: "connecting",
    seenTurns: [],
    panelVisible: true,
    notice: null,
  };
}

export function reduce(state: ChatState, event: ChatEvent): ChatState {
  switch (event.type) {
    case "session_created":
      return { ...state, sessionId: event.sessionId };
    case "user_message":
      return {
        ...state,
        transcript: [
          ...state.transcript,
          { speaker: "user", text: event.text, status: "pending" },
        ],
      };
    case "message_delivered":
      return { ...state, transcript: markLastUser(state.transcript, "sent") };
    case "message_failed":
      return { ...state, transcript: markLastUser(state.transcript, "failed") };
    case "retry_message":
      return {
        ...state,
        transcript: state.transcript.map((entry, i) =>
          i === event.index && entry.status === "failed"
            ? { ...entry, status: "pending" }
            : entry,
        ),
      };
    case "agent_reply": {
      const reply = event.reply;
      if (state.seenTurns.includes(reply.turn)) {
        return state; // duplicate frame after a reconnect: render once
      }
      return {
        ...state,
        transcript: [
          ...state.transcript,
          { speaker: "machine", text: reply.text, status: "sent" },
        ],
        cards:
          reply.machine_act === "recommend"
            ? reply.recommendations.map((r) => ({
                productId: r.product_id,
                name: r.name,
                price: r.price,
                score: r.score,
                turn: reply.turn,
                decision: null,
              }))
            : state.cards,
        slots: reply.state_summary,
        order: reply.order ?? state.order,
        closed: state.closed || reply.order !== null,
        seenTurns: [...state.seenTurns, reply.turn],
      };
    }
    case "session_snapshot": {
      const snap = event.snapshot;
      return {
        ...state,
        sessionId: snap.session_id,
        transcript: snap.transcript.map((t) => ({
          speaker: t.speaker,
          text: t.text,
          status: "sent",
        })),
        slots: snap.state_summary,
        closed: snap.closed,
        seenTurns: Array.from({ length: snap.turn }, (_, i) => i + 1),
      };
    }
    case "feedback_chosen":
      return {
        ...state,
        cards: state.cards.map((card) =>
          card.productId === event.productId && card.decision === null
            ? { ...card, decision: event.outcome }
            : card,
        ),
      };
    case "connection":
      return { ...state, connection: event.status };
    case "toggle_panel":
      return { ...state, panelVisible: !state.panelVisible };
    case "notice":
      return { ...state, notice: event.message };
    default:
      return state;
  }
}

function markLastUser(
  transcript: TranscriptEntry[],
  status: "sent" | "failed",
): TranscriptEntry[] {
  const index = transcript
    .map((entry, i) => ({ entry, i }))
    .filter(({ entry }) => entry.speaker === "user" && entry.status === "pending")
    .map(({ i }) => i)
    .pop();
  if (index === undefined) return transcript;
  return transcript.map((entry, i) => (i === index ? { ...entry, status } : entry));
}
