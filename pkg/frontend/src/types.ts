// Wire types mirroring the chat service API.

export interface RecommendationWire {
  product_id: string;
  name: string;
  price: number;
  score: number;
}

export interface StateSummary {
  filled: Record<string, string>;
  missing_required: string[];
  order_placed: boolean;
}

export interface OrderWire {
  user_id: string;
  product_id: string;
  slot_values: { slot: string; value: string }[];
}

export interface AgentReply {
  text: string;
  machine_act: string;
  recommendations: RecommendationWire[];
  state_summary: StateSummary;
  order: OrderWire | null;
  turn: number;
}

export interface SessionSnapshot {
  session_id: string;
  user_id: string;
  closed: boolean;
  turn: number;
  state_summary: StateSummary;
  transcript: { speaker: "user" | "machine"; text: string; turn_index: number }[];
}
