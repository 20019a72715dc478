import type { AgentReply, SessionSnapshot } from "../src/types.js";

export function askReply(turn = 1): AgentReply {
  return {
    text: "what zip code should it be near?",
    machine_act: "ask",
    recommendations: [],
    state_summary: {
      filled: { food: "japanese" },
      missing_required: ["location", "price_range"],
      order_placed: false,
    },
    order: null,
    turn,
  };
}

export function recommendReply(turn = 2, items = 3): AgentReply {
  return {
    text: "how about Amber Table for $12?",
    machine_act: "recommend",
    recommendations: Array.from({ length: items }, (_, i) => ({
      product_id: `p00${i}`,
      name: `Product ${i}`,
      price: 10 + i,
      score: 0.9 - i * 0.1,
    })),
    state_summary: {
      filled: { food: "japanese", location: "95070", price_range: "cheap" },
      missing_required: [],
      order_placed: false,
    },
    order: null,
    turn,
  };
}

export function orderReply(turn = 3): AgentReply {
  return {
    text: "done! i've placed your order.",
    machine_act: "place_order",
    recommendations: [],
    state_summary: {
      filled: { food: "japanese", location: "95070", price_range: "cheap" },
      missing_required: [],
      order_placed: true,
    },
    order: {
      user_id: "web",
      product_id: "p000",
      slot_values: [
        { slot: "food", value: "japanese" },
        { slot: "location", value: "95070" },
        { slot: "price_range", value: "cheap" },
      ],
    },
    turn,
  };
}

export function snapshot(turn: number): SessionSnapshot {
  return {
    session_id: "s1",
    user_id: "web",
    closed: false,
    turn,
    state_summary: {
      filled: { food: "japanese" },
      missing_required: ["location", "price_range"],
      order_placed: false,
    },
    transcript: [
      { speaker: "user", text: "i want japanese food", turn_index: 0 },
      { speaker: "machine", text: "what zip code should it be near?", turn_index: 1 },
    ],
  };
}
