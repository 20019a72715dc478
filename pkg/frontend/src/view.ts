// DOM rendering for the chat state. Renders only data received from the
// API; all decisions live server-side.

import type { ChatState } from "./store.js";

export interface ViewCallbacks {
  onSend(text: string): void;
  onRetry(index: number): void;
  onFeedback(productId: string, outcome: "accept" | "reject"): void;
  onTogglePanel(): void;
}

export function skeleton(root: HTMLElement): void {
  root.innerHTML = `
    <div id="chat">
      <header>
        <span id="title">convreco</span>
        <span id="status" data-status="connecting">connecting</span>
        <button id="panel-toggle" type="button">slots</button>
      </header>
      <div id="notice" hidden></div>
      <main>
        <div id="messages"></div>
        <aside id="slot-panel"></aside>
      </main>
      <div id="cards"></div>
      <div id="order" hidden></div>
      <form id="composer">
        <input id="input" autocomplete="off" placeholder="say something" />
        <button id="send" type="submit" disabled>send</button>
      </form>
    </div>`;
}

export function render(root: HTMLElement, state: ChatState, callbacks: ViewCallbacks): void {
  const status = root.querySelector("#status") as HTMLElement;
  status.dataset.status = state.connection;
  status.textContent = state.connection;

  const notice = root.querySelector("#notice") as HTMLElement;
  notice.hidden = state.notice === null;
  notice.textContent = state.notice ?? "";

  const messages = root.querySelector("#messages") as HTMLElement;
  messages.innerHTML = "";
  state.transcript.forEach((entry, index) => {
    const bubble = document.createElement("div");
    bubble.className = `msg ${entry.speaker} ${entry.status}`;
    bubble.textContent = entry.text;
    if (entry.status === "failed") {
      const retry = document.createElement("button");
      retry.type = "button";
      retry.className = "retry";
      retry.textContent = "retry";
      retry.addEventListener("click", () => callbacks.onRetry(index));
      bubble.appendChild(retry);
    }
    messages.appendChild(bubble);
  });
  messages.scrollTop = messages.scrollHeight;

  const cards = root.querySelector("#cards") as HTMLElement;
  cards.innerHTML = "";
  for (const card of state.cards) {
    const el = document.createElement("div");
    el.className = "card";
    el.dataset.productId = card.productId;
    const label = document.createElement("span");
    label.className = "card-label";
    label.textContent = `${card.name} - $${card.price}`;
    el.appendChild(label);
    for (const outcome of ["accept", "reject"] as const) {
      const button = document.createElement("button");
      button.type = "button";
      button.className = outcome;
      button.textContent = outcome;
      button.disabled = card.decision !== null;
      button.addEventListener("click", () => callbacks.onFeedback(card.productId, outcome));
      el.appendChild(button);
    }
    if (card.decision) {
      const chosen = document.createElement("em");
      chosen.textContent = card.decision === "accept" ? "accepted" : "rejected";
      el.appendChild(chosen);
    }
    cards.appendChild(el);
  }

  const panel = root.querySelector("#slot-panel") as HTMLElement;
  panel.hidden = !state.panelVisible;
  panel.innerHTML = "";
  const filledTitle = document.createElement("h4");
  filledTitle.textContent = "filled";
  panel.appendChild(filledTitle);
  for (const [slot, value] of Object.entries(state.slots.filled)) {
    const row = document.createElement("div");
    row.className = "slot filled";
    row.textContent = `${slot} = ${value}`;
    panel.appendChild(row);
  }
  const missingTitle = document.createElement("h4");
  missingTitle.textContent = "missing";
  panel.appendChild(missingTitle);
  for (const slot of state.slots.missing_required) {
    const row = document.createElement("div");
    row.className = "slot missing";
    row.textContent = slot;
    panel.appendChild(row);
  }

  const order = root.querySelector("#order") as HTMLElement;
  order.hidden = state.order === null;
  if (state.order) {
    const details = state.order.slot_values
      .map((sv) => `${sv.slot}=${sv.value}`)
      .join(", ");
    order.textContent = `order placed: ${state.order.product_id} (${details})`;
  }

  const input = root.querySelector("#input") as HTMLInputElement;
  const send = root.querySelector("#send") as HTMLButtonElement;
  input.disabled = state.closed;
  send.disabled = state.closed || input.value.trim() === "";
}

export function wire(root: HTMLElement, callbacks: ViewCallbacks): void {
  const form = root.querySelector("#composer") as HTMLFormElement;
  const input = root.querySelector("#input") as HTMLInputElement;
  const send = root.querySelector("#send") as HTMLButtonElement;
  input.addEventListener("input", () => {
    send.disabled = input.disabled || input.value.trim() === "";
  });
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const text = input.value.trim();
    if (!text || input.disabled) return;
    input.value = "";
    send.disabled = true;
    callbacks.onSend(text);
  });
  (root.querySelector("#panel-toggle") as HTMLButtonElement).addEventListener("click", () =>
    callbacks.onTogglePanel(),
  );
}
