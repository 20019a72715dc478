"""HTTP/streaming chat service.

Each session runs the full per-turn loop (NLU -> state -> policy ->
recommender -> NLG) under a per-session lock, so concurrent messages to one
session serialize while sessions proceed in parallel. Every session appends
to its own JSON-lines event log; folding that log reproduces the final
dialogue state exactly.

Serving is greedy (epsilon=0); exploration is training-only.
"""

from __future__ import annotations

import asyncio
import json
import logging
import secrets
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .domain import DialogueAct, Utterance
from .loop import AgentRuntime, parse_user, realize_action
from .policy import PolicyConfig, abstract_state, legal_actions, select_action
from .recommender import Hyperparams, feedback_update, has_candidates
from .state import DialogueState, apply_machine_act, state_snapshot, update_state

log = logging.getLogger(__name__)

GREEDY = PolicyConfig(epsilon=0.0)


@dataclass
class AgentReply:
    text: str
    machine_act: str
    recommendations: list[dict]
    state_summary: dict
    order: dict | None
    turn: int  # machine turn counter, the stream dedupe key

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "machine_act": self.machine_act,
            "recommendations": self.recommendations,
            "state_summary": self.state_summary,
            "order": self.order,
            "turn": self.turn,
        }


@dataclass
class Session:
    id: str
    user_id: str
    state: DialogueState = field(default_factory=DialogueState)
    transcript: list[Utterance] = field(default_factory=list)
    used_templates: list[str] = field(default_factory=list)
    machine_turns: int = 0
    closed: bool = False
    created_at: float = field(default_factory=time.time)
    updated_at: float = field(default_factory=time.time)


class SessionClosed(Exception):
    pass


class EventLog:
    """Append-only JSON-lines log, one file per session."""

    def __init__(self, directory: str | None):
        self._dir = Path(directory) if directory else None
        if self._dir:
            self._dir.mkdir(parents=True, exist_ok=True)

    def append(self, session_id: str, event: dict) -> None:
        if not self._dir:
            return
        with open(self._dir / f"{session_id}.jsonl", "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True, separators=(",", ":")) + "\n")

    def read(self, session_id: str) -> list[dict]:
        if not self._dir:
            return []
        path = self._dir / f"{session_id}.jsonl"
        if not path.exists():
            return []
        return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line]


def replay_events(events: list[dict]) -> DialogueState:
    """Fold a session event log back into the final dialogue state."""
    state = DialogueState()
    for event in events:
        kind = event["type"]
        if kind == "user_message":
            slots = [  # slot values as recorded at parse time
                _slot_from_doc(doc) for doc in event["slots"]
            ]
            state = update_state(state, DialogueAct(kind=event["act"]), slots)
        elif kind == "machine_act":
            act = _machine_act_from_doc(event)
            state = apply_machine_act(state, act)
        elif kind == "feedback":
            if event["outcome"] == "accept":
                state = replace(state, accepted_item=event["product_id"])
            else:
                rejected = state.rejected_items | {event["product_id"]}
                accepted = state.accepted_item
                if accepted == event["product_id"]:
                    accepted = None
                state = replace(state, rejected_items=rejected, accepted_item=accepted)
    return state


def _slot_from_doc(doc: dict):
    from .domain import SlotValue

    return SlotValue(
        slot=doc["slot"],
        value=doc["value"],
        confidence=doc.get("confidence", 1.0),
        source_turn=doc.get("source_turn", 0),
    )


def _machine_act_from_doc(event: dict) -> DialogueAct:
    from .domain import Order, SlotValue

    kind = event["act"]
    if kind == "ask":
        return DialogueAct(kind="ask", slot=event["slot"])
    if kind == "recommend":
        return DialogueAct(kind="recommend", items=tuple(event["items"]))
    if kind == "place_order":
        o = event["order"]
        return DialogueAct(
            kind="place_order",
            order=Order(
                user_id=o["user_id"],
                product_id=o["product_id"],
                slot_values=tuple(
                    SlotValue(slot=sv["slot"], value=sv["value"]) for sv in o["slot_values"]
                ),
            ),
        )
    return DialogueAct(kind=kind)


def handle_message(
    runtime: AgentRuntime,
    session: Session,
    text: str,
    events: EventLog,
    mf_hyper: Hyperparams | None = None,
) -> AgentReply:
    """The full serving loop for one user message. Mutates the session;
    callers serialize per session."""
    if session.closed:
        raise SessionClosed(session.id)
    act_kind, slots, _ = parse_user(runtime, text)
    session.transcript.append(
        Utterance(speaker="user", text=text, turn_index=len(session.transcript))
    )
    session.state = update_state(session.state, DialogueAct(kind=act_kind), slots)
    events.append(
        session.id,
        {
            "type": "user_message",
            "text": text,
            "act": act_kind,
            "slots": [
                {"slot": sv.slot, "value": sv.value, "confidence": sv.confidence} for sv in slots
            ],
        },
    )
    if mf_hyper is not None and act_kind in ("accept", "reject"):
        _apply_session_feedback(runtime, session, act_kind, mf_hyper)
    if act_kind == "bye":
        session.closed = True
        runtime.templates.credit(session.used_templates, success=False)
        reply = _farewell_reply(runtime, session)
        events.append(session.id, {"type": "closed", "reason": "bye"})
        return reply
    try:
        turn = _machine_turn(runtime, session)
    except Exception:
        log.exception("machine turn failed for session %s; falling back", session.id)
        turn = None
    if turn is None:
        reply = _farewell_reply(runtime, session, apologetic=True)
        return reply
    session.used_templates.append(turn.template_id)
    session.state = apply_machine_act(session.state, turn.act, runtime.schema)
    session.transcript.append(
        Utterance(speaker="machine", text=turn.text, turn_index=len(session.transcript))
    )
    session.machine_turns += 1
    session.updated_at = time.time()
    event: dict = {"type": "machine_act", "act": turn.act.kind, "text": turn.text}
    if turn.act.kind == "ask":
        event["slot"] = turn.act.slot
    if turn.act.kind == "recommend":
        event["items"] = list(turn.act.items)
    order_doc = None
    if turn.order is not None:
        order_doc = {
            "user_id": turn.order.user_id,
            "product_id": turn.order.product_id,
            "slot_values": [
                {"slot": sv.slot, "value": sv.value} for sv in turn.order.slot_values
            ],
        }
        event["order"] = order_doc
    events.append(session.id, event)
    if turn.act.kind == "place_order":
        session.closed = True
        runtime.templates.credit(session.used_templates, success=True)
        events.append(session.id, {"type": "closed", "reason": "order_placed"})
    recs = [
        {
            "product_id": pid,
            "name": runtime.catalog.by_id(pid).name,
            "price": runtime.catalog.by_id(pid).price,
            "score": score,
        }
        for pid, score in turn.recommendations
    ]
    assert bool(recs) == (turn.act.kind == "recommend")
    return AgentReply(
        text=turn.text,
        machine_act=turn.act.kind,
        recommendations=recs,
        state_summary=_summary(runtime, session.state),
        order=order_doc,
        turn=session.machine_turns,
    )


def _machine_turn(runtime: AgentRuntime, session: Session):
    cands = has_candidates(session.state, runtime.catalog)
    key = abstract_state(session.state, runtime.schema, cands)
    legal = legal_actions(session.state, runtime.schema, cands)
    action = select_action(runtime.q, key, legal, GREEDY, rng=_NO_RNG)
    return realize_action(runtime, session.state, session.user_id, action)


class _NeverRandom:
    def random(self) -> float:  # greedy serving never explores
        raise AssertionError("serving policy must not draw randomness")

    def choice(self, seq):
        raise AssertionError("serving policy must not draw randomness")


_NO_RNG = _NeverRandom()


def _farewell_reply(runtime: AgentRuntime, session: Session, apologetic: bool = False) -> AgentReply:
    text = "sorry, something went wrong on my end." if apologetic else "alright, take care!"
    session.transcript.append(
        Utterance(speaker="machine", text=text, turn_index=len(session.transcript))
    )
    session.machine_turns += 1
    return AgentReply(
        text=text,
        machine_act="fallback",
        recommendations=[],
        state_summary=_summary(runtime, session.state),
        order=None,
        turn=session.machine_turns,
    )


def _summary(runtime: AgentRuntime, state: DialogueState) -> dict:
    from .state import missing_required

    return {
        "filled": {name: sv.value for name, sv in sorted(state.filled.items())},
        "missing_required": missing_required(state, runtime.schema),
        "order_placed": state.order_placed,
    }


def _apply_session_feedback(
    runtime: AgentRuntime, session: Session, outcome: str, hyper: Hyperparams
) -> None:
    state = session.state
    if outcome == "accept" and state.accepted_item:
        targets = [state.accepted_item]
    elif outcome == "reject":
        targets = [pid for pid in state.shown_items if pid in state.rejected_items]
        targets = targets[-1:]  # the item just turned down
    else:
        targets = []
    for pid in targets:
        runtime.factors = feedback_update(runtime.factors, session.user_id, pid, outcome, hyper)


class CreateSessionBody(BaseModel):
    user_id: str


class MessageBody(BaseModel):
    text: str


class FeedbackBody(BaseModel):
    product_id: str
    outcome: str  # "accept" | "reject"


class ReloadBody(BaseModel):
    bundle_path: str


@dataclass
class _Entry:
    session: Session
    lock: asyncio.Lock = field(default_factory=asyncio.Lock)
    queues: list[asyncio.Queue] = field(default_factory=list)


def create_app(
    runtime: AgentRuntime,
    log_dir: str | None = None,
    mf_hyper: Hyperparams | None = None,
    static_dir: str | None = None,
) -> FastAPI:
    app = FastAPI(title="convreco")
    sessions: dict[str, _Entry] = {}
    events = EventLog(log_dir)
    state = {"runtime": runtime, "hyper": mf_hyper or Hyperparams()}

    def entry_or_404(session_id: str) -> _Entry:
        entry = sessions.get(session_id)
        if entry is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return entry

    @app.exception_handler(SessionClosed)
    async def closed_handler(request: Request, exc: SessionClosed):
        return JSONResponse(
            status_code=409, content={"code": "conflict", "message": "session closed"}
        )

    @app.exception_handler(HTTPException)
    async def http_handler(request: Request, exc: HTTPException):
        return JSONResponse(
            status_code=exc.status_code,
            content={"code": str(exc.status_code), "message": exc.detail},
        )

    @app.post("/api/v1/sessions", status_code=201)
    async def create_session(body: CreateSessionBody):
        session_id = secrets.token_hex(16)
        session = Session(id=session_id, user_id=body.user_id)
        sessions[session_id] = _Entry(session=session)
        events.append(session_id, {"type": "created", "user_id": body.user_id})
        return {"session_id": session_id}

    @app.get("/api/v1/sessions/{session_id}")
    async def get_session(session_id: str):
        entry = entry_or_404(session_id)
        s = entry.session
        return {
            "session_id": s.id,
            "user_id": s.user_id,
            "closed": s.closed,
            "turn": s.machine_turns,
            "state": state_snapshot(s.state),
            "state_summary": _summary(state["runtime"], s.state),
            "transcript": [
                {"speaker": t.speaker, "text": t.text, "turn_index": t.turn_index}
                for t in s.transcript
            ],
        }

    @app.post("/api/v1/sessions/{session_id}/messages")
    async def post_message(session_id: str, body: MessageBody):
        entry = entry_or_404(session_id)
        async with entry.lock:
            reply = handle_message(
                state["runtime"], entry.session, body.text, events, state["hyper"]
            )
        doc = reply.to_dict()
        for queue in list(entry.queues):
            queue.put_nowait(doc)
        return doc

    @app.post("/api/v1/sessions/{session_id}/feedback")
    async def post_feedback(session_id: str, body: FeedbackBody):
        entry = entry_or_404(session_id)
        if body.outcome not in ("accept", "reject"):
            raise HTTPException(status_code=422, detail="outcome must be accept or reject")
        async with entry.lock:
            session = entry.session
            if session.closed:
                raise SessionClosed(session_id)
            if body.product_id not in session.state.shown_items:
                raise HTTPException(status_code=422, detail="product was not recommended")
            if body.outcome == "accept":
                session.state = replace(session.state, accepted_item=body.product_id)
            else:
                rejected = session.state.rejected_items | {body.product_id}
                accepted = session.state.accepted_item
                if accepted == body.product_id:
                    accepted = None
                session.state = replace(
                    session.state, rejected_items=rejected, accepted_item=accepted
                )
            rt = state["runtime"]
            rt.factors = feedback_update(
                rt.factors, session.user_id, body.product_id, body.outcome, state["hyper"]
            )
            events.append(
                session_id,
                {"type": "feedback", "product_id": body.product_id, "outcome": body.outcome},
            )
            return {"ok": True, "state": state_snapshot(session.state)}

    @app.get("/api/v1/sessions/{session_id}/stream")
    async def stream(session_id: str):
        entry = entry_or_404(session_id)
        queue: asyncio.Queue = asyncio.Queue()
        entry.queues.append(queue)

        async def frames():
            try:
                while True:
                    doc = await queue.get()
                    yield f"data: {json.dumps(doc, separators=(',', ':'))}\n\n"
            finally:
                entry.queues.remove(queue)

        return StreamingResponse(frames(), media_type="text/event-stream")

    @app.get("/api/v1/catalog")
    async def get_catalog():
        rt = state["runtime"]
        return {
            "products": [
                {"id": p.id, "name": p.name, "price": p.price, "attributes": p.attributes}
                for p in rt.catalog.products
            ]
        }

    @app.get("/api/v1/healthz")
    async def healthz():
        return {"status": "ok"}

    @app.post("/api/v1/reload")
    async def reload_bundle(body: ReloadBody):
        from .runtime import build_runtime_from_bundle

        try:
            new_runtime = build_runtime_from_bundle(
                body.bundle_path,
                schema_path=None,
                catalog_path=None,
            )
        except Exception as exc:
            raise HTTPException(status_code=400, detail=f"reload failed: {exc}") from exc
        state["runtime"] = new_runtime
        return {"ok": True}

    app.state.sessions = sessions
    app.state.events = events
    app.state.shared = state

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
