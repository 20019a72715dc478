"""Dialogue memory: filled slots, recommendation history, order progress.

States are immutable values; every update returns a new state so sessions
can be replayed and audited. turn_count counts user turns.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .domain import DialogueAct, SlotSchema, SlotValue


class ConversationClosed(RuntimeError):
    pass


class OrderIncomplete(RuntimeError):
    pass


@dataclass(frozen=True)
class DialogueState:
    filled: dict[str, SlotValue] = field(default_factory=dict, hash=False)
    shown_items: tuple[str, ...] = ()
    rejected_items: frozenset[str] = frozenset()
    accepted_item: str | None = None
    turn_count: int = 0
    last_user_act: str | None = None
    last_machine_act: str | None = None
    order_placed: bool = False

    def check_invariants(self) -> None:
        assert self.rejected_items <= set(self.shown_items)
        if self.accepted_item is not None:
            assert self.accepted_item in self.shown_items
        if self.order_placed:
            assert self.accepted_item is not None


def update_state(state: DialogueState, act: DialogueAct, slots: list[SlotValue]) -> DialogueState:
    """Fold a user act into the state. inform merges slots latest-wins;
    reject writes off everything shown so far; accept picks the most
    recently shown non-rejected item."""
    if state.order_placed:
        raise ConversationClosed("conversation closed")
    new = replace(state, turn_count=state.turn_count + 1, last_user_act=act.kind)
    if act.kind == "inform" and slots:
        filled = dict(state.filled)
        for sv in slots:
            filled[sv.slot] = sv
        new = replace(new, filled=filled)
    elif act.kind == "reject":
        new = replace(new, rejected_items=frozenset(state.shown_items), accepted_item=None)
    elif act.kind == "accept":
        for item in reversed(state.shown_items):
            if item not in state.rejected_items:
                new = replace(new, accepted_item=item)
                break
    return new


def apply_machine_act(
    state: DialogueState, act: DialogueAct, schema: SlotSchema | None = None
) -> DialogueState:
    """Record a machine act. recommend extends shown_items; place_order
    closes the conversation once an item is accepted and (when the schema is
    supplied) the required slots are filled."""
    new = replace(state, last_machine_act=act.kind)
    if act.kind == "recommend":
        shown = list(state.shown_items)
        for item in act.items:
            if item not in shown:
                shown.append(item)
        new = replace(new, shown_items=tuple(shown))
    elif act.kind == "place_order":
        if schema is not None:
            require_placeable(state, schema)
        elif state.accepted_item is None:
            raise OrderIncomplete("order incomplete: no accepted item")
        new = replace(new, order_placed=True)
    return new


def missing_required(state: DialogueState, schema: SlotSchema) -> list[str]:
    """Required slots still unfilled, in canonical schema order."""
    return [name for name in schema.required_names if name not in state.filled]


def can_place_order(state: DialogueState, schema: SlotSchema) -> bool:
    return state.accepted_item is not None and not missing_required(state, schema)


def require_placeable(state: DialogueState, schema: SlotSchema) -> None:
    if state.accepted_item is None:
        raise OrderIncomplete("order incomplete: no accepted item")
    missing = missing_required(state, schema)
    if missing:
        raise OrderIncomplete(f"order incomplete: missing required slots {missing}")


def state_snapshot(state: DialogueState) -> dict:
    """JSON-ready snapshot used by session logs and the UI state panel."""
    return {
        "filled": {name: sv.value for name, sv in sorted(state.filled.items())},
        "shown_items": list(state.shown_items),
        "rejected_items": sorted(state.rejected_items),
        "accepted_item": state.accepted_item,
        "turn_count": state.turn_count,
        "last_user_act": state.last_user_act,
        "last_machine_act": state.last_machine_act,
        "order_placed": state.order_placed,
    }
