import pytest
from hypothesis import given, strategies as st

from convreco.domain import DialogueAct, Order, SlotValue
from convreco.state import (
    ConversationClosed,
    DialogueState,
    OrderIncomplete,
    apply_machine_act,
    can_place_order,
    missing_required,
    state_snapshot,
    update_state,
)


def sv(slot, value):
    return SlotValue(slot=slot, value=value)


def inform(*pairs):
    return DialogueAct(kind="inform"), [sv(s, v) for s, v in pairs]


def test_inform_merges_slots_paper_state():
    state = DialogueState()
    state = update_state(state, *inform(("food", "japanese")))
    state = update_state(state, *inform(("location", "95070")))
    assert {k: v.value for k, v in state.filled.items()} == {
        "food": "japanese",
        "location": "95070",
    }
    assert state.turn_count == 2


def test_inform_latest_wins():
    state = update_state(DialogueState(), *inform(("food", "japanese")))
    state = update_state(state, *inform(("food", "italian")))
    assert state.filled["food"].value == "italian"


def test_reject_marks_all_shown():
    state = apply_machine_act(DialogueState(), DialogueAct(kind="recommend", items=("p1", "p2")))
    state = update_state(state, DialogueAct(kind="reject"), [])
    assert state.rejected_items == {"p1", "p2"}


def test_accept_picks_most_recent_non_rejected():
    state = apply_machine_act(DialogueState(), DialogueAct(kind="recommend", items=("p1",)))
    state = update_state(state, DialogueAct(kind="reject"), [])
    state = apply_machine_act(state, DialogueAct(kind="recommend", items=("p2", "p3")))
    state = update_state(state, DialogueAct(kind="accept"), [])
    assert state.accepted_item == "p3"


def test_accept_with_nothing_shown_is_noop():
    state = update_state(DialogueState(), DialogueAct(kind="accept"), [])
    assert state.accepted_item is None
    assert state.last_user_act == "accept"


def test_update_after_close_errors(schema):
    order = Order("u", "p1", (sv("food", "japanese"),))
    state = apply_machine_act(DialogueState(), DialogueAct(kind="recommend", items=("p1",)))
    state = update_state(state, DialogueAct(kind="accept"), [])
    state = apply_machine_act(state, DialogueAct(kind="place_order", order=order))
    with pytest.raises(ConversationClosed, match="conversation closed"):
        update_state(state, DialogueAct(kind="inform"), [sv("food", "thai")])


def test_recommend_appends_shown():
    state = apply_machine_act(DialogueState(), DialogueAct(kind="recommend", items=("p1", "p2")))
    assert state.shown_items == ("p1", "p2")
    state = apply_machine_act(state, DialogueAct(kind="recommend", items=("p3",)))
    assert state.shown_items == ("p1", "p2", "p3")


def test_place_order_requires_accept_and_slots(schema):
    order = Order("u", "p1", (sv("food", "japanese"),))
    with pytest.raises(OrderIncomplete):
        apply_machine_act(DialogueState(), DialogueAct(kind="place_order", order=order), schema)
    state = apply_machine_act(DialogueState(), DialogueAct(kind="recommend", items=("p1",)))
    state = update_state(state, DialogueAct(kind="accept"), [])
    with pytest.raises(OrderIncomplete, match="missing required"):
        apply_machine_act(state, DialogueAct(kind="place_order", order=order), schema)
    for name in schema.required_names:
        state = update_state(state, *inform((name, "x")))
    placed = apply_machine_act(state, DialogueAct(kind="place_order", order=order), schema)
    assert placed.order_placed


def test_missing_required_in_schema_order(schema):
    state = DialogueState()
    assert missing_required(state, schema) == list(schema.required_names)
    state = update_state(state, *inform(("food", "thai")))
    assert missing_required(state, schema) == ["location", "price_range"]
    for name in ("location", "price_range"):
        state = update_state(state, *inform((name, "x")))
    assert missing_required(state, schema) == []


def test_missing_required_empty_iff_placeable(schema):
    state = apply_machine_act(DialogueState(), DialogueAct(kind="recommend", items=("p1",)))
    state = update_state(state, DialogueAct(kind="accept"), [])
    assert not can_place_order(state, schema)
    for name in schema.required_names:
        state = update_state(state, *inform((name, "x")))
    assert missing_required(state, schema) == []
    assert can_place_order(state, schema)


def test_inform_idempotent_apart_from_turn_count():
    once = update_state(DialogueState(), *inform(("food", "thai")))
    twice = update_state(once, *inform(("food", "thai")))
    assert twice.filled == once.filled
    assert twice.turn_count == once.turn_count + 1


def test_snapshot_shape(schema):
    state = update_state(DialogueState(), *inform(("food", "thai")))
    snap = state_snapshot(state)
    assert snap["filled"] == {"food": "thai"}
    assert snap["turn_count"] == 1
    assert snap["order_placed"] is False


_user_acts = st.sampled_from(["inform", "reject", "accept", "greet", "chitchat", "affirm"])


@st.composite
def _action_sequences(draw):
    steps = draw(st.lists(st.integers(0, 5), min_size=1, max_size=25))
    return steps


@given(_action_sequences())
def test_invariants_hold_over_random_sequences(steps):
    state = DialogueState()
    shown_counter = 0
    for step in steps:
        if state.order_placed:
            break
        if step == 0:
            shown_counter += 1
            state = apply_machine_act(
                state, DialogueAct(kind="recommend", items=(f"p{shown_counter}",))
            )
        elif step == 1:
            state = update_state(state, DialogueAct(kind="reject"), [])
        elif step == 2:
            state = update_state(state, DialogueAct(kind="accept"), [])
        elif step == 3:
            state = update_state(state, *inform(("food", "thai")))
        elif step == 4:
            state = update_state(state, DialogueAct(kind="chitchat"), [])
        else:
            if state.accepted_item is not None:
                state = apply_machine_act(
                    state,
                    DialogueAct(
                        kind="place_order",
                        order=Order("u", state.accepted_item, (sv("food", "thai"),)),
                    ),
                )
        assert state.rejected_items <= set(state.shown_items)
        if state.accepted_item is not None:
            assert state.accepted_item in state.shown_items
        if state.order_placed:
            assert state.accepted_item is not None
