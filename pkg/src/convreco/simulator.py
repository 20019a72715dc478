"""Goal-driven user simulation.

Stands in for production chat logs: generates unlabeled conversations that
end in purchase orders (or don't), and acts as the environment for policy
training and evaluation. Every generated user turn carries a hidden
annotation (true act + true slots) written to a sidecar that only
evaluation code may read.

Corpus generation uses a scripted teacher playing the human agent: greet,
ask each missing required slot in canonical order, recommend
constraint-filtered products one at a time in catalog order, place the
order on accept. The teacher tracks state from the true annotations
(human agents understood their users); the learned pipeline only ever sees
the text.
"""

from __future__ import annotations

import json

from dataclasses import dataclass, field

from .catalog import Catalog, filter_products
from .domain import (
    Conversation,
    DialogueAct,
    Order,
    RandomSource,
    SlotSchema,
    SlotValue,
    Utterance,
)
from .nlg import TemplateLibrary, ask_templates, render, select_template
from .state import DialogueState, apply_machine_act, missing_required, update_state

# User-side surface pools. Slot values are always mentioned verbatim so the
# terminal order stays aligned with the words that led to it; that is what
# makes distant supervision learnable.
GREET_FORMS = ("hi", "hello there", "hey there", "good evening")
OPENING_INFORM_FORMS = (
    "hi, i'm looking for {v}",
    "hello, i want {v} today",
    "hey, craving {v} right now",
)
INFORM_FORMS = (
    "i'd like {v}",
    "{v} please",
    "{v} sounds good",
    "let's do {v}",
    "{v} would be great",
    "maybe {v}",
)
INFORM_EXTRA_FORMS = (
    "{v} please, and {v2} would be nice",
    "i'd like {v}, ideally {v2}",
    "let's do {v} and {v2}",
)
CHITCHAT_FORMS = ("hmm let me think", "one moment", "not sure yet", "give me a sec")
ACCEPT_FORMS = (
    "perfect, i'll take that one",
    "sounds great, i'll take it",
    "that works for me, order it",
    "great, let's order that",
)
REJECT_FORMS = (
    "not really my thing, anything else",
    "i don't love that, something else maybe",
    "could you show me something different",
    "not that one",
)
AFFIRM_FORMS = ("yes", "yep", "sure")
DENY_FORMS = ("no", "nope")
BYE_FORMS = ("bye", "goodbye", "thanks, bye", "bye for now")
DISTRACTOR_WORDS = ("thanks", "please", "if you can", "sometime soon")
DISTRACTOR_RATE = 0.1


@dataclass(frozen=True)
class UserGoal:
    target_constraints: tuple[SlotValue, ...]
    acceptable_products: frozenset[str]

    def value_for(self, slot: str) -> str | None:
        for sv in self.target_constraints:
            if sv.slot == slot:
                return sv.value
        return None


@dataclass(frozen=True)
class UserProfile:
    patience: int = 12  # max user turns before quitting
    cooperativeness: float = 0.9  # probability of answering an asked slot
    verbosity: float = 0.3  # probability of volunteering one extra slot


@dataclass(frozen=True)
class HiddenAnnotation:
    true_act: str
    true_slots: tuple[SlotValue, ...] = ()


@dataclass
class AnnotatedConversation:
    """A conversation plus the per-user-turn hidden truth. The two parts are
    written to separate files; training entry points only accept the
    Conversation side."""

    conversation: Conversation
    annotations: dict[int, HiddenAnnotation] = field(default_factory=dict)  # turn_index -> truth


def sample_goal(
    catalog: Catalog,
    schema: SlotSchema,
    rng: RandomSource,
    optional_rate: float = 0.5,
) -> UserGoal:
    """Draw a satisfiable goal: one value per required slot (uniform over
    values realized in the catalog), plus each optional enumerated slot with
    probability optional_rate. Resampled until at least one product
    satisfies everything."""
    if not catalog.products:
        raise ValueError("catalog too sparse: no products")
    required = schema.required_names
    optional = [
        s.name for s in schema.slots if not s.required and s.value_domain == "enumerated"
    ]
    for _ in range(1000):
        constraints = []
        for name in required:
            values = catalog.values_for(name)
            if not values:
                raise ValueError(f"catalog too sparse: no values for required slot {name}")
            constraints.append(SlotValue(slot=name, value=rng.choice(values)))
        for name in optional:
            if rng.random() < optional_rate:
                values = catalog.values_for(name)
                if values:
                    constraints.append(SlotValue(slot=name, value=rng.choice(values)))
        matches = filter_products(catalog, constraints)
        if matches:
            return UserGoal(
                target_constraints=tuple(constraints),
                acceptable_products=frozenset(p.id for p in matches),
            )
    raise ValueError("catalog too sparse: no satisfiable goal after 1000 draws")


def _inform_utterance(
    goal: UserGoal,
    slot: str,
    history: DialogueState,
    profile: UserProfile,
    rng: RandomSource,
    forms: tuple[str, ...] = INFORM_FORMS,
) -> tuple[str, tuple[SlotValue, ...]]:
    value = goal.value_for(slot)
    assert value is not None
    slots = [SlotValue(slot=slot, value=value, source_turn=history.turn_count)]
    extra_candidates = [
        sv
        for sv in goal.target_constraints
        if sv.slot != slot and sv.slot not in history.filled
    ]
    text = None
    if extra_candidates and rng.random() < profile.verbosity:
        extra = rng.choice(extra_candidates)
        slots.append(SlotValue(slot=extra.slot, value=extra.value, source_turn=history.turn_count))
        text = rng.choice(INFORM_EXTRA_FORMS).format(v=value, v2=extra.value)
    else:
        text = rng.choice(forms).format(v=value)
    if rng.random() < DISTRACTOR_RATE:
        text = f"{text}, {rng.choice(DISTRACTOR_WORDS)}"
    return text, tuple(slots)


def user_turn(
    goal: UserGoal,
    profile: UserProfile,
    machine_act: DialogueAct,
    history: DialogueState,
    rng: RandomSource,
) -> tuple[Utterance, HiddenAnnotation]:
    """One simulated user reply to the machine's act, with its hidden truth.

    The reply depends on the goal: asked slots are answered (with probability
    cooperativeness), recommended items are accepted iff acceptable, confirm
    gets affirm/deny against the accepted item, and patience runs out into a
    bye."""
    turn_index = 2 * history.turn_count + 1
    if machine_act.kind == "place_order":
        text, ann = rng.choice(BYE_FORMS), HiddenAnnotation("bye")
    elif history.turn_count >= profile.patience:
        text, ann = rng.choice(BYE_FORMS), HiddenAnnotation("bye")
    elif machine_act.kind == "ask":
        assert machine_act.slot is not None
        if goal.value_for(machine_act.slot) is not None and rng.random() < profile.cooperativeness:
            text, slots = _inform_utterance(goal, machine_act.slot, history, profile, rng)
            ann = HiddenAnnotation("inform", slots)
        else:
            text, ann = rng.choice(CHITCHAT_FORMS), HiddenAnnotation("chitchat")
    elif machine_act.kind == "recommend":
        accepted = next((i for i in machine_act.items if i in goal.acceptable_products), None)
        if accepted is not None:
            text, ann = rng.choice(ACCEPT_FORMS), HiddenAnnotation("accept")
        else:
            text, ann = rng.choice(REJECT_FORMS), HiddenAnnotation("reject")
    elif machine_act.kind == "confirm":
        ok = history.accepted_item is not None and history.accepted_item in goal.acceptable_products
        if ok:
            text, ann = rng.choice(AFFIRM_FORMS), HiddenAnnotation("affirm")
        else:
            text, ann = rng.choice(DENY_FORMS), HiddenAnnotation("deny")
    elif machine_act.kind == "greet":
        informable = [sv for sv in goal.target_constraints if sv.slot not in history.filled]
        if informable and rng.random() < profile.verbosity:
            opening = rng.choice(informable)
            text, slots = _inform_utterance(
                goal, opening.slot, history, profile, rng, forms=OPENING_INFORM_FORMS
            )
            ann = HiddenAnnotation("inform", slots)
        else:
            text, ann = rng.choice(GREET_FORMS), HiddenAnnotation("greet")
    else:  # fallback or anything unexpected: the user just mumbles
        text, ann = rng.choice(CHITCHAT_FORMS), HiddenAnnotation("chitchat")
    return Utterance(speaker="user", text=text, turn_index=turn_index), ann


def _teacher_action(
    state: DialogueState, catalog: Catalog, schema: SlotSchema
) -> DialogueAct | None:
    """Scripted human-agent policy for corpus generation."""
    if state.turn_count == 0 and state.last_machine_act is None:
        return DialogueAct(kind="greet")
    if state.accepted_item is not None:
        order = Order(
            user_id="",  # filled by the episode driver
            product_id=state.accepted_item,
            slot_values=tuple(
                state.filled[name] for name in schema.required_names if name in state.filled
            ),
        )
        return DialogueAct(kind="place_order", order=order)
    missing = missing_required(state, schema)
    if missing:
        return DialogueAct(kind="ask", slot=missing[0])
    # the teacher only filters on the order metadata and walks catalog
    # order; it never exploits volunteered extras the way the learned
    # recommender does
    required = set(schema.required_names)
    constraints = [sv for name, sv in state.filled.items() if name in required]
    excluded = set(state.shown_items) | state.rejected_items
    for product in filter_products(catalog, constraints):
        if product.id not in excluded:
            return DialogueAct(kind="recommend", items=(product.id,))
    return None  # nothing left to show


def _render_machine(
    act: DialogueAct,
    catalog: Catalog,
    schema: SlotSchema,
    library: TemplateLibrary,
    state: DialogueState,
) -> tuple[str, str]:
    """Render a machine act; returns (text, template id)."""
    snapshot = library.snapshot()
    if act.kind == "ask":
        prompt_key = schema.slot(act.slot).prompt_key
        template = select_template("ask", ask_templates(snapshot, prompt_key))
    else:
        template = select_template(act.kind, snapshot)
    bindings: dict[str, str] = {}
    if act.kind == "recommend":
        product = catalog.by_id(act.items[0])
        bindings = {"product_name": product.name, "price": f"${product.price:g}"}
    elif act.kind == "confirm":
        assert state.accepted_item is not None
        product = catalog.by_id(state.accepted_item)
        bindings = {"product_name": product.name, "price": f"${product.price:g}"}
    elif act.kind == "place_order":
        assert act.order is not None
        product = catalog.by_id(act.order.product_id)
        details = ", ".join(f"{sv.slot}={sv.value}" for sv in act.order.slot_values)
        bindings = {"order_summary": f"{product.name} (${product.price:g}; {details})"}
    return render(template, bindings), template.id


def run_teacher_episode(
    user_id: str,
    goal: UserGoal,
    profile: UserProfile,
    catalog: Catalog,
    schema: SlotSchema,
    library: TemplateLibrary,
    rng: RandomSource,
    max_turns: int = 20,
) -> AnnotatedConversation:
    """One scripted-teacher conversation with hidden annotations."""
    state = DialogueState()
    turns: list[Utterance] = []
    annotations: dict[int, HiddenAnnotation] = {}
    used_templates: list[str] = []
    final_order: Order | None = None
    while state.turn_count < max_turns:
        act = _teacher_action(state, catalog, schema)
        if act is None:
            act = DialogueAct(kind="fallback")
        if act.kind == "place_order":
            act = DialogueAct(
                kind="place_order",
                order=Order(
                    user_id=user_id,
                    product_id=act.order.product_id,
                    slot_values=act.order.slot_values,
                ),
            )
        text, template_id = _render_machine(act, catalog, schema, library, state)
        used_templates.append(template_id)
        turns.append(Utterance(speaker="machine", text=text, turn_index=len(turns)))
        reply, ann = user_turn(goal, profile, act, state, rng)
        reply = Utterance(speaker="user", text=reply.text, turn_index=len(turns))
        turns.append(reply)
        annotations[reply.turn_index] = ann
        if act.kind == "place_order":
            final_order = act.order
            break
        state = apply_machine_act(state, act, schema)
        if ann.true_act == "bye":
            break
        state = update_state(state, DialogueAct(kind=ann.true_act), list(ann.true_slots))
    library.credit(used_templates, final_order is not None)
    return AnnotatedConversation(
        conversation=Conversation(user_id=user_id, turns=tuple(turns), final_order=final_order),
        annotations=annotations,
    )


def generate_corpus(
    n: int,
    catalog: Catalog,
    schema: SlotSchema,
    profile: UserProfile,
    rng: RandomSource,
    library: TemplateLibrary,
    user_pool: int | None = None,
    optional_rate: float = 0.5,
    max_turns: int = 20,
) -> list[AnnotatedConversation]:
    """Generate n teacher-led conversations. Deterministic per seed; the
    hidden annotations ride in a sidecar structure, never inside the
    Conversation."""
    pool = user_pool if user_pool is not None else max(1, n // 5)
    users = [f"u{i:04d}" for i in range(pool)]
    out = []
    for _ in range(n):
        user_id = rng.choice(users)
        goal = sample_goal(catalog, schema, rng, optional_rate=optional_rate)
        out.append(
            run_teacher_episode(
                user_id, goal, profile, catalog, schema, library, rng, max_turns=max_turns
            )
        )
    return out


def write_corpus(
    corpus: list[AnnotatedConversation], corpus_path: str, sidecar_path: str | None = None
) -> None:
    """Write the corpus as JSON-lines, one conversation per line, and the
    hidden annotations to a separate sidecar file train subcommands never
    touch."""
    with open(corpus_path, "w", encoding="utf-8") as fh:
        for ac in corpus:
            conv = ac.conversation
            doc = {
                "user_id": conv.user_id,
                "turns": [
                    {"speaker": t.speaker, "text": t.text, "turn_index": t.turn_index}
                    for t in conv.turns
                ],
                "final_order": None
                if conv.final_order is None
                else {
                    "user_id": conv.final_order.user_id,
                    "product_id": conv.final_order.product_id,
                    "slot_values": [
                        {
                            "slot": sv.slot,
                            "value": sv.value,
                            "confidence": sv.confidence,
                            "source_turn": sv.source_turn,
                        }
                        for sv in conv.final_order.slot_values
                    ],
                },
            }
            fh.write(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")
    if sidecar_path:
        with open(sidecar_path, "w", encoding="utf-8") as fh:
            for ac in corpus:
                doc = {
                    str(idx): {
                        "true_act": ann.true_act,
                        "true_slots": [
                            {
                                "slot": sv.slot,
                                "value": sv.value,
                                "confidence": sv.confidence,
                                "source_turn": sv.source_turn,
                            }
                            for sv in ann.true_slots
                        ],
                    }
                    for idx, ann in sorted(ac.annotations.items())
                }
                fh.write(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")


def read_corpus(path: str) -> list[Conversation]:
    """Load conversations only; this is the one corpus reader training code
    is allowed to call."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            doc = json.loads(line)
            order = None
            if doc.get("final_order"):
                fo = doc["final_order"]
                order = Order(
                    user_id=fo["user_id"],
                    product_id=fo["product_id"],
                    slot_values=tuple(
                        SlotValue(
                            slot=sv["slot"],
                            value=sv["value"],
                            confidence=sv.get("confidence", 1.0),
                            source_turn=sv.get("source_turn", 0),
                        )
                        for sv in fo["slot_values"]
                    ),
                )
            out.append(
                Conversation(
                    user_id=doc["user_id"],
                    turns=tuple(
                        Utterance(
                            speaker=t["speaker"], text=t["text"], turn_index=t["turn_index"]
                        )
                        for t in doc["turns"]
                    ),
                    final_order=order,
                )
            )
    return out


def read_sidecar(path: str) -> list[dict[int, HiddenAnnotation]]:
    """Load the hidden annotations; evaluation-only."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            doc = json.loads(line)
            out.append(
                {
                    int(idx): HiddenAnnotation(
                        true_act=entry["true_act"],
                        true_slots=tuple(
                            SlotValue(
                                slot=sv["slot"],
                                value=sv["value"],
                                confidence=sv.get("confidence", 1.0),
                                source_turn=sv.get("source_turn", 0),
                            )
                            for sv in entry["true_slots"]
                        ),
                    )
                    for idx, entry in doc.items()
                }
            )
    return out


def corpus_stats(corpus: list[AnnotatedConversation]) -> dict:
    total = len(corpus)
    ordered = sum(1 for ac in corpus if ac.conversation.final_order is not None)
    user_turns = sum(len(ac.conversation.user_turns()) for ac in corpus)
    return {
        "conversations": total,
        "with_order": ordered,
        "completion_fraction": (ordered / total) if total else 0.0,
        "user_turns": user_turns,
    }
