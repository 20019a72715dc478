"""The per-turn machine loop shared by policy training, evaluation, and live
serving: parse the user, update state, pick an act, realize it.

Also hosts train_policy / evaluate / random_baseline, which run this loop
against the simulator. The learner only ever sees what a deployed agent
would see: the user's words through its own NLU, and the delayed order
reward from the environment.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .catalog import Catalog, Gazetteer
from .domain import DialogueAct, Order, RandomSource, SlotSchema, derive_seed
from .nlg import TemplateLibrary, ask_templates, render, select_template
from .nlu import IntentModel, classify_act, extract_slots
from .policy import (
    PolicyConfig,
    QTable,
    abstract_state,
    ask_slot,
    legal_actions,
    select_action,
)
from .recommender import FactorModel, has_candidates, recommend
from .simulator import UserGoal, UserProfile, sample_goal, user_turn
from .state import DialogueState, apply_machine_act, update_state


@dataclass
class AgentRuntime:
    """Everything the machine side needs to take a turn."""

    schema: SlotSchema
    catalog: Catalog
    gazetteer: Gazetteer
    intent: IntentModel
    factors: FactorModel
    q: QTable
    templates: TemplateLibrary
    blend_alpha: float = 0.7
    recommend_n: int = 1

    @property
    def patterns(self) -> dict[str, str]:
        return self.schema.patterns


@dataclass(frozen=True)
class MachineTurn:
    action: str  # policy action, e.g. "ask:food"
    act: DialogueAct
    text: str
    template_id: str
    recommendations: tuple[tuple[str, float], ...] = ()
    order: Order | None = None


def realize_action(
    runtime: AgentRuntime, state: DialogueState, user_id: str, action: str
) -> MachineTurn:
    """Turn a policy action into a concrete act plus rendered text."""
    slot = ask_slot(action)
    recommendations: tuple[tuple[str, float], ...] = ()
    order: Order | None = None
    bindings: dict[str, str] = {}
    if slot is not None:
        act = DialogueAct(kind="ask", slot=slot)
        prompt_key = runtime.schema.slot(slot).prompt_key
        template = select_template("ask", ask_templates(runtime.templates.snapshot(), prompt_key))
    elif action == "recommend":
        ranked = recommend(
            runtime.factors,
            state,
            user_id,
            runtime.catalog,
            runtime.recommend_n,
            runtime.blend_alpha,
        )
        recommendations = tuple(ranked)
        act = DialogueAct(kind="recommend", items=tuple(pid for pid, _ in ranked))
        top = runtime.catalog.by_id(ranked[0][0])
        bindings = {"product_name": top.name, "price": f"${top.price:g}"}
        template = select_template("recommend", runtime.templates.snapshot())
    elif action == "confirm":
        assert state.accepted_item is not None
        product = runtime.catalog.by_id(state.accepted_item)
        act = DialogueAct(kind="confirm")
        bindings = {"product_name": product.name, "price": f"${product.price:g}"}
        template = select_template("confirm", runtime.templates.snapshot())
    elif action == "place_order":
        assert state.accepted_item is not None
        order = Order(
            user_id=user_id,
            product_id=state.accepted_item,
            slot_values=tuple(
                state.filled[name]
                for name in runtime.schema.required_names
                if name in state.filled
            ),
        )
        act = DialogueAct(kind="place_order", order=order)
        product = runtime.catalog.by_id(order.product_id)
        details = ", ".join(f"{sv.slot}={sv.value}" for sv in order.slot_values)
        bindings = {"order_summary": f"{product.name} (${product.price:g}; {details})"}
        template = select_template("place_order", runtime.templates.snapshot())
    else:
        act = DialogueAct(kind=action)
        template = select_template(action, runtime.templates.snapshot())
    return MachineTurn(
        action=action,
        act=act,
        text=render(template, bindings),
        template_id=template.id,
        recommendations=recommendations,
        order=order,
    )


def parse_user(runtime: AgentRuntime, text: str):
    slots = extract_slots(text, runtime.gazetteer, runtime.patterns)
    act, scores = classify_act(text, runtime.intent, slots)
    return act, slots, scores


@dataclass
class EpisodeResult:
    success: bool = False
    user_turns: int = 0
    reward: float = 0.0
    machine_turns: int = 0
    order: Order | None = None


def run_policy_episode(
    runtime: AgentRuntime,
    goal: UserGoal,
    profile: UserProfile,
    cfg: PolicyConfig,
    rng: RandomSource,
    user_id: str = "sim",
    learn: bool = False,
) -> EpisodeResult:
    """One simulated dialogue under the (epsilon-greedy) table policy.

    Per machine turn: select act, render, simulator replies, NLU parses,
    state updates; the TD backup runs on each transition when learning.
    Success means the placed order's product is actually acceptable to the
    hidden goal."""
    from .policy import q_update  # local alias keeps the hot loop tight

    state = DialogueState()
    result = EpisodeResult()
    used_templates: list[str] = []
    while True:
        cands = has_candidates(state, runtime.catalog)
        key = abstract_state(state, runtime.schema, cands)
        legal = legal_actions(state, runtime.schema, cands)
        action = select_action(runtime.q, key, legal, cfg, rng)
        turn = realize_action(runtime, state, user_id, action)
        used_templates.append(turn.template_id)
        result.machine_turns += 1
        reward = cfg.reward_turn
        if action == "place_order":
            assert turn.order is not None
            success = turn.order.product_id in goal.acceptable_products
            if success:
                reward += cfg.reward_order
            result.success = success
            result.order = turn.order
            result.reward += reward
            if learn:
                q_update(runtime.q, key, action, reward, None, [], cfg)
            break
        state = apply_machine_act(state, turn.act, runtime.schema)
        reply, ann = user_turn(goal, profile, turn.act, state, rng)
        parsed_act, parsed_slots, _ = parse_user(runtime, reply.text)
        state = update_state(state, DialogueAct(kind=parsed_act), parsed_slots)
        result.user_turns = state.turn_count
        result.reward += reward
        terminal = ann.true_act == "bye" or state.turn_count >= cfg.max_turns
        if learn:
            if terminal:
                q_update(runtime.q, key, action, reward, None, [], cfg)
            else:
                next_cands = has_candidates(state, runtime.catalog)
                next_key = abstract_state(state, runtime.schema, next_cands)
                next_legal = legal_actions(state, runtime.schema, next_cands)
                q_update(runtime.q, key, action, reward, next_key, next_legal, cfg)
        if terminal:
            break
    if learn:
        runtime.templates.credit(used_templates, result.success)
    return result


@dataclass
class CurvePoint:
    episode: int
    success_rate: float
    avg_turns: float
    avg_reward: float


def train_policy(
    runtime: AgentRuntime,
    profile: UserProfile,
    episodes: int,
    cfg: PolicyConfig,
    seed: int,
    optional_rate: float = 0.5,
    curve_every: int = 1000,
) -> tuple[QTable, list[CurvePoint]]:
    """Q-learning over full simulated dialogues; the only reward is the
    per-turn cost plus the terminal order. Emits a success-rate curve
    sampled every curve_every episodes (windowed)."""
    rng = RandomSource(seed)
    curve: list[CurvePoint] = []
    window: list[EpisodeResult] = []
    for ep in range(1, episodes + 1):
        goal = sample_goal(runtime.catalog, runtime.schema, rng, optional_rate=optional_rate)
        result = run_policy_episode(runtime, goal, profile, cfg, rng, learn=True)
        window.append(result)
        if ep % curve_every == 0:
            curve.append(
                CurvePoint(
                    episode=ep,
                    success_rate=sum(1 for r in window if r.success) / len(window),
                    avg_turns=sum(r.user_turns for r in window) / len(window),
                    avg_reward=sum(r.reward for r in window) / len(window),
                )
            )
            window = []
    return runtime.q, curve


def evaluate(
    runtime: AgentRuntime,
    profile: UserProfile,
    n: int,
    seed: int,
    optional_rate: float = 0.5,
    epsilon: float = 0.0,
    cfg: PolicyConfig | None = None,
) -> dict:
    """Greedy evaluation on fresh seeded goals; success requires the placed
    order to satisfy the hidden goal."""
    base = cfg or PolicyConfig()
    eval_cfg = replace(base, epsilon=epsilon)
    rng = RandomSource(seed)
    if n <= 0:
        return {"episodes": 0, "success_rate": 0.0, "avg_turns": 0.0, "avg_reward": 0.0}
    results = []
    for _ in range(n):
        goal = sample_goal(runtime.catalog, runtime.schema, rng, optional_rate=optional_rate)
        results.append(run_policy_episode(runtime, goal, profile, eval_cfg, rng, learn=False))
    return {
        "episodes": n,
        "success_rate": sum(1 for r in results if r.success) / n,
        "avg_turns": sum(r.user_turns for r in results) / n,
        "avg_reward": sum(r.reward for r in results) / n,
    }


def random_baseline(
    runtime: AgentRuntime,
    profile: UserProfile,
    n: int,
    seed: int,
    optional_rate: float = 0.5,
    cfg: PolicyConfig | None = None,
) -> dict:
    """Uniform-random legal actions: the floor any learned policy must beat."""
    scratch = replace(runtime, q=QTable())
    return evaluate(
        scratch, profile, n, derive_seed(seed, "baseline"), optional_rate, epsilon=1.0, cfg=cfg
    )
