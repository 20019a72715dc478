"""Next-machine-act selection learned by tabular Q-learning from the delayed
order reward.

The dialogue state is abstracted to a small key (required-slot mask, turn
and rejection buckets, candidate flag, last user act) so the table stays
exactly enumerable and testable against a value-iteration oracle. Machine
actions are the act kinds, with ask qualified per slot ("ask:food"); the
kind order in domain.MACHINE_ACTS plus canonical slot order break all ties.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .domain import MACHINE_ACTS, RandomSource, SlotSchema
from .state import DialogueState, can_place_order, missing_required

TURN_BUCKETS = ((0, 2), (3, 5), (6, 9))  # >=10 falls in bucket 3
REJECT_BUCKETS = ((0, 0), (1, 2))  # >=3 falls in bucket 2


@dataclass(frozen=True)
class StateKey:
    required_filled_mask: str  # one bit per required slot, canonical order
    turn_bucket: int
    reject_bucket: int
    candidate_flag: int
    last_user_act: str  # user act kind or "-"

    def encode(self) -> str:
        return "|".join(
            (
                self.required_filled_mask,
                str(self.turn_bucket),
                str(self.reject_bucket),
                str(self.candidate_flag),
                self.last_user_act,
            )
        )

    @staticmethod
    def decode(text: str) -> "StateKey":
        mask, turn_b, reject_b, cand, act = text.split("|")
        return StateKey(mask, int(turn_b), int(reject_b), int(cand), act)


@dataclass
class QTable:
    """Sparse (StateKey, action) -> value table; absent entries read as 0."""

    values: dict[tuple[str, str], float] = field(default_factory=dict)
    visit_counts: dict[tuple[str, str], int] = field(default_factory=dict)

    def get(self, key: StateKey, action: str) -> float:
        return self.values.get((key.encode(), action), 0.0)

    def best_value(self, key: StateKey, actions: list[str]) -> float:
        if not actions:
            return 0.0
        return max(self.get(key, a) for a in actions)


@dataclass(frozen=True)
class PolicyConfig:
    epsilon: float = 0.1  # 0.0 at evaluation
    alpha: float = 0.1
    gamma: float = 0.95
    reward_order: float = 1.0
    reward_turn: float = -0.02
    reward_illegal: float = -0.1
    max_turns: int = 20


def _bucket(value: int, buckets: tuple[tuple[int, int], ...]) -> int:
    for idx, (lo, hi) in enumerate(buckets):
        if lo <= value <= hi:
            return idx
    return len(buckets)


def abstract_state(state: DialogueState, schema: SlotSchema, has_candidates: bool) -> StateKey:
    mask = "".join("1" if name in state.filled else "0" for name in schema.required_names)
    return StateKey(
        required_filled_mask=mask,
        turn_bucket=_bucket(state.turn_count, TURN_BUCKETS),
        reject_bucket=_bucket(len(state.rejected_items), REJECT_BUCKETS),
        candidate_flag=1 if has_candidates else 0,
        last_user_act=state.last_user_act or "-",
    )


def legal_actions(state: DialogueState, schema: SlotSchema, has_candidates: bool) -> list[str]:
    """Legal machine actions in canonical order (MACHINE_ACTS order, then
    slot order for asks). fallback is always legal so the set is never
    empty; greet only opens a conversation."""
    acts: list[str] = []
    for kind in MACHINE_ACTS:
        if kind == "ask":
            acts.extend(f"ask:{name}" for name in missing_required(state, schema))
        elif kind == "recommend":
            if has_candidates:
                acts.append("recommend")
        elif kind == "confirm":
            if state.accepted_item is not None:
                acts.append("confirm")
        elif kind == "place_order":
            if can_place_order(state, schema):
                acts.append("place_order")
        elif kind == "greet":
            if state.turn_count == 0:
                acts.append("greet")
        else:  # fallback
            acts.append(kind)
    return acts


def select_action(
    q: QTable, key: StateKey, legal: list[str], cfg: PolicyConfig, rng: RandomSource
) -> str:
    """Epsilon-greedy over the legal actions; greedy ties break by the
    canonical action order (legal is already sorted that way)."""
    if not legal:
        raise ValueError("no legal actions")
    if cfg.epsilon > 0.0 and rng.random() < cfg.epsilon:
        return rng.choice(legal)
    best = legal[0]
    best_v = q.get(key, best)
    for action in legal[1:]:
        v = q.get(key, action)
        if v > best_v:
            best, best_v = action, v
    return best


def q_update(
    q: QTable,
    key: StateKey,
    action: str,
    reward: float,
    next_key: StateKey | None,
    next_legal: list[str],
    cfg: PolicyConfig,
) -> None:
    """One temporal-difference backup, in place. A terminal transition
    (next_key None) bootstraps zero."""
    k = (key.encode(), action)
    old = q.values.get(k, 0.0)
    bootstrap = 0.0 if next_key is None else cfg.gamma * q.best_value(next_key, next_legal)
    q.values[k] = old + cfg.alpha * (reward + bootstrap - old)
    q.visit_counts[k] = q.visit_counts.get(k, 0) + 1


def ask_slot(action: str) -> str | None:
    if action.startswith("ask:"):
        return action.split(":", 1)[1]
    return None


def action_kind(action: str) -> str:
    return "ask" if action.startswith("ask:") else action
