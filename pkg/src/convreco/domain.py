"""Shared vocabulary: slot schema types, utterances, orders, and seeded randomness.

Everything here is an immutable value object; the rest of the system passes
these around freely between concurrent sessions. The one stateful thing is
RandomSource, which is single-owner by convention.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from dataclasses import dataclass, field

USER_ACTS = ("inform", "request", "accept", "reject", "affirm", "deny", "greet", "bye", "chitchat")
MACHINE_ACTS = ("ask", "recommend", "confirm", "place_order", "greet", "fallback")

_WS_RE = re.compile(r"\s+")


def normalize_value(raw: str, synonyms: dict[str, str] | None = None) -> str:
    """Lowercase, trim, collapse interior whitespace, then apply the synonym map once.

    Idempotence over arbitrary inputs requires the synonym map to be canonical
    (no target is itself a key); load_synonyms enforces that.
    """
    out = _WS_RE.sub(" ", raw.strip().lower())
    if synonyms and out in synonyms:
        out = synonyms[out]
    return out


def load_synonyms(path: str) -> dict[str, str]:
    """Load a phrase->canonical-value JSON map and canonicalize it.

    Keys and values are normalized; chains (a->b, b->c) are resolved to their
    final target so single-application lookup is idempotent. Cycles are a
    config error.
    """
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    base = {normalize_value(k): normalize_value(v) for k, v in raw.items()}
    resolved: dict[str, str] = {}
    for key, target in base.items():
        seen = {key}
        while target in base:
            if target in seen:
                raise ValueError(f"synonym cycle involving {target!r}")
            seen.add(target)
            target = base[target]
        resolved[key] = target
    return resolved


@dataclass(frozen=True)
class SlotDef:
    name: str
    value_domain: str  # "enumerated" | "open_text"
    required: bool
    prompt_key: str = ""


@dataclass(frozen=True)
class SlotSchema:
    """Ordered slot definitions; file order is the canonical tie-break order."""

    slots: tuple[SlotDef, ...]
    patterns: dict[str, str] = field(default_factory=dict, hash=False)

    def slot(self, name: str) -> SlotDef:
        for s in self.slots:
            if s.name == name:
                return s
        raise KeyError(name)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.slots)

    @property
    def required_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.slots if s.required)

    def slot_order(self, name: str) -> int:
        return self.names.index(name)


def validate_schema(schema: SlotSchema) -> list[str]:
    """Return every invariant violation; an empty list means the schema is ok."""
    violations = []
    seen: set[str] = set()
    for s in schema.slots:
        if not s.name:
            violations.append("empty slot name")
        if s.name in seen:
            violations.append(f'duplicate name "{s.name}"')
        seen.add(s.name)
        if s.required and not s.prompt_key:
            violations.append(f'required slot "{s.name}" missing prompt_key')
        if s.value_domain not in ("enumerated", "open_text"):
            violations.append(f'slot "{s.name}" has unknown value_domain "{s.value_domain}"')
        if s.value_domain == "open_text" and s.name not in schema.patterns:
            violations.append(f'open_text slot "{s.name}" has no extraction pattern')
    return violations


def load_schema(path: str) -> SlotSchema:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    slots = tuple(
        SlotDef(
            name=entry["name"],
            value_domain=entry["value_domain"],
            required=bool(entry["required"]),
            prompt_key=entry.get("prompt_key", ""),
        )
        for entry in doc["slots"]
    )
    schema = SlotSchema(slots=slots, patterns=dict(doc.get("patterns", {})))
    violations = validate_schema(schema)
    if violations:
        raise ValueError("invalid schema: " + "; ".join(violations))
    return schema


def schema_fingerprint(schema: SlotSchema) -> str:
    doc = {
        "slots": [
            [s.name, s.value_domain, s.required, s.prompt_key] for s in schema.slots
        ],
        "patterns": dict(sorted(schema.patterns.items())),
    }
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class SlotValue:
    slot: str
    value: str
    confidence: float = 1.0
    source_turn: int = 0

    def pair(self) -> tuple[str, str]:
        return (self.slot, self.value)


@dataclass(frozen=True)
class DialogueAct:
    """A user or machine act. `slot` is set for ask, `items` for recommend,
    `order` for place_order."""

    kind: str
    slot: str | None = None
    items: tuple[str, ...] = ()
    order: "Order | None" = None

    def __post_init__(self):
        if self.kind == "ask" and not self.slot:
            raise ValueError("ask act requires exactly one slot")
        if self.kind == "recommend" and not self.items:
            raise ValueError("recommend act requires at least one item")
        if self.kind == "place_order" and self.order is None:
            raise ValueError("place_order act requires a complete order")


@dataclass(frozen=True)
class Utterance:
    speaker: str  # "user" | "machine"
    text: str
    turn_index: int


@dataclass(frozen=True)
class Order:
    user_id: str
    product_id: str
    slot_values: tuple[SlotValue, ...]

    def value_pairs(self) -> set[tuple[str, str]]:
        return {sv.pair() for sv in self.slot_values}


def validate_order(order: Order, schema: SlotSchema) -> list[str]:
    violations = []
    counts: dict[str, int] = {}
    for sv in order.slot_values:
        counts[sv.slot] = counts.get(sv.slot, 0) + 1
    for name in schema.required_names:
        n = counts.get(name, 0)
        if n != 1:
            violations.append(f'required slot "{name}" appears {n} times in order')
    return violations


@dataclass(frozen=True)
class Conversation:
    user_id: str
    turns: tuple[Utterance, ...]
    final_order: Order | None = None

    def user_turns(self) -> list[Utterance]:
        return [t for t in self.turns if t.speaker == "user"]


class RandomSource:
    """Deterministic PRNG stream (Mersenne Twister via random.Random).

    Identical seeds give identical draw sequences across runs and platforms;
    CPython documents MT19937 output stability for the methods used here.
    Single-owner: never share an instance between concurrent tasks.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self._rng = random.Random(seed)

    def random(self) -> float:
        return self._rng.random()

    def uniform(self, lo: float, hi: float) -> float:
        return self._rng.uniform(lo, hi)

    def randint(self, lo: int, hi: int) -> int:
        return self._rng.randint(lo, hi)

    def choice(self, seq):
        return seq[self._rng.randrange(len(seq))]

    def shuffle(self, seq: list) -> None:
        self._rng.shuffle(seq)


def derive_seed(seed: int, label: str) -> int:
    """Shard/stage seed derivation: sha256(seed || label) -> 63-bit int.

    Documented so parallel corpus shards and pipeline stages have auditable,
    independent streams."""
    blob = f"{seed}:{label}".encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big") >> 1
