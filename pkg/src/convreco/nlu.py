"""Language understanding trained without hand labels.

Slot values are extracted with the catalog-derived gazetteer plus per-slot
patterns for open-text slots. The act classifier is a multinomial naive
Bayes whose training labels come entirely from aligning utterances with the
purchase order that terminated the conversation (distant supervision); a
small cue lexicon and a slots-imply-inform rule override it.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field

from .catalog import Gazetteer
from .domain import USER_ACTS, Conversation, SlotValue, Utterance, normalize_value

log = logging.getLogger(__name__)

# Exact-match cue lexicon applied before the statistical classifier.
CUE_LEXICON = {
    "bye": "bye",
    "goodbye": "bye",
    "bye bye": "bye",
    "see you": "bye",
    "yes": "affirm",
    "yeah": "affirm",
    "yep": "affirm",
    "sure": "affirm",
    "ok": "affirm",
    "okay": "affirm",
    "no": "deny",
    "nope": "deny",
    "no thanks": "deny",
}

_INTERROGATIVE_STARTS = frozenset(
    "what which who where when how why do does did can could would will is are".split()
)
_PUNCT_STRIP = ".,!?;:'\"()"

# Machine recommend turns quote a price; this marker is how transcript
# reconstruction recognizes them without reading any annotations.
PRICE_MARKER_RE = re.compile(r"\$\d")


def _tokens(normalized: str) -> list[str]:
    return normalized.split()


def _match_tokens(normalized: str) -> list[str]:
    """Tokens with edge punctuation stripped, used for gazetteer matching only."""
    return [t.strip(_PUNCT_STRIP) for t in normalized.split()]


def extract_slots(
    text: str, gazetteer: Gazetteer, patterns: dict[str, str] | None = None
) -> list[SlotValue]:
    """Scan normalized text left to right, longest gazetteer phrase first,
    then apply open-slot patterns to the unconsumed spans.

    At most one value per slot; the first match wins. Confidence is 1.0 for
    exact matches.
    """
    normalized = normalize_value(text)
    if not normalized:
        return []
    toks = _match_tokens(normalized)
    n = len(toks)
    found: dict[str, SlotValue] = {}
    consumed = [False] * n
    i = 0
    while i < n:
        matched = 0
        for length in range(min(gazetteer.max_phrase_words, n - i), 0, -1):
            phrase = " ".join(toks[i : i + length])
            hit = gazetteer.entries.get(phrase)
            if hit is not None:
                slot, value = hit
                if slot not in found:
                    found[slot] = SlotValue(slot=slot, value=value, confidence=1.0)
                for j in range(i, i + length):
                    consumed[j] = True
                matched = length
                break
        i += matched if matched else 1
    if patterns:
        spans: list[str] = []
        current: list[str] = []
        for tok, used in zip(toks, consumed):
            if used:
                if current:
                    spans.append(" ".join(current))
                    current = []
            else:
                current.append(tok)
        if current:
            spans.append(" ".join(current))
        for slot, pattern in patterns.items():
            if slot in found:
                continue
            rx = re.compile(pattern)
            for span in spans:
                m = rx.search(span)
                if m:
                    found[slot] = SlotValue(slot=slot, value=normalize_value(m.group(0)), confidence=1.0)
                    break
    return list(found.values())


@dataclass(frozen=True)
class IntentModel:
    """Multinomial naive Bayes over whitespace tokens, add-one smoothing.

    Counts are stored (not probabilities) so serialization round-trips
    exactly; log-probabilities are derived on demand.
    """

    class_counts: dict[str, int] = field(hash=False)
    token_counts: dict[str, dict[str, int]] = field(hash=False)
    vocabulary: frozenset[str] = frozenset()

    def _tables(self):
        """Lazily derived log-probability tables (the model itself stores counts)."""
        cached = getattr(self, "_cache", None)
        if cached is None:
            total = sum(self.class_counts.get(a, 0) for a in USER_ACTS)
            priors = {
                a: math.log((self.class_counts.get(a, 0) + 1) / (total + len(USER_ACTS)))
                for a in USER_ACTS
            }
            token_lp: dict[str, dict[str, float]] = {}
            unknown_lp: dict[str, float] = {}
            for act in USER_ACTS:
                counts = self.token_counts.get(act, {})
                # vocabulary plus one shared unknown bucket
                denom = sum(counts.values()) + len(self.vocabulary) + 1
                unknown_lp[act] = math.log(1.0 / denom)
                token_lp[act] = {
                    tok: math.log((counts.get(tok, 0) + 1) / denom) for tok in self.vocabulary
                }
            cached = (priors, token_lp, unknown_lp)
            object.__setattr__(self, "_cache", cached)
        return cached

    def log_prior(self, act: str) -> float:
        return self._tables()[0][act]

    def log_likelihood(self, act: str, token: str) -> float:
        priors, token_lp, unknown_lp = self._tables()
        return token_lp[act].get(token, unknown_lp[act])

    def score(self, normalized_text: str) -> dict[str, float]:
        toks = _tokens(normalized_text)
        priors, token_lp, unknown_lp = self._tables()
        scores = {}
        for act in USER_ACTS:
            s = priors[act]
            lp = token_lp[act]
            unk = unknown_lp[act]
            for tok in toks:
                s += lp.get(tok, unk)
            scores[act] = s
        return scores


def _has_interrogative_cue(normalized: str) -> bool:
    if "?" in normalized:
        return True
    toks = _tokens(normalized)
    return bool(toks) and toks[0] in _INTERROGATIVE_STARTS


def classify_act(
    text: str, model: IntentModel, extracted: list[SlotValue]
) -> tuple[str, dict[str, float]]:
    """Return (act, score map). Override rules run before the classifier:
    cue-lexicon exact matches, then slots-without-a-question imply inform.
    Ties break in USER_ACTS order."""
    normalized = normalize_value(text)
    if not normalized:
        return "chitchat", {act: 1.0 / len(USER_ACTS) for act in USER_ACTS}
    cue = CUE_LEXICON.get(normalized.strip(_PUNCT_STRIP))
    if cue is not None:
        return cue, {act: (1.0 if act == cue else 0.0) for act in USER_ACTS}
    if extracted and not _has_interrogative_cue(normalized):
        return "inform", {act: (1.0 if act == "inform" else 0.0) for act in USER_ACTS}
    scores = model.score(normalized)
    best = USER_ACTS[0]
    for act in USER_ACTS:
        if scores[act] > scores[best]:
            best = act
    return best, scores


@dataclass(frozen=True)
class PseudoLabeledUtterance:
    utterance: Utterance
    act: str
    slots: tuple[SlotValue, ...]
    provenance: str


def _machine_turn_structure(conv: Conversation) -> tuple[int | None, list[int]]:
    """(index of place_order machine turn or None, recommend turn indices).

    For ordered conversations the closing machine turn is the order
    placement; earlier machine turns quoting a price are recommendations.
    """
    machine_idxs = [i for i, t in enumerate(conv.turns) if t.speaker == "machine"]
    if not machine_idxs or conv.final_order is None:
        return None, []
    place_idx = machine_idxs[-1]
    recommends = [
        i for i in machine_idxs if i != place_idx and PRICE_MARKER_RE.search(conv.turns[i].text)
    ]
    return place_idx, recommends


def distant_supervise(
    conversations: list[Conversation],
    gazetteer: Gazetteer,
    patterns: dict[str, str] | None = None,
) -> list[PseudoLabeledUtterance]:
    """Pseudo-label user utterances by aligning them with the final order.

    Ordered conversations: utterances whose extracted values intersect the
    order are inform; a turn sandwiched between two recommendations is a
    reject; the turn before order placement is an accept; a slotless first
    turn is a greet; turns after placement are bye; the rest is chitchat.
    Conversations without an order only contribute greet/bye/chitchat, and
    their slot-bearing utterances are skipped (nothing to verify them
    against). Conversations that fail basic invariants are skipped and
    counted.
    """
    out: list[PseudoLabeledUtterance] = []
    skipped = 0
    for conv in conversations:
        indices = [t.turn_index for t in conv.turns]
        if indices != sorted(indices) or len(set(indices)) != len(indices):
            skipped += 1
            continue
        user_idxs = [i for i, t in enumerate(conv.turns) if t.speaker == "user"]
        if not user_idxs:
            continue
        place_idx, recommend_idxs = _machine_turn_structure(conv)
        order_pairs = conv.final_order.value_pairs() if conv.final_order else set()
        first_user, last_user = user_idxs[0], user_idxs[-1]
        for i in user_idxs:
            utt = conv.turns[i]
            extracted = extract_slots(utt.text, gazetteer, patterns)
            overlap = tuple(sv for sv in extracted if sv.pair() in order_pairs)
            if conv.final_order is not None:
                if overlap:
                    out.append(PseudoLabeledUtterance(utt, "inform", overlap, "order_slot_match"))
                elif (
                    i - 1 in recommend_idxs
                    and any(r > i for r in recommend_idxs)
                ):
                    out.append(PseudoLabeledUtterance(utt, "reject", (), "between_recommends"))
                elif place_idx is not None and i == place_idx - 1:
                    out.append(PseudoLabeledUtterance(utt, "accept", (), "pre_place_order"))
                elif i == first_user and not extracted:
                    out.append(PseudoLabeledUtterance(utt, "greet", (), "first_turn_greet"))
                elif place_idx is not None and i > place_idx:
                    out.append(PseudoLabeledUtterance(utt, "bye", (), "post_order_bye"))
                else:
                    out.append(PseudoLabeledUtterance(utt, "chitchat", (), "residual_chitchat"))
            else:
                if i == first_user and not extracted:
                    out.append(PseudoLabeledUtterance(utt, "greet", (), "no_order_greet"))
                elif i == last_user and not extracted:
                    out.append(PseudoLabeledUtterance(utt, "bye", (), "no_order_bye"))
                elif not extracted:
                    out.append(PseudoLabeledUtterance(utt, "chitchat", (), "no_order_chitchat"))
                # slot-bearing turns in unordered conversations stay unlabeled
    if skipped:
        log.warning("distant_supervise skipped %d conversations failing invariants", skipped)
    return out


def train_intent_model(data: list[PseudoLabeledUtterance]) -> IntentModel:
    """Fit the naive Bayes counts. Deterministic: a single counting pass,
    no randomness, no epochs. Acts absent from the data keep prior-only
    smoothing."""
    if not data:
        raise ValueError("no training data")
    class_counts: dict[str, int] = {}
    token_counts: dict[str, dict[str, int]] = {}
    vocab: set[str] = set()
    for ex in data:
        class_counts[ex.act] = class_counts.get(ex.act, 0) + 1
        bucket = token_counts.setdefault(ex.act, {})
        for tok in _tokens(normalize_value(ex.utterance.text)):
            bucket[tok] = bucket.get(tok, 0) + 1
            vocab.add(tok)
    return IntentModel(
        class_counts=class_counts,
        token_counts=token_counts,
        vocabulary=frozenset(vocab),
    )
