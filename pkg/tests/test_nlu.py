import math

import pytest
from hypothesis import given, strategies as st

from convreco.catalog import Gazetteer
from convreco.domain import (
    USER_ACTS,
    Conversation,
    Order,
    SlotValue,
    Utterance,
    normalize_value,
)
from convreco.nlu import (
    PseudoLabeledUtterance,
    classify_act,
    distant_supervise,
    extract_slots,
    train_intent_model,
)

TOY_GAZ = Gazetteer(
    entries={
        "japanese": ("food", "japanese"),
        "latte": ("type", "latte"),
        "nippon cuisine": ("food", "japanese"),
    },
    max_phrase_words=2,
)


def test_extract_paper_example():
    got = extract_slots("I don't mind, but it should serve Japanese food.", TOY_GAZ)
    assert [sv.pair() for sv in got] == [("food", "japanese")]
    assert got[0].confidence == 1.0


def test_extract_latte_example():
    got = extract_slots("one latte please", TOY_GAZ)
    assert [sv.pair() for sv in got] == [("type", "latte")]


def test_extract_empty_text():
    assert extract_slots("", TOY_GAZ) == []


def test_extract_longest_phrase_wins():
    got = extract_slots("nippon cuisine tonight", TOY_GAZ)
    assert [sv.pair() for sv in got] == [("food", "japanese")]


def test_extract_first_match_per_slot_wins():
    gaz = Gazetteer(
        entries={"japanese": ("food", "japanese"), "italian": ("food", "italian")},
        max_phrase_words=1,
    )
    got = extract_slots("japanese then italian", gaz)
    assert [sv.pair() for sv in got] == [("food", "japanese")]


def test_extract_open_pattern_on_unconsumed_span():
    got = extract_slots("japanese near 95070 please", TOY_GAZ, {"location": r"\b\d{5}\b"})
    assert {sv.pair() for sv in got} == {("food", "japanese"), ("location", "95070")}


def test_extract_values_substring_of_normalized_input(gazetteer, schema):
    texts = [
        "i'd like japanese, thanks",
        "let me think... upscale would be great",
        "maybe thai and 95014",
    ]
    for text in texts:
        for sv in extract_slots(text, gazetteer, schema.patterns):
            assert sv.value in normalize_value(text)


def _toy_model():
    return train_intent_model(
        [
            PseudoLabeledUtterance(Utterance("user", "take it", 0), "accept", (), "t"),
            PseudoLabeledUtterance(Utterance("user", "something else", 0), "reject", (), "t"),
            PseudoLabeledUtterance(Utterance("user", "hi there", 0), "greet", (), "t"),
        ]
    )


def test_classify_inform_override_from_paper_example():
    model = _toy_model()
    text = "I don't mind, but it should serve Japanese food."
    slots = extract_slots(text, TOY_GAZ)
    act, scores = classify_act(text, model, slots)
    assert act == "inform"


def test_classify_cue_lexicon():
    model = _toy_model()
    assert classify_act("bye", model, [])[0] == "bye"
    assert classify_act("yes", model, [])[0] == "affirm"
    assert classify_act("no", model, [])[0] == "deny"


def test_classify_empty_text_is_chitchat_uniform():
    act, scores = classify_act("", _toy_model(), [])
    assert act == "chitchat"
    assert len(set(scores.values())) == 1


def test_classify_interrogative_blocks_inform_override():
    # a model that strongly associates question-ish tokens with request
    model = train_intent_model(
        [
            PseudoLabeledUtterance(
                Utterance("user", "do you have japanese food", 0), "request", (), "t"
            ),
        ]
        * 3
    )
    slots = [SlotValue("food", "japanese")]
    act, _ = classify_act("do you have japanese food?", model, slots)
    assert act == "request"  # slots present, but the question blocked the override
    act2, _ = classify_act("japanese food", model, slots)
    assert act2 == "inform"  # no interrogative cue: slots force inform


def test_classify_deterministic(gazetteer, schema):
    model = _toy_model()
    text = "something else"
    first = classify_act(text, model, [])
    for _ in range(5):
        assert classify_act(text, model, []) == first


def test_train_intent_model_separable_toy():
    model = train_intent_model(
        [
            PseudoLabeledUtterance(Utterance("user", "take it now", 0), "accept", (), "t"),
            PseudoLabeledUtterance(Utterance("user", "show me another", 0), "reject", (), "t"),
        ]
    )
    assert classify_act("take it now", model, [])[0] == "accept"
    assert classify_act("show me another", model, [])[0] == "reject"


def test_train_intent_model_duplication_invariance():
    data = [
        PseudoLabeledUtterance(Utterance("user", "take it", 0), "accept", (), "t"),
        PseudoLabeledUtterance(Utterance("user", "another one", 0), "reject", (), "t"),
    ]
    a = train_intent_model(data)
    b = train_intent_model(data + data)
    # count-based estimator: duplication scales every count by the same factor
    assert b.class_counts == {act: 2 * n for act, n in a.class_counts.items()}
    assert b.token_counts == {
        act: {tok: 2 * n for tok, n in toks.items()} for act, toks in a.token_counts.items()
    }
    assert b.vocabulary == a.vocabulary
    for text in ("take it", "another one"):
        assert classify_act(text, a, [])[0] == classify_act(text, b, [])[0]


def test_train_intent_model_empty_errors():
    with pytest.raises(ValueError, match="no training data"):
        train_intent_model([])


def test_likelihoods_normalize_within_1e9():
    model = train_intent_model(
        [
            PseudoLabeledUtterance(Utterance("user", "alpha beta beta", 0), "accept", (), "t"),
            PseudoLabeledUtterance(Utterance("user", "gamma", 0), "reject", (), "t"),
        ]
    )
    for act in USER_ACTS:
        total = sum(math.exp(model.log_likelihood(act, tok)) for tok in model.vocabulary)
        total += math.exp(model.log_likelihood(act, "__unknown__"))
        assert total == pytest.approx(1.0, abs=1e-9)


def test_scores_finite():
    model = _toy_model()
    _, scores = classify_act("utterly unseen tokens here", model, [])
    assert all(math.isfinite(s) for s in scores.values())


# --- distant supervision -----------------------------------------------------

def _conv(turn_specs, order=None, user="u1"):
    turns = tuple(
        Utterance(speaker=spk, text=text, turn_index=i)
        for i, (spk, text) in enumerate(turn_specs)
    )
    return Conversation(user_id=user, turns=turns, final_order=order)


ORDER = Order(
    user_id="u1",
    product_id="p1",
    slot_values=(SlotValue("food", "japanese"),),
)


def test_distant_supervision_inform_alignment():
    conv = _conv(
        [
            ("machine", "hi there! what are you after?"),
            ("user", "hello"),
            ("machine", "what kind of cuisine are you in the mood for?"),
            ("user", "it should serve japanese food"),
            ("machine", "how about Amber Table for $12?"),
            ("user", "perfect, i'll take that one"),
            ("machine", "done! i've placed your order: Amber Table ($12; food=japanese)."),
            ("user", "bye"),
        ],
        order=ORDER,
    )
    labels = {l.utterance.turn_index: l for l in distant_supervise([conv], TOY_GAZ)}
    assert labels[1].act == "greet"
    assert labels[3].act == "inform"
    assert [sv.pair() for sv in labels[3].slots] == [("food", "japanese")]
    assert labels[5].act == "accept"
    assert labels[7].act == "bye"


def test_distant_supervision_reject_between_recommends():
    conv = _conv(
        [
            ("machine", "how about Amber Table for $12?"),
            ("user", "not that one"),
            ("machine", "how about Cedar Corner for $14?"),
            ("user", "sounds great, i'll take it"),
            ("machine", "done! your order is in: Cedar Corner ($14; food=japanese)."),
            ("user", "goodbye"),
        ],
        order=ORDER,
    )
    labels = {l.utterance.turn_index: l for l in distant_supervise([conv], TOY_GAZ)}
    assert labels[1].act == "reject"
    assert labels[3].act == "accept"


def test_distant_supervision_never_labels_slots_outside_order():
    conv = _conv(
        [
            ("machine", "what cuisine?"),
            ("user", "italian japanese"),  # only japanese is in the order
            ("machine", "how about Amber Table for $12?"),
            ("user", "great, let's order that"),
            ("machine", "done! order placed: Amber Table ($12)."),
            ("user", "bye"),
        ],
        order=ORDER,
    )
    gaz = Gazetteer(
        entries={"japanese": ("food", "japanese"), "italian": ("style", "italian")},
        max_phrase_words=1,
    )
    for label in distant_supervise([conv], gaz):
        for sv in label.slots:
            assert sv.pair() in ORDER.value_pairs()


def test_distant_supervision_no_order_only_greet_bye_chitchat():
    conv = _conv(
        [
            ("machine", "hello!"),
            ("user", "hi"),
            ("machine", "what cuisine?"),
            ("user", "japanese please"),  # slot-bearing but unverifiable: skipped
            ("machine", "what zip?"),
            ("user", "hmm let me think"),
            ("machine", "what zip?"),
            ("user", "bye"),
        ]
    )
    labels = distant_supervise([conv], TOY_GAZ)
    acts = {l.utterance.turn_index: l.act for l in labels}
    assert acts == {1: "greet", 5: "chitchat", 7: "bye"}


def test_distant_supervision_empty_input():
    assert distant_supervise([], TOY_GAZ) == []


def test_distant_supervision_skips_invalid_conversations():
    bad = Conversation(
        user_id="u1",
        turns=(
            Utterance("user", "hi", 3),
            Utterance("machine", "hello", 1),  # turn indices out of order
        ),
        final_order=None,
    )
    assert distant_supervise([bad], TOY_GAZ) == []


@given(st.text(max_size=30))
def test_extract_slots_distinct_per_slot(text):
    got = extract_slots(text, TOY_GAZ, {"location": r"\b\d{5}\b"})
    slots = [sv.slot for sv in got]
    assert len(slots) == len(set(slots))
