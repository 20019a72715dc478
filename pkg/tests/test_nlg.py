import json
import re

import pytest
from hypothesis import given, strategies as st

from convreco.nlg import (
    Template,
    TemplateError,
    TemplateLibrary,
    ask_templates,
    load_templates,
    record_outcome,
    render,
    select_template,
)


def test_render_substitutes_placeholders():
    t = Template(id="r", act_kind="recommend", pattern="How about {product_name} for {price}?")
    out = render(t, {"product_name": "Latte", "price": "$4"})
    assert out == "How about Latte for $4?"


def test_render_no_placeholders_passthrough():
    t = Template(id="g", act_kind="greet", pattern="hello there!")
    assert render(t, {}) == "hello there!"


def test_render_missing_binding_names_placeholder():
    t = Template(id="r", act_kind="recommend", pattern="{product_name} for {price}")
    with pytest.raises(TemplateError, match="unbound placeholder: price"):
        render(t, {"product_name": "Latte"})


def test_render_output_has_no_unresolved_markers():
    t = Template(id="r", act_kind="recommend", pattern="{product_name} at {price}")
    out = render(t, {"product_name": "A", "price": "$1"})
    assert not re.search(r"\{[a-z_]+\}", out)


def test_select_template_argmax_success_rate():
    t1 = Template(id="a", act_kind="greet", pattern="x", uses=10, successes=9)
    t2 = Template(id="b", act_kind="greet", pattern="y", uses=10, successes=5)
    assert select_template("greet", [t1, t2]) is t1


def test_select_template_smoothing():
    t1 = Template(id="a", act_kind="greet", pattern="x", uses=0, successes=0)  # 0.5
    t2 = Template(id="b", act_kind="greet", pattern="y", uses=2, successes=2)  # 0.75
    assert select_template("greet", [t1, t2]) is t2


def test_select_template_tie_breaks_lowest_id():
    t1 = Template(id="b", act_kind="greet", pattern="x", uses=4, successes=2)
    t2 = Template(id="a", act_kind="greet", pattern="y", uses=4, successes=2)
    assert select_template("greet", [t1, t2]).id == "a"


def test_select_template_missing_act_errors():
    with pytest.raises(TemplateError, match="no template for act"):
        select_template("confirm", [Template(id="a", act_kind="greet", pattern="x")])


def test_record_outcome_counters():
    t = Template(id="a", act_kind="greet", pattern="x")
    t = record_outcome(t, success=True)
    assert (t.uses, t.successes) == (1, 1)
    t = record_outcome(t, success=False)
    assert (t.uses, t.successes) == (2, 1)
    assert t.successes <= t.uses


@given(st.lists(st.booleans(), max_size=60))
def test_counters_and_rates_stay_sane(outcomes):
    t = Template(id="a", act_kind="greet", pattern="x")
    for success in outcomes:
        t = record_outcome(t, success)
        assert t.successes <= t.uses
        assert 0.0 < t.smoothed_rate() < 1.0


def test_load_templates_seed_library(templates):
    assert all(t.uses == 0 and t.successes == 0 for t in templates)
    for kind in ("ask", "recommend", "confirm", "place_order", "greet", "fallback"):
        assert any(t.act_kind == kind for t in templates)


def test_load_templates_unknown_placeholder(tmp_path, schema):
    path = tmp_path / "t.json"
    path.write_text(json.dumps([{"id": "x", "act_kind": "greet", "pattern": "{color}!"}]))
    with pytest.raises(TemplateError, match="unknown placeholder"):
        load_templates(str(path), schema)


def test_load_templates_missing_act_kind(tmp_path, schema, templates):
    doc = [
        {"id": t.id, "act_kind": t.act_kind, "pattern": t.pattern}
        for t in templates
        if t.act_kind != "place_order"
    ]
    path = tmp_path / "t.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(TemplateError, match="no template for act place_order"):
        load_templates(str(path), schema)


def test_ask_templates_grouped_by_prompt_key(templates, schema):
    for slot in schema.slots:
        if slot.required:
            group = ask_templates(templates, slot.prompt_key)
            assert group, slot.name
            assert all(t.act_kind == "ask" for t in group)


def test_library_credit_and_stats(templates):
    lib = TemplateLibrary(templates)
    some_id = templates[0].id
    lib.credit([some_id, some_id], success=True)
    stats = lib.stats()
    assert stats[some_id] == {"uses": 2, "successes": 2}
    lib.credit([some_id], success=False)
    assert lib.stats()[some_id] == {"uses": 3, "successes": 2}


def test_library_load_stats_roundtrip(templates):
    lib = TemplateLibrary(templates)
    lib.credit([templates[0].id], success=True)
    stats = lib.stats()
    fresh = TemplateLibrary(templates)
    fresh.load_stats(stats)
    assert fresh.stats() == stats
