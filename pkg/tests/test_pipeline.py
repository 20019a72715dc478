import dataclasses
import json

import pytest

from convreco.domain import Conversation, Order, SlotValue, Utterance
from convreco.pipeline import (
    PipelineConfig,
    PipelineError,
    extract_interactions,
    load_bundle,
    run_pipeline,
    save_bundle,
    write_artifacts,
)

SMALL_CFG = PipelineConfig(
    corpus_n=120,
    corpus_seed=7,
    episodes=1500,
    policy_seed=11,
    eval_n=120,
    eval_seed=3,
    run_stamp="2026-08-10T00:00:00Z",
)


@pytest.fixture(scope="module")
def small_run():
    return run_pipeline(SMALL_CFG)


def _conv(turn_specs, order=None, user="u1"):
    turns = tuple(
        Utterance(speaker=spk, text=text, turn_index=i) for i, (spk, text) in enumerate(turn_specs)
    )
    return Conversation(user_id=user, turns=turns, final_order=order)


def _order(pid):
    return Order(user_id="u1", product_id=pid, slot_values=(SlotValue("food", "japanese"),))


def test_extract_interactions_single_order(catalog):
    name = catalog.products[0].name
    conv = _conv(
        [
            ("machine", f"how about {name} for $12?"),
            ("user", "perfect, i'll take that one"),
            ("machine", f"done! i've placed your order: {name} ($12; food=japanese)."),
            ("user", "bye"),
        ],
        order=_order(catalog.products[0].id),
    )
    records = extract_interactions([conv], catalog)
    assert [(r.user_id, r.product_id, r.value) for r in records] == [
        ("u1", catalog.products[0].id, 1.0)
    ]


def test_extract_interactions_rejects_then_order(catalog):
    a, b, c = catalog.products[0], catalog.products[1], catalog.products[2]
    conv = _conv(
        [
            ("machine", f"how about {a.name} for $12?"),
            ("user", "not that one"),
            ("machine", f"how about {b.name} for $13?"),
            ("user", "i don't love that, something else maybe"),
            ("machine", f"how about {c.name} for $14?"),
            ("user", "sounds great, i'll take it"),
            ("machine", f"done! i've placed your order: {c.name} ($14; food=japanese)."),
            ("user", "bye"),
        ],
        order=_order(c.id),
    )
    records = extract_interactions([conv], catalog)
    values = {(r.product_id, r.value) for r in records}
    assert values == {(a.id, 0.0), (b.id, 0.0), (c.id, 1.0)}


def test_extract_interactions_empty(catalog):
    assert extract_interactions([], catalog) == []


def test_extract_interactions_unordered_moved_past(catalog):
    a = catalog.products[0]
    conv = _conv(
        [
            ("machine", f"how about {a.name} for $12?"),
            ("user", "not that one"),
            ("machine", "sorry, i'm not finding anything else that fits."),
            ("user", "bye"),
        ]
    )
    records = extract_interactions([conv], catalog)
    assert [(r.product_id, r.value) for r in records] == [(a.id, 0.0)]


def test_extract_interactions_last_shown_unjudged(catalog):
    a = catalog.products[0]
    conv = _conv(
        [
            ("machine", f"how about {a.name} for $12?"),
            ("user", "bye"),  # walked away; no verdict on the product
        ]
    )
    assert extract_interactions([conv], catalog) == []


def test_pipeline_small_run_report_structure(small_run):
    bundle, report, curve = small_run
    assert set(report) == {
        "corpus",
        "nlu",
        "interactions",
        "mf",
        "policy",
        "evaluation",
        "baseline",
        "seeds",
        "run_stamp",
    }
    assert set(report["evaluation"]) == {"episodes", "success_rate", "avg_turns", "avg_reward"}
    assert set(report["nlu"]) >= {
        "slot_micro_f1",
        "act_accuracy",
        "pseudo_labels",
        "non_chitchat_fraction",
    }
    assert report["seeds"] == {"corpus": 7, "mf": 42, "policy": 11, "eval": 3}
    assert curve  # sampled every 1000 episodes
    assert bundle.schema_hash


def test_pipeline_zero_corpus_aborts_at_nlu_stage():
    cfg = dataclasses.replace(SMALL_CFG, corpus_n=0)
    with pytest.raises(PipelineError, match="stage nlu"):
        run_pipeline(cfg)


def test_bundle_roundtrip_identical_bytes(tmp_path, small_run):
    bundle, _, _ = small_run
    p1, p2 = tmp_path / "b1.json", tmp_path / "b2.json"
    save_bundle(bundle, str(p1))
    again = load_bundle(str(p1))
    save_bundle(again, str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_bundle_truncated_fails_checksum(tmp_path, small_run):
    bundle, _, _ = small_run
    path = tmp_path / "b.json"
    save_bundle(bundle, str(path))
    doc = json.loads(path.read_text())
    doc["payload"]["q_table"] = doc["payload"]["q_table"][:1]
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="checksum mismatch"):
        load_bundle(str(path))


def test_bundle_future_version_rejected(tmp_path, small_run):
    bundle, _, _ = small_run
    path = tmp_path / "b.json"
    save_bundle(bundle, str(path))
    doc = json.loads(path.read_text())
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="unsupported bundle version"):
        load_bundle(str(path))


def test_bundle_missing_section_rejected(tmp_path, small_run):
    bundle, _, _ = small_run
    path = tmp_path / "b.json"
    save_bundle(bundle, str(path))
    doc = json.loads(path.read_text())
    del doc["payload"]["intent_model"]
    import hashlib

    blob = json.dumps(doc["payload"], sort_keys=True, separators=(",", ":")).encode()
    doc["checksum"] = hashlib.sha256(blob).hexdigest()
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="missing section: intent_model"):
        load_bundle(str(path))


def test_write_artifacts_files_exist(tmp_path, small_run):
    from pathlib import Path

    bundle, report, curve = small_run
    paths = write_artifacts(bundle, report, curve, str(tmp_path))
    for key in ("bundle", "report_json", "report_txt", "curve"):
        assert Path(paths[key]).exists()
    header = (tmp_path / "curve.csv").read_text().splitlines()[0]
    assert header == "episode,success_rate,avg_turns,avg_reward"


def test_load_interactions_csv(tmp_path):
    from convreco.pipeline import load_interactions_csv

    path = tmp_path / "interactions.csv"
    path.write_text("user_id,product_id,value\nu1,p1,1.0\nu2,p2,0.0\nu1,p3,4.5\n")
    records = load_interactions_csv(str(path))
    assert [(r.user_id, r.product_id, r.value) for r in records] == [
        ("u1", "p1", 1.0),
        ("u2", "p2", 0.0),
        ("u1", "p3", 4.5),
    ]


def test_evaluate_zero_episodes(quick_runtime):
    from convreco.loop import evaluate
    from convreco.simulator import UserProfile

    metrics = evaluate(quick_runtime, UserProfile(), 0, seed=3)
    assert metrics == {"episodes": 0, "success_rate": 0.0, "avg_turns": 0.0, "avg_reward": 0.0}


def test_snapshot_bundle_roundtrip(tmp_path, small_run):
    from convreco.loop import evaluate
    from convreco.pipeline import load_bundle
    from convreco.runtime import build_runtime, snapshot_bundle
    from convreco.simulator import UserProfile

    bundle, report, _ = small_run
    runtime = build_runtime(bundle)
    again = snapshot_bundle(runtime, bundle.config, bundle.seeds, bundle.created_at)
    path = tmp_path / "snap.json"
    save_bundle(again, str(path))
    metrics = evaluate(build_runtime(load_bundle(str(path))), UserProfile(),
                       SMALL_CFG.eval_n, SMALL_CFG.eval_seed)
    assert metrics == report["evaluation"]


def test_loaded_bundle_behaves_identically(tmp_path, small_run):
    from convreco.loop import evaluate
    from convreco.runtime import build_runtime
    from convreco.simulator import UserProfile

    bundle, report, _ = small_run
    path = tmp_path / "b.json"
    save_bundle(bundle, str(path))
    runtime = build_runtime(load_bundle(str(path)))
    metrics = evaluate(runtime, UserProfile(), SMALL_CFG.eval_n, SMALL_CFG.eval_seed)
    assert metrics == report["evaluation"]
