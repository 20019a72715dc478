"""End-to-end training orchestration and the model bundle.

Stage order: corpus generation -> distant supervision -> intent training ->
interaction extraction -> factor training -> policy training -> greedy
evaluation -> report. Every stage is a pure function of (config, seeds,
input files); two runs with the same config produce byte-identical bundles
and reports.

The bundle is versioned canonical JSON with a sha256 checksum, floats at
full repr precision, every map sorted: human-auditable and diff-friendly.
"""

from __future__ import annotations

import dataclasses
import hashlib
import importlib.resources
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .catalog import Catalog, Gazetteer, build_gazetteer, load_catalog
from .domain import (
    Conversation,
    RandomSource,
    load_schema,
    load_synonyms,
    normalize_value,
    schema_fingerprint,
)
from .loop import AgentRuntime, evaluate, random_baseline, train_policy
from .nlg import TemplateLibrary, load_templates
from .nlu import (
    PRICE_MARKER_RE,
    IntentModel,
    classify_act,
    distant_supervise,
    extract_slots,
    train_intent_model,
)
from .policy import PolicyConfig, QTable
from .recommender import FactorModel, Hyperparams, InteractionRecord, predict, train_mf
from .simulator import AnnotatedConversation, UserProfile, corpus_stats, generate_corpus

BUNDLE_VERSION = 1


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: str):
        super().__init__(f"stage {stage}: {cause}")
        self.stage = stage


def default_data_path(name: str) -> str:
    return str(importlib.resources.files("convreco").joinpath("data", name))


@dataclass(frozen=True)
class PipelineConfig:
    schema_path: str = ""
    catalog_path: str = ""
    templates_path: str = ""
    synonyms_path: str = ""
    corpus_n: int = 2000
    corpus_seed: int = 7
    user_pool: int = 0  # 0 -> corpus_n // 5
    nlu_holdout: float = 0.2
    profile: UserProfile = UserProfile()
    optional_rate: float = 0.5
    mf: Hyperparams = Hyperparams(seed=42)
    mf_holdout: float = 0.1
    episodes: int = 50000
    policy_seed: int = 11
    policy: PolicyConfig = PolicyConfig()
    eval_n: int = 1000
    eval_seed: int = 3
    blend_alpha: float = 0.7
    recommend_n: int = 1
    run_stamp: str = ""

    def resolved(self) -> "PipelineConfig":
        return dataclasses.replace(
            self,
            schema_path=self.schema_path or default_data_path("schema.json"),
            catalog_path=self.catalog_path or default_data_path("catalog.json"),
            templates_path=self.templates_path or default_data_path("templates.json"),
            synonyms_path=self.synonyms_path or default_data_path("synonyms.json"),
        )

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        return out

    @staticmethod
    def from_dict(doc: dict) -> "PipelineConfig":
        doc = dict(doc)
        if "profile" in doc:
            doc["profile"] = UserProfile(**doc["profile"])
        if "mf" in doc:
            doc["mf"] = Hyperparams(**doc["mf"])
        if "policy" in doc:
            doc["policy"] = PolicyConfig(**doc["policy"])
        return PipelineConfig(**doc)


@dataclass
class ModelBundle:
    schema_hash: str
    intent: IntentModel
    factors: FactorModel
    q: QTable
    nlg_stats: dict[str, dict[str, int]]
    config: dict
    seeds: dict
    created_at: str


def extract_interactions(
    corpus: list[Conversation], catalog: Catalog
) -> list[InteractionRecord]:
    """Reconstruct user-item feedback from raw transcripts only.

    The ordered product is a 1.0. A product quoted in a recommendation turn
    counts as a 0.0 rejection when the conversation demonstrably moved past
    it: for ordered conversations, any recommended product other than the
    ordered one; otherwise any recommendation the machine followed up after.
    No hidden annotations are consulted.
    """
    name_index = sorted(
        ((normalize_value(p.name), p.id) for p in catalog.products),
        key=lambda t: -len(t[0]),
    )
    records: list[InteractionRecord] = []
    for conv in corpus:
        machine_idxs = [i for i, t in enumerate(conv.turns) if t.speaker == "machine"]
        last_machine = machine_idxs[-1] if machine_idxs else -1
        mentioned: list[tuple[int, str]] = []
        for i in machine_idxs:
            if conv.final_order is not None and i == last_machine:
                continue  # the order-placement turn also quotes the product
            if not PRICE_MARKER_RE.search(conv.turns[i].text):
                continue
            text_n = normalize_value(conv.turns[i].text)
            for name_n, pid in name_index:
                if name_n in text_n:
                    mentioned.append((i, pid))
                    break
        if conv.final_order is not None:
            for _, pid in mentioned:
                if pid != conv.final_order.product_id:
                    records.append(InteractionRecord(conv.user_id, pid, 0.0))
            records.append(
                InteractionRecord(conv.user_id, conv.final_order.product_id, 1.0)
            )
        else:
            for i, pid in mentioned:
                if any(j > i + 1 for j in machine_idxs):
                    records.append(InteractionRecord(conv.user_id, pid, 0.0))
    return records


def load_interactions_csv(path: str) -> list[InteractionRecord]:
    """CSV `user_id,product_id,value`, optional header."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("user_id"):
                continue
            user, product, value = line.split(",")
            records.append(InteractionRecord(user, product, float(value)))
    return records


def _nlu_metrics(
    held_out: list[AnnotatedConversation],
    all_convs: list[AnnotatedConversation],
    intent: IntentModel,
    gazetteer: Gazetteer,
    patterns: dict[str, str],
) -> dict:
    """Accuracy/F1 against the hidden sidecar. Evaluation-only code path."""
    tp = fp = fn = 0
    for ac in all_convs:
        for utt in ac.conversation.user_turns():
            truth = ac.annotations.get(utt.turn_index)
            if truth is None:
                continue
            true_pairs = {sv.pair() for sv in truth.true_slots}
            got_pairs = {sv.pair() for sv in extract_slots(utt.text, gazetteer, patterns)}
            tp += len(true_pairs & got_pairs)
            fp += len(got_pairs - true_pairs)
            fn += len(true_pairs - got_pairs)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    correct = total = 0
    per_act: dict[str, dict[str, int]] = {}
    for ac in held_out:
        for utt in ac.conversation.user_turns():
            truth = ac.annotations.get(utt.turn_index)
            if truth is None:
                continue
            slots = extract_slots(utt.text, gazetteer, patterns)
            act, _ = classify_act(utt.text, intent, slots)
            bucket = per_act.setdefault(truth.true_act, {"correct": 0, "total": 0})
            bucket["total"] += 1
            total += 1
            if act == truth.true_act:
                bucket["correct"] += 1
                correct += 1
    return {
        "slot_precision": precision,
        "slot_recall": recall,
        "slot_micro_f1": f1,
        "act_accuracy": (correct / total) if total else 0.0,
        "act_eval_utterances": total,
        "per_act": {k: per_act[k] for k in sorted(per_act)},
    }


def _mf_metrics(records: list[InteractionRecord], hp: Hyperparams, holdout: float) -> dict:
    n_hold = int(len(records) * holdout)
    if n_hold == 0 or len(records) - n_hold == 0:
        return {"holdout_rmse": 0.0, "baseline_rmse": 0.0, "holdout_records": 0}
    train, hold = records[:-n_hold], records[-n_hold:]
    model = train_mf(train, hp)
    mean = sum(r.value for r in train) / len(train)
    se = sum((predict(model, r.user_id, r.product_id) - r.value) ** 2 for r in hold)
    se_base = sum((mean - r.value) ** 2 for r in hold)
    return {
        "holdout_rmse": float(np.sqrt(se / n_hold)),
        "baseline_rmse": float(np.sqrt(se_base / n_hold)),
        "holdout_records": n_hold,
    }


def run_pipeline(cfg: PipelineConfig) -> tuple[ModelBundle, dict, list]:
    """Execute all stages; returns (bundle, report, training curve).

    Any stage failure raises PipelineError naming the stage; callers write
    artifacts only on full success.
    """
    cfg = cfg.resolved()
    stage = "load_inputs"
    try:
        schema = load_schema(cfg.schema_path)
        catalog = load_catalog(cfg.catalog_path, schema)
        synonyms = load_synonyms(cfg.synonyms_path)
        templates = load_templates(cfg.templates_path, schema)
        gazetteer = build_gazetteer(catalog, synonyms)
    except Exception as exc:
        raise PipelineError(stage, str(exc)) from exc

    stage = "corpus"
    try:
        library = TemplateLibrary(templates)
        rng = RandomSource(cfg.corpus_seed)
        corpus = generate_corpus(
            cfg.corpus_n,
            catalog,
            schema,
            cfg.profile,
            rng,
            library,
            user_pool=cfg.user_pool or None,
            optional_rate=cfg.optional_rate,
            max_turns=cfg.policy.max_turns,
        )
        stats = corpus_stats(corpus)
    except Exception as exc:
        raise PipelineError(stage, str(exc)) from exc

    stage = "nlu"
    try:
        n_hold = int(len(corpus) * cfg.nlu_holdout)
        train_convs = [ac.conversation for ac in corpus[: len(corpus) - n_hold]]
        labels = distant_supervise(train_convs, gazetteer, schema.patterns)
        if not labels:
            raise ValueError("no training data")
        intent = train_intent_model(labels)
        non_chitchat = sum(1 for ex in labels if ex.act != "chitchat")
        nlu_report = _nlu_metrics(
            corpus[len(corpus) - n_hold :], corpus, intent, gazetteer, schema.patterns
        )
        nlu_report["pseudo_labels"] = len(labels)
        nlu_report["non_chitchat_fraction"] = non_chitchat / len(labels)
    except Exception as exc:
        raise PipelineError(stage, str(exc)) from exc

    stage = "interactions"
    try:
        interactions = extract_interactions([ac.conversation for ac in corpus], catalog)
        if not interactions:
            raise ValueError("no interactions extracted")
    except Exception as exc:
        raise PipelineError(stage, str(exc)) from exc

    stage = "mf"
    try:
        mf_report = _mf_metrics(interactions, cfg.mf, cfg.mf_holdout)
        factors = train_mf(interactions, cfg.mf)
    except Exception as exc:
        raise PipelineError(stage, str(exc)) from exc

    stage = "policy"
    try:
        runtime = AgentRuntime(
            schema=schema,
            catalog=catalog,
            gazetteer=gazetteer,
            intent=intent,
            factors=factors,
            q=QTable(),
            templates=library,
            blend_alpha=cfg.blend_alpha,
            recommend_n=cfg.recommend_n,
        )
        q, curve = train_policy(
            runtime,
            cfg.profile,
            cfg.episodes,
            cfg.policy,
            cfg.policy_seed,
            optional_rate=cfg.optional_rate,
        )
    except Exception as exc:
        raise PipelineError(stage, str(exc)) from exc

    stage = "evaluate"
    try:
        metrics = evaluate(
            runtime,
            cfg.profile,
            cfg.eval_n,
            cfg.eval_seed,
            optional_rate=cfg.optional_rate,
            cfg=cfg.policy,
        )
        baseline = random_baseline(
            runtime,
            cfg.profile,
            cfg.eval_n,
            cfg.eval_seed,
            optional_rate=cfg.optional_rate,
            cfg=cfg.policy,
        )
    except Exception as exc:
        raise PipelineError(stage, str(exc)) from exc

    seeds = {
        "corpus": cfg.corpus_seed,
        "mf": cfg.mf.seed,
        "policy": cfg.policy_seed,
        "eval": cfg.eval_seed,
    }
    bundle = ModelBundle(
        schema_hash=schema_fingerprint(schema),
        intent=intent,
        factors=factors,
        q=q,
        nlg_stats=library.stats(),
        config=cfg.to_dict(),
        seeds=seeds,
        created_at=cfg.run_stamp,
    )
    report = {
        "corpus": stats,
        "nlu": nlu_report,
        "interactions": {"records": len(interactions)},
        "mf": mf_report,
        "policy": {
            "episodes": cfg.episodes,
            "q_entries": len(q.values),
            "final_window": dataclasses.asdict(curve[-1]) if curve else None,
        },
        "evaluation": metrics,
        "baseline": baseline,
        "seeds": seeds,
        "run_stamp": cfg.run_stamp,
    }
    return bundle, report, curve


# ---------------------------------------------------------------------------
# Bundle persistence: canonical JSON + checksum footer.

def _canonical(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def _bundle_payload(bundle: ModelBundle) -> dict:
    return {
        "schema_hash": bundle.schema_hash,
        "created_at": bundle.created_at,
        "config": bundle.config,
        "seeds": bundle.seeds,
        "intent_model": {
            "class_counts": dict(sorted(bundle.intent.class_counts.items())),
            "token_counts": {
                act: dict(sorted(toks.items()))
                for act, toks in sorted(bundle.intent.token_counts.items())
            },
            "vocabulary": sorted(bundle.intent.vocabulary),
        },
        "factor_model": {
            "k": bundle.factors.k,
            "global_bias": bundle.factors.global_bias,
            "user_bias": dict(sorted(bundle.factors.user_bias.items())),
            "item_bias": dict(sorted(bundle.factors.item_bias.items())),
            "user_factors": {
                u: [float(x) for x in v] for u, v in sorted(bundle.factors.user_factors.items())
            },
            "item_factors": {
                i: [float(x) for x in v] for i, v in sorted(bundle.factors.item_factors.items())
            },
        },
        "q_table": [
            {
                "state_key": sk,
                "act": act,
                "value": bundle.q.values[(sk, act)],
                "visits": bundle.q.visit_counts.get((sk, act), 0),
            }
            for sk, act in sorted(bundle.q.values)
        ],
        "nlg_stats": bundle.nlg_stats,
    }


def save_bundle(bundle: ModelBundle, path: str) -> None:
    payload = _bundle_payload(bundle)
    checksum = hashlib.sha256(_canonical(payload).encode()).hexdigest()
    doc = {"version": BUNDLE_VERSION, "checksum": checksum, "payload": payload}
    Path(path).write_text(_canonical(doc) + "\n", encoding="utf-8")


def load_bundle(path: str) -> ModelBundle:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("version")
    if version != BUNDLE_VERSION:
        raise ValueError(f"unsupported bundle version: {version}")
    payload = doc.get("payload")
    if payload is None:
        raise ValueError("missing section: payload")
    checksum = hashlib.sha256(_canonical(payload).encode()).hexdigest()
    if checksum != doc.get("checksum"):
        raise ValueError("checksum mismatch")
    for section in ("intent_model", "factor_model", "q_table", "nlg_stats"):
        if section not in payload:
            raise ValueError(f"missing section: {section}")
    im = payload["intent_model"]
    intent = IntentModel(
        class_counts=dict(im["class_counts"]),
        token_counts={act: dict(toks) for act, toks in im["token_counts"].items()},
        vocabulary=frozenset(im["vocabulary"]),
    )
    fm = payload["factor_model"]
    factors = FactorModel(
        global_bias=fm["global_bias"],
        user_bias=dict(fm["user_bias"]),
        item_bias=dict(fm["item_bias"]),
        user_factors={u: np.array(v, dtype=np.float64) for u, v in fm["user_factors"].items()},
        item_factors={i: np.array(v, dtype=np.float64) for i, v in fm["item_factors"].items()},
        k=fm["k"],
    )
    q = QTable()
    for entry in payload["q_table"]:
        key = (entry["state_key"], entry["act"])
        q.values[key] = entry["value"]
        q.visit_counts[key] = entry["visits"]
    return ModelBundle(
        schema_hash=payload["schema_hash"],
        intent=intent,
        factors=factors,
        q=q,
        nlg_stats=payload["nlg_stats"],
        config=payload.get("config", {}),
        seeds=payload.get("seeds", {}),
        created_at=payload.get("created_at", ""),
    )


def render_report_text(report: dict) -> str:
    lines = [
        "training report",
        "===============",
        f"run_stamp: {report['run_stamp']}",
        f"seeds: {report['seeds']}",
        "",
        "corpus:",
        f"  conversations: {report['corpus']['conversations']}",
        f"  with_order: {report['corpus']['with_order']}",
        f"  completion_fraction: {report['corpus']['completion_fraction']:.4f}",
        "",
        "nlu (vs hidden sidecar, held-out conversations):",
        f"  pseudo_labels: {report['nlu']['pseudo_labels']}",
        f"  non_chitchat_fraction: {report['nlu']['non_chitchat_fraction']:.4f}",
        f"  slot_micro_f1: {report['nlu']['slot_micro_f1']:.4f}",
        f"  act_accuracy: {report['nlu']['act_accuracy']:.4f}",
        "",
        "matrix factorization:",
        f"  records: {report['interactions']['records']}",
        f"  holdout_rmse: {report['mf']['holdout_rmse']:.4f}",
        f"  baseline_rmse: {report['mf']['baseline_rmse']:.4f}",
        "",
        "policy:",
        f"  episodes: {report['policy']['episodes']}",
        f"  q_entries: {report['policy']['q_entries']}",
        "",
        "greedy evaluation:",
        f"  success_rate: {report['evaluation']['success_rate']:.4f}",
        f"  avg_turns: {report['evaluation']['avg_turns']:.4f}",
        f"  avg_reward: {report['evaluation']['avg_reward']:.4f}",
        "",
        "random baseline:",
        f"  success_rate: {report['baseline']['success_rate']:.4f}",
    ]
    return "\n".join(lines) + "\n"


def curve_csv(curve: list) -> str:
    lines = ["episode,success_rate,avg_turns,avg_reward"]
    for point in curve:
        lines.append(
            f"{point.episode},{point.success_rate:.6f},{point.avg_turns:.6f},{point.avg_reward:.6f}"
        )
    return "\n".join(lines) + "\n"


def write_artifacts(bundle: ModelBundle, report: dict, curve: list, out_dir: str) -> dict:
    """Write bundle.json, report.json, report.txt, curve.csv into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "bundle": out / "bundle.json",
        "report_json": out / "report.json",
        "report_txt": out / "report.txt",
        "curve": out / "curve.csv",
    }
    save_bundle(bundle, str(paths["bundle"]))
    paths["report_json"].write_text(_canonical(report) + "\n", encoding="utf-8")
    paths["report_txt"].write_text(render_report_text(report), encoding="utf-8")
    paths["curve"].write_text(curve_csv(curve), encoding="utf-8")
    return {k: str(v) for k, v in paths.items()}
