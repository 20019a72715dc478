"""Train the dialogue policy at several episode budgets and report greedy
success against the random-action floor.

Usage: python3 scripts/policy_learning_curve.py [--budgets 1000,5000,20000]
"""

import argparse
import time

from convreco.catalog import build_gazetteer, load_catalog
from convreco.domain import RandomSource, load_schema, load_synonyms
from convreco.loop import AgentRuntime, evaluate, random_baseline, train_policy
from convreco.nlg import TemplateLibrary, load_templates
from convreco.nlu import distant_supervise, train_intent_model
from convreco.pipeline import default_data_path, extract_interactions
from convreco.policy import PolicyConfig, QTable
from convreco.recommender import Hyperparams, train_mf
from convreco.simulator import UserProfile, generate_corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--budgets", default="1000,5000,20000")
    parser.add_argument("--corpus-n", type=int, default=2000)
    parser.add_argument("--eval-n", type=int, default=500)
    parser.add_argument("--seed", type=int, default=11)
    args = parser.parse_args()

    schema = load_schema(default_data_path("schema.json"))
    catalog = load_catalog(default_data_path("catalog.json"), schema)
    synonyms = load_synonyms(default_data_path("synonyms.json"))
    gazetteer = build_gazetteer(catalog, synonyms)
    library = TemplateLibrary(load_templates(default_data_path("templates.json"), schema))

    print(f"generating {args.corpus_n} conversations and training NLU/MF ...")
    corpus = generate_corpus(
        args.corpus_n, catalog, schema, UserProfile(), RandomSource(7), library
    )
    conversations = [ac.conversation for ac in corpus]
    intent = train_intent_model(distant_supervise(conversations, gazetteer, schema.patterns))
    factors = train_mf(extract_interactions(conversations, catalog), Hyperparams(seed=42))

    base_runtime = AgentRuntime(
        schema=schema, catalog=catalog, gazetteer=gazetteer,
        intent=intent, factors=factors, q=QTable(), templates=library,
    )
    floor = random_baseline(base_runtime, UserProfile(), args.eval_n, seed=3)
    print(f"random baseline: success={floor['success_rate']:.3f} turns={floor['avg_turns']:.2f}")

    print(f"{'episodes':>10} {'success':>8} {'turns':>6} {'reward':>7} {'seconds':>8}")
    for budget in (int(b) for b in args.budgets.split(",")):
        runtime = AgentRuntime(
            schema=schema, catalog=catalog, gazetteer=gazetteer, intent=intent,
            factors=factors, q=QTable(),
            templates=TemplateLibrary(load_templates(default_data_path("templates.json"), schema)),
        )
        start = time.perf_counter()
        train_policy(runtime, UserProfile(), budget, PolicyConfig(), seed=args.seed)
        elapsed = time.perf_counter() - start
        metrics = evaluate(runtime, UserProfile(), args.eval_n, seed=3)
        print(
            f"{budget:>10} {metrics['success_rate']:>8.3f} {metrics['avg_turns']:>6.2f} "
            f"{metrics['avg_reward']:>7.3f} {elapsed:>8.1f}"
        )


if __name__ == "__main__":
    main()
