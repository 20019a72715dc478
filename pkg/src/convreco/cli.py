"""Command line interface: train, simulate, eval, chat, serve.

Every option can also come from the environment with a CONVRECO_ prefix,
e.g. CONVRECO_SERVE_ADDR=0.0.0.0:9000.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click

from .domain import RandomSource, load_schema
from .catalog import load_catalog
from .loop import evaluate
from .nlg import TemplateLibrary, load_templates
from .pipeline import (
    PipelineConfig,
    default_data_path,
    load_bundle,
    run_pipeline,
    write_artifacts,
)
from .simulator import UserProfile, corpus_stats, generate_corpus, write_corpus


@click.group(context_settings={"auto_envvar_prefix": "CONVRECO"})
def main():
    """Conversational recommendation agent."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Pipeline config JSON; defaults are used when omitted.")
@click.option("--out", "out_path", default="bundle.json", show_default=True)
@click.option("--report-dir", default=None, help="Directory for report/curve artifacts "
              "(defaults to the bundle's directory).")
@click.option("--stamp", default=None, help="Run stamp recorded in the bundle; pin it for "
              "byte-reproducible artifacts.")
def train(config_path, out_path, report_dir, stamp):
    """Run the full training pipeline and write the model bundle."""
    doc = {}
    if config_path:
        doc = json.loads(Path(config_path).read_text(encoding="utf-8"))
    cfg = PipelineConfig.from_dict(doc)
    if stamp is not None:
        cfg = PipelineConfig.from_dict({**cfg.to_dict(), "run_stamp": stamp})
    elif not cfg.run_stamp:
        cfg = PipelineConfig.from_dict(
            {**cfg.to_dict(), "run_stamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}
        )
    bundle, report, curve = run_pipeline(cfg)
    out_dir = report_dir or str(Path(out_path).resolve().parent)
    paths = write_artifacts(bundle, report, curve, out_dir)
    if str(Path(paths["bundle"]).resolve()) != str(Path(out_path).resolve()):
        Path(out_path).write_text(Path(paths["bundle"]).read_text(encoding="utf-8"),
                                  encoding="utf-8")
    click.echo(f"bundle: {out_path}")
    click.echo(f"report: {paths['report_txt']}")
    click.echo(f"eval success_rate: {report['evaluation']['success_rate']:.3f}")


@main.command()
@click.option("--n", default=2000, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--out", "out_path", default="corpus.jsonl", show_default=True)
@click.option("--annotations", "sidecar_path", default=None,
              help="Sidecar path for hidden annotations (default: <out>.annotations.jsonl).")
@click.option("--schema", "schema_path", default=None)
@click.option("--catalog", "catalog_path", default=None)
@click.option("--templates", "templates_path", default=None)
@click.option("--synonyms", "synonyms_path", default=None)
def simulate(n, seed, out_path, sidecar_path, schema_path, catalog_path, templates_path,
             synonyms_path):
    """Generate a simulated conversation corpus."""
    schema = load_schema(schema_path or default_data_path("schema.json"))
    catalog = load_catalog(catalog_path or default_data_path("catalog.json"), schema)
    templates = load_templates(templates_path or default_data_path("templates.json"), schema)
    library = TemplateLibrary(templates)
    corpus = generate_corpus(
        n, catalog, schema, UserProfile(), RandomSource(seed), library
    )
    sidecar = sidecar_path or f"{out_path}.annotations.jsonl"
    write_corpus(corpus, out_path, sidecar)
    stats = corpus_stats(corpus)
    click.echo(f"wrote {stats['conversations']} conversations to {out_path}")
    click.echo(f"completion_fraction: {stats['completion_fraction']:.3f}")
    click.echo(f"annotations sidecar: {sidecar}")


@main.command("eval")
@click.option("--bundle", "bundle_path", required=True, type=click.Path(exists=True))
@click.option("--n", default=1000, show_default=True)
@click.option("--seed", default=3, show_default=True)
def eval_cmd(bundle_path, n, seed):
    """Greedy evaluation of a trained bundle against the simulator."""
    from .runtime import build_runtime_from_bundle

    runtime = build_runtime_from_bundle(bundle_path)
    metrics = evaluate(runtime, UserProfile(), n, seed)
    click.echo(json.dumps(metrics, indent=2, sort_keys=True))


@main.command()
@click.option("--bundle", "bundle_path", required=True, type=click.Path(exists=True))
@click.option("--user", "user_id", default="repl")
def chat(bundle_path, user_id):
    """Terminal chat REPL running the same loop as the server."""
    from .runtime import build_runtime_from_bundle
    from .service import EventLog, Session, SessionClosed, handle_message

    runtime = build_runtime_from_bundle(bundle_path)
    session = Session(id="repl", user_id=user_id)
    events = EventLog(None)
    click.echo("agent ready; say something (ctrl-d to quit)")
    for line in sys.stdin:
        text = line.strip()
        if not text:
            continue
        try:
            reply = handle_message(runtime, session, text, events)
        except SessionClosed:
            click.echo("(conversation closed)")
            break
        click.echo(f"agent> {reply.text}")
        for rec in reply.recommendations:
            click.echo(f"  [{rec['product_id']}] {rec['name']} (${rec['price']:g})")
        if session.closed:
            break


@main.command()
@click.option("--bundle", "bundle_path", required=True, type=click.Path(exists=True))
@click.option("--addr", default="127.0.0.1:8080", show_default=True)
@click.option("--catalog", "catalog_path", default=None)
@click.option("--schema", "schema_path", default=None)
@click.option("--templates", "templates_path", default=None)
@click.option("--synonyms", "synonyms_path", default=None)
@click.option("--log-dir", default=None, help="Session event log directory.")
@click.option("--static-dir", default=None, help="Directory with the built web UI.")
@click.option("--snapshot-every", default=300, show_default=True,
              help="Seconds between bundle snapshots of the live models "
              "(0 disables; requires --log-dir).")
def serve(bundle_path, addr, catalog_path, schema_path, templates_path, synonyms_path,
          log_dir, static_dir, snapshot_every):
    """Serve the chat API (and UI when --static-dir is given)."""
    import threading

    import uvicorn

    from .pipeline import load_bundle, save_bundle
    from .runtime import build_runtime_from_bundle, snapshot_bundle
    from .service import create_app

    runtime = build_runtime_from_bundle(
        bundle_path,
        schema_path=schema_path,
        catalog_path=catalog_path,
        templates_path=templates_path,
        synonyms_path=synonyms_path,
    )
    if static_dir is None:
        repo_dist = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        if repo_dist.is_dir():
            static_dir = str(repo_dist)
    app = create_app(runtime, log_dir=log_dir, static_dir=static_dir)

    if log_dir and snapshot_every > 0:
        source = load_bundle(bundle_path)
        target = Path(log_dir) / "bundle.snapshot.json"
        stop = threading.Event()

        def snapshot_loop():
            while not stop.wait(snapshot_every):
                current = app.state.shared["runtime"]
                bundle = snapshot_bundle(
                    current, source.config, source.seeds,
                    time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
                )
                tmp = target.with_suffix(".tmp")
                save_bundle(bundle, str(tmp))
                tmp.replace(target)

        threading.Thread(target=snapshot_loop, daemon=True).start()

    host, _, port = addr.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8080))


if __name__ == "__main__":
    main()
