"""Assemble a serving/eval AgentRuntime from a saved bundle plus data files.

Paths left unset fall back to the paths recorded in the bundle's config
snapshot, then to the packaged defaults.
"""

from __future__ import annotations

from .catalog import build_gazetteer, load_catalog
from .domain import load_schema, load_synonyms, schema_fingerprint
from .loop import AgentRuntime
from .nlg import TemplateLibrary, load_templates
from .pipeline import ModelBundle, default_data_path, load_bundle


def build_runtime(
    bundle: ModelBundle,
    schema_path: str | None = None,
    catalog_path: str | None = None,
    templates_path: str | None = None,
    synonyms_path: str | None = None,
) -> AgentRuntime:
    cfg = bundle.config or {}

    def pick(explicit: str | None, key: str, default_name: str) -> str:
        return explicit or cfg.get(key) or default_data_path(default_name)

    schema = load_schema(pick(schema_path, "schema_path", "schema.json"))
    if schema_fingerprint(schema) != bundle.schema_hash:
        raise ValueError("schema file does not match the bundle's schema hash")
    catalog = load_catalog(pick(catalog_path, "catalog_path", "catalog.json"), schema)
    synonyms = load_synonyms(pick(synonyms_path, "synonyms_path", "synonyms.json"))
    templates = load_templates(pick(templates_path, "templates_path", "templates.json"), schema)
    library = TemplateLibrary(templates)
    library.load_stats(bundle.nlg_stats)
    return AgentRuntime(
        schema=schema,
        catalog=catalog,
        gazetteer=build_gazetteer(catalog, synonyms),
        intent=bundle.intent,
        factors=bundle.factors,
        q=bundle.q,
        templates=library,
        blend_alpha=cfg.get("blend_alpha", 0.7),
        recommend_n=cfg.get("recommend_n", 1),
    )


def build_runtime_from_bundle(
    bundle_path: str,
    schema_path: str | None = None,
    catalog_path: str | None = None,
    templates_path: str | None = None,
    synonyms_path: str | None = None,
) -> AgentRuntime:
    bundle = load_bundle(bundle_path)
    return build_runtime(
        bundle,
        schema_path=schema_path,
        catalog_path=catalog_path,
        templates_path=templates_path,
        synonyms_path=synonyms_path,
    )


def snapshot_bundle(
    runtime: AgentRuntime, config: dict, seeds: dict, created_at: str
) -> ModelBundle:
    """Freeze the runtime's current models (including serve-time feedback
    updates and template counters) back into a bundle."""
    return ModelBundle(
        schema_hash=schema_fingerprint(runtime.schema),
        intent=runtime.intent,
        factors=runtime.factors,
        q=runtime.q,
        nlg_stats=runtime.templates.stats(),
        config=config,
        seeds=seeds,
        created_at=created_at,
    )
