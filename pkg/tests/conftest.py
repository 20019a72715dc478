import socket

import pytest

from convreco.catalog import build_gazetteer, load_catalog
from convreco.domain import RandomSource, load_schema, load_synonyms
from convreco.nlg import TemplateLibrary, load_templates
from convreco.pipeline import default_data_path
from convreco.simulator import UserProfile, generate_corpus


@pytest.fixture()
def free_tcp_port():
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture(scope="session")
def schema():
    return load_schema(default_data_path("schema.json"))


@pytest.fixture(scope="session")
def catalog(schema):
    return load_catalog(default_data_path("catalog.json"), schema)


@pytest.fixture(scope="session")
def synonyms():
    return load_synonyms(default_data_path("synonyms.json"))


@pytest.fixture(scope="session")
def gazetteer(catalog, synonyms):
    return build_gazetteer(catalog, synonyms)


@pytest.fixture(scope="session")
def templates(schema):
    return load_templates(default_data_path("templates.json"), schema)


@pytest.fixture()
def library(templates):
    return TemplateLibrary(templates)


@pytest.fixture(scope="session")
def small_corpus(catalog, schema, templates):
    """200 seeded conversations shared by the faster unit tests."""
    lib = TemplateLibrary(templates)
    return generate_corpus(200, catalog, schema, UserProfile(), RandomSource(7), lib)


@pytest.fixture(scope="session")
def quick_runtime(schema, catalog, gazetteer, templates, small_corpus):
    """A briefly trained end-to-end runtime for service-level tests."""
    from convreco.loop import AgentRuntime, train_policy
    from convreco.nlu import distant_supervise, train_intent_model
    from convreco.pipeline import extract_interactions
    from convreco.policy import PolicyConfig, QTable
    from convreco.recommender import Hyperparams, train_mf

    convs = [ac.conversation for ac in small_corpus]
    intent = train_intent_model(distant_supervise(convs, gazetteer, schema.patterns))
    factors = train_mf(extract_interactions(convs, catalog), Hyperparams(seed=42, epochs=10))
    runtime = AgentRuntime(
        schema=schema,
        catalog=catalog,
        gazetteer=gazetteer,
        intent=intent,
        factors=factors,
        q=QTable(),
        templates=TemplateLibrary(templates),
        recommend_n=3,
    )
    train_policy(runtime, UserProfile(), 1200, PolicyConfig(), seed=11)
    return runtime
