import pytest

from clinevent.fixtures import fixture_corpus, fixture_documents


@pytest.fixture(scope="session")
def corpus_and_ontology():
    return fixture_corpus(30)


@pytest.fixture(scope="session")
def corpus(corpus_and_ontology):
    return corpus_and_ontology[0]


@pytest.fixture(scope="session")
def ontology(corpus_and_ontology):
    return corpus_and_ontology[1]


@pytest.fixture(scope="session")
def raw_documents():
    return fixture_documents(30)
