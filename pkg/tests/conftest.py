import pytest
from hypothesis import settings

import sureparity

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(scope="session")
def corpus():
    return {name: sureparity.load_corpus(name) for name in sureparity.corpus_names()}


@pytest.fixture(scope="session")
def gameshow(corpus):
    return corpus["gameshow"]
