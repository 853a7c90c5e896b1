import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hseqlabel.features import FeatureConfig, HandcraftedFeatureSpec
from hseqlabel.model import ModelConfig
from hseqlabel.synth import GeneratorProfile, generate_corpus, synthetic_embeddings
from hseqlabel.training import build_documents, train

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=1000)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def small_corpus():
    return generate_corpus(GeneratorProfile(seed=11, count=24))


@pytest.fixture(scope="session")
def small_features(small_corpus):
    table = synthetic_embeddings(small_corpus, dim=8, seed=11)
    return FeatureConfig("embedding", table=table, spec=HandcraftedFeatureSpec.default())


@pytest.fixture(scope="session")
def tiny_model(small_corpus, small_features):
    """A briefly trained multi-task model; quality is irrelevant, plumbing is not."""
    cfg = ModelConfig(hidden=6, epochs=2, seed=3)
    result = train(cfg, build_documents(small_corpus[:16], cfg), small_features)
    return result.model


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_RESULTS: list[str] = []


@pytest.fixture(scope="session")
def criterion():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def check(number: int, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {detail}"
        ACCEPTANCE_RESULTS.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_RESULTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
