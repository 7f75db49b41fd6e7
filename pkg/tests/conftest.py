from __future__ import annotations

from pathlib import Path

import pytest

from extsum.cli import fixture_path
from extsum.corpus import load_jsonl
from extsum.llmclient import ChatClient, ResponseCache
from extsum.mocks import named_mock

DATA = Path(__file__).parent / "data"
GOLDENS = DATA / "goldens"


@pytest.fixture(scope="session")
def cnn_corpus():
    return load_jsonl(fixture_path("cnn_dm"))


@pytest.fixture(scope="session")
def all_corpora():
    return {name: load_jsonl(fixture_path(name)) for name in ("cnn_dm", "xsum", "reddit", "pubmed")}


@pytest.fixture
def echo_client(cnn_corpus, tmp_path):
    def make(corpus=None, cache=True, **kw):
        backend = named_mock("oracle-echo", corpus if corpus is not None else cnn_corpus)
        return ChatClient(backend, cache=ResponseCache(tmp_path / "cache") if cache else None, **kw)

    return make


# filled by test_acceptance.verdict and echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
