"""Pytest hooks and shared fixtures; module helpers live in support.py."""

import pytest

import support
from support import make_corpus, make_scoring


def pytest_terminal_summary(terminalreporter):
    if not support._CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in support._CRITERION_LINES:
        terminalreporter.write_line(line)


@pytest.fixture()
def tiny_corpus():
    return make_corpus(seed=0)


@pytest.fixture()
def tiny_scoring(tiny_corpus):
    catalog, store = tiny_corpus
    return catalog, store, make_scoring(catalog, store)
