from pathlib import Path

import pytest

from sessionsuite.depgraph import PageGraph, load_site_model
from sessionsuite.ingest import load_sessions
from sessionsuite.profile import load_service_profile

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture
def bookstore_sessions():
    return load_sessions(FIXTURES / "bookstore_sessions.jsonl")


@pytest.fixture
def bookstore_profile():
    return load_service_profile(FIXTURES / "bookstore_profile.json")


@pytest.fixture
def bookstore_graph():
    return PageGraph(load_site_model(FIXTURES / "bookstore_site.json"))


@pytest.fixture
def demo_graph():
    return PageGraph(load_site_model(FIXTURES / "demo_app_site.json"))
