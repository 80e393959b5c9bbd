from pathlib import Path

import pytest

from crowdflow import Engine, TransitionMonitor
from crowdflow.canonical import canonical_line
from crowdflow.eventstore import replay
from crowdflow.model import parse_definition

REPO_ROOT = Path(__file__).resolve().parent.parent
DEFINITIONS_DIR = REPO_ROOT / "definitions"
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"


def load_definition(name: str):
    return parse_definition((DEFINITIONS_DIR / f"{name}.json").read_text(encoding="utf-8"))


@pytest.fixture
def proposals_def():
    return load_definition("crowd-proposals")


@pytest.fixture
def cards_def():
    return load_definition("business-cards")


@pytest.fixture
def diamond_def():
    return load_definition("diamond-review")


def make_engine(*definitions, monitor: bool = True) -> Engine:
    """Fresh engine with the stock internal users and (by default) the
    transition monitor attached."""
    engine = Engine()
    if monitor:
        engine.add_listener(TransitionMonitor())
    for defn in definitions:
        engine.add_definition(defn)
    engine.add_internal_user("alice", ["staff", "editor", "counsel", "office"])
    engine.add_internal_user("owner", ["staff"])
    engine.add_internal_user("bob", ["office"])
    return engine


@pytest.fixture
def engine(proposals_def):
    return make_engine(proposals_def)


def state_bytes(engine: Engine) -> str:
    return canonical_line(engine.state.to_doc())


def replayed_bytes(engine: Engine) -> str:
    return canonical_line(replay(engine.store.events()).to_doc())


def assert_replay_matches(engine: Engine) -> None:
    assert state_bytes(engine) == replayed_bytes(engine)
