import os

import numpy as np
import pytest

# Settings are read on import; keep test logs quiet and machine readable
os.environ["TIES_LOG_LEVEL"] = "WARNING"
os.environ["TIES_LOG_FORMAT"] = "json"

from app.logging_setup import setup_logging
from app.schemas import WorldConfig
from app.services import synth_world
from app.services.evaluation_service import build_examples
from app.services.feature_service import compute_features
from app.services.interaction_store import EventStore, ingest


@pytest.fixture(autouse=True)
def _log_to_captured_stderr():
    """Rebind the log sink to the stderr pytest installed for this test."""
    setup_logging(level="WARNING", fmt="json")
    yield
    setup_logging(level="WARNING", fmt="json")


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_call(item):
    """Rebind again once the call-phase capture (including capsys) is active."""
    setup_logging(level="WARNING", fmt="json")


# Four players, four games, one week window.
#   game 10  bin 0    playlist 0  team 0: 1, 2   team 1: 3
#   game 11  bin 1    playlist 1  team 0: 1, 2   team 1: 4
#   game 12  bin 3    playlist 0  team 0: 1      team 1: 2, 3
#   game 13  bin 144  playlist 1  team 0: 3      team 1: 4
TINY_EVENTS = """\
# 0 604800
10\t0\t0\t0\t1\t3\t1\t0
10\t0\t0\t0\t2\t1\t0\t0
10\t0\t0\t1\t3\t0\t0\t2
11\t600\t1\t0\t1\t2\t0\t1
11\t600\t1\t0\t2\t0\t0\t0
11\t600\t1\t1\t4\t0\t0\t0
12\t1800\t0\t0\t1\t0\t0\t1
12\t1800\t0\t1\t2\t5\t0\t0
12\t1800\t0\t1\t3\t1\t1\t0
13\t86400\t1\t0\t3\t0\t0\t0
13\t86400\t1\t1\t4\t0\t0\t0
"""

TINY_LABELS = """\
1\t2\t1
3\t2\t1
3\t4\t0
"""


@pytest.fixture
def tiny_log(tmp_path):
    path = tmp_path / "events.tsv"
    path.write_text(TINY_EVENTS, encoding="utf-8")
    return path


@pytest.fixture
def tiny_labels(tmp_path):
    path = tmp_path / "labels.tsv"
    path.write_text(TINY_LABELS, encoding="utf-8")
    return path


@pytest.fixture
def tiny_store(tiny_log):
    return ingest(tiny_log)


@pytest.fixture
def store_from_rows():
    """Build a store from (game, ts, playlist, team, player, direct, indirect, betrayals) rows."""
    def build(rows, window_start=0, window_end=None, bin_seconds=600):
        rows = np.asarray(rows, dtype=np.int64).reshape(-1, 8)
        if window_end is None:
            window_end = int(rows[:, 1].max()) + 1 if rows.size else 1
        return EventStore.from_columns(*rows.T, window_start=window_start, window_end=window_end,
                                       bin_seconds=bin_seconds)
    return build


@pytest.fixture(scope="session")
def small_config():
    return WorldConfig(agents=300, days=21, seed=7)


@pytest.fixture(scope="session")
def small_world(small_config):
    return synth_world.generate(small_config)


@pytest.fixture(scope="session")
def default_world():
    """The documented default world: 2,000 agents, 60 days, seed 42."""
    return synth_world.generate(WorldConfig())


@pytest.fixture(scope="session")
def default_features(default_world):
    respondents = [r for r in default_world.labels.raters.tolist() if default_world.store.has_player(r)]
    return compute_features(default_world.store, respondents)


@pytest.fixture(scope="session")
def default_examples(default_world, default_features):
    return build_examples(default_features, default_world.labels)
