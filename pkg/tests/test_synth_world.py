import numpy as np
import pytest
from pydantic import ValidationError

from app.exceptions import InputFormatError
from app.schemas import WorldConfig
from app.services import synth_world
from app.services.interaction_store import format_events, ingest, load_labels
from app.services.synth_world import (
    BINS_PER_DAY,
    activity_share,
    generate,
    load_world_config,
    pack_games,
    profile_table,
    read_friends,
    write_world,
)


def test_same_seed_same_world(small_config):
    a = generate(small_config)
    b = generate(small_config)
    assert format_events(a.store) == format_events(b.store)
    assert a.truth.friends == b.truth.friends
    c = generate(small_config.model_copy(update={"seed": 8}))
    assert format_events(c.store) != format_events(a.store)


def test_world_is_consistent(small_world, small_config):
    store, truth = small_world.store, small_world.truth
    assert store.n_events > 0
    assert store.window_end - store.window_start == small_config.days * 86400
    assert np.all((store.timestamp >= store.window_start) & (store.timestamp < store.window_end))
    assert all(a < b for a, b in truth.friends)
    assert len(truth.respondents) == round(0.25 * small_config.agents)
    # Every label is a respondent rating a planted friend
    friends = set(truth.friends)
    for r, t in zip(small_world.labels.rater.tolist(), small_world.labels.target.tolist()):
        assert r in truth.respondents
        assert (min(r, t), max(r, t)) in friends


def test_games_have_two_teams(small_world, small_config):
    store = small_world.store
    for g in range(0, store.game_starts.size - 1, 7):
        members = store.game_members(g)
        teams = set(store.team[members].tolist())
        assert teams == {0, 1}
        assert 2 <= members.size <= 2 * small_config.team_size


def test_indirect_assists_only_on_vehicle_playlists(small_world, small_config):
    store = small_world.store
    assert np.all(store.indirect[store.playlist >= small_config.vehicle_playlists] == 0)


def test_profile_shape():
    config = WorldConfig(days=7, utc_offset_hours=0.0, peak_hour=12.0, peak_trough_ratio=4.0,
                         weekend_multiplier=1.0, start_timestamp=1284336000)  # a Monday
    table = profile_table(config)
    assert table.size == 7 * BINS_PER_DAY
    assert table.mean() == pytest.approx(1.0, rel=1e-3)
    day = table[:BINS_PER_DAY]
    assert day.max() / day.min() == pytest.approx(4.0, rel=1e-2)
    assert int(np.argmax(day)) in (71, 72)


def test_weekend_multiplier_keeps_weekly_mean():
    config = WorldConfig(days=7, utc_offset_hours=0.0, weekend_multiplier=2.0, start_timestamp=1284336000)
    table = profile_table(config)
    assert table.mean() == pytest.approx(1.0, rel=1e-3)
    weekday = table[:BINS_PER_DAY].sum()
    saturday = table[5 * BINS_PER_DAY:6 * BINS_PER_DAY].sum()
    assert saturday / weekday == pytest.approx(2.0)


def test_pack_games_respects_team_size():
    units = [[1, 2, 3], [4], [5, 6], [7, 8], [9], [10, 11, 12, 13]]
    games = pack_games(units, [False] * len(units), team_size=4)
    seen = []
    for a, b in games:
        assert len(a) <= 4 and len(b) <= 4
        seen += a + b
    assert sorted(seen) == list(range(1, 14))
    for unit in units:
        assert any(set(unit) <= set(a) or set(unit) <= set(b) for a, b in games)


def test_split_party_is_dealt_across_teams():
    games = pack_games([[1, 2, 3, 4]], [True], team_size=4)
    assert games == [([1, 3], [2, 4])]


def test_degree_is_clamped_for_tiny_worlds():
    world = generate(WorldConfig(agents=2, days=1, seed=3))
    assert len(world.truth.friends) <= 1
    empty = generate(WorldConfig(agents=1, days=1, seed=3))
    assert empty.truth.friends == []


def test_config_file(tmp_path):
    path = tmp_path / "world.conf"
    path.write_text("# tiny\nagents = 50   # people\ndays=3\n\n", encoding="utf-8")
    config = load_world_config(path, seed=9, days=None)
    assert (config.agents, config.days, config.seed) == (50, 3, 9)


def test_config_file_errors(tmp_path):
    path = tmp_path / "world.conf"
    path.write_text("agents 50\n", encoding="utf-8")
    with pytest.raises(InputFormatError) as exc:
        load_world_config(path)
    assert exc.value.line == 1
    path.write_text("agentz = 50\n", encoding="utf-8")
    with pytest.raises(ValidationError):
        load_world_config(path)
    with pytest.raises(ValidationError):
        WorldConfig(friend_mean_degree=3)


def test_shipped_default_config_matches_schema():
    from pathlib import Path

    path = Path(__file__).resolve().parent.parent / "data" / "world_default.conf"
    assert load_world_config(path) == WorldConfig()


def test_write_world(tmp_path, small_world):
    files = write_world(tmp_path / "world", small_world)
    store = ingest(files["events.tsv"])
    assert store.checksum() == small_world.store.checksum()
    assert len(load_labels(files["labels.tsv"])) == len(small_world.labels)
    assert read_friends(files["friends.tsv"]) == small_world.truth.friends
    assert load_world_config(files["world.conf"]) == small_world.config
    agents = open(files["agents.tsv"], encoding="utf-8").read().splitlines()
    assert agents[0] == "# player\trate\tgames\trespondent"
    assert len(agents) == small_world.config.agents + 1


def test_gamertags_are_unique(small_world):
    names = list(small_world.names.values())
    assert len(set(names)) == len(names)
    assert synth_world.gamertag(0) != synth_world.gamertag(144)


@pytest.mark.slow
def test_activity_is_heavy_tailed(default_world):
    assert activity_share(default_world) > 0.5
