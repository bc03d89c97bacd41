import numpy as np
import pytest

from app.exceptions import InputFormatError
from app.services.feature_service import (
    FEATURE_NAMES,
    compute_features,
    format_features,
    pair_features,
    read_features,
    write_features,
)


def test_tiny_store_features(tiny_store):
    matrix = compute_features(tiny_store, [1], tau_max=2)
    assert list(zip(matrix.x.tolist(), matrix.y.tolist())) == [(1, 2), (1, 3), (1, 4)]
    row = dict(zip(FEATURE_NAMES, matrix.values[0].tolist()))
    assert row["ac"] == 2
    assert row["n_xy"] == 3
    assert row["norm_freq"] == 1.0
    assert row["assists"] == 5
    assert row["indirect"] == 1
    assert row["betrayals"] == 1
    assert matrix.n_x.tolist() == [3, 3, 3]


def test_bulk_equals_per_pair_path(tiny_store):
    matrix = compute_features(tiny_store, tau_max=3)
    for i, (x, y) in enumerate(zip(matrix.x.tolist(), matrix.y.tolist())):
        expected = pair_features(tiny_store, x, y, tau_max=3)
        np.testing.assert_allclose(matrix.values[i], np.asarray(expected, dtype=np.float64), rtol=0, atol=1e-12)


def test_bulk_equals_per_pair_on_world(small_world):
    store = small_world.store
    focal = store.players[::15].tolist()
    matrix = compute_features(store, focal)
    step = max(1, len(matrix) // 150)
    for i in range(0, len(matrix), step):
        expected = pair_features(store, int(matrix.x[i]), int(matrix.y[i]))
        np.testing.assert_allclose(matrix.values[i], np.asarray(expected, dtype=np.float64), rtol=0, atol=1e-12)


def test_thread_count_does_not_change_features(small_world):
    store = small_world.store
    one = compute_features(store, threads=1)
    many = compute_features(store, threads=8)
    assert format_features(one) == format_features(many)


def test_all_lags_mode(tiny_store):
    matrix = compute_features(tiny_store, [1], all_lags=True)
    # 3 shared bins with (1, 2): every pair of bins counts
    assert matrix.column("ac")[0] == 3


def test_pairs_need_a_shared_game(tiny_store):
    matrix = compute_features(tiny_store, [4])
    assert matrix.y.tolist() == [1, 2, 3]
    assert compute_features(tiny_store, []).values.shape == (0, len(FEATURE_NAMES))


def test_dump_and_read(tiny_store, tmp_path):
    matrix = compute_features(tiny_store)
    path = tmp_path / "features.tsv"
    write_features(path, matrix)
    text = path.read_text(encoding="utf-8")
    assert text.splitlines()[0] == "# x\ty\t" + "\t".join(FEATURE_NAMES)
    assert "\t-0" not in text
    back = read_features(path)
    assert back.x.tolist() == matrix.x.tolist()
    np.testing.assert_array_equal(back.values, matrix.values)
    assert back.n_x.tolist() == matrix.n_x.tolist()


def test_read_features_rejects_short_rows(tmp_path):
    path = tmp_path / "features.tsv"
    path.write_text("1\t2\t3\n", encoding="utf-8")
    with pytest.raises(InputFormatError) as exc:
        read_features(path)
    assert exc.value.line == 1


@pytest.mark.slow
def test_features_match_generator_ledger(default_world):
    """Every N_x, N_xy, A, V and B recomputed from the log equals the generator's own bookkeeping."""
    import time

    store, truth = default_world.store, default_world.truth
    started = time.perf_counter()
    matrix = compute_features(store)
    assert time.perf_counter() - started < 60.0

    games = store.games_per_player()
    assert {int(p): int(n) for p, n in zip(store.players, games)} == dict(truth.games_played)

    n_xy = matrix.column("n_xy").astype(np.int64)
    assists = matrix.column("assists").astype(np.int64)
    indirect = matrix.column("indirect").astype(np.int64)
    betrayals = matrix.column("betrayals").astype(np.int64)
    for i, (x, y) in enumerate(zip(matrix.x.tolist(), matrix.y.tolist())):
        assert n_xy[i] == truth.shared_games[(min(x, y), max(x, y))]
        assert assists[i] == truth.assists.get((x, y), 0)
        assert indirect[i] == truth.indirect.get((x, y), 0)
        assert betrayals[i] == truth.betrayals.get((x, y), 0)
    assert int(assists.sum()) == sum(truth.assists.values())
    assert int(betrayals.sum()) == sum(truth.betrayals.values())
    assert len(matrix) == 2 * len(truth.shared_games)
