import numpy as np
import pytest

from app.exceptions import NumericError
from app.services.cooperative_features import (
    betrayals_toward,
    checked_segment_sums,
    cooperative_features,
    direct_assists,
    indirect_assists,
)


def test_direct_assists_are_directed(tiny_store):
    # Player 1: 3 + 2 in same-team games 10 and 11; player 2 opposes 1 in game 12
    assert direct_assists(tiny_store, 1, 2) == 5
    assert direct_assists(tiny_store, 2, 1) == 1


def test_indirect_assists(tiny_store):
    assert indirect_assists(tiny_store, 1, 2) == 1
    assert indirect_assists(tiny_store, 2, 1) == 0
    assert indirect_assists(tiny_store, 3, 2) == 1


def test_betrayals_only_across_teams(tiny_store):
    assert betrayals_toward(tiny_store, 1, 2) == 1
    assert betrayals_toward(tiny_store, 3, 1) == 2
    assert betrayals_toward(tiny_store, 3, 2) == 2
    assert betrayals_toward(tiny_store, 1, 4) == 1


def test_features_of_pair_without_shared_games(tiny_store):
    assert cooperative_features(tiny_store, 4, 4) == (0, 0, 0)


def test_single_shared_game(store_from_rows):
    store = store_from_rows([(1, 0, 0, 0, 7, 3, 0, 0), (1, 0, 0, 0, 8, 0, 0, 0)])
    assert direct_assists(store, 7, 8) == 3
    assert direct_assists(store, 8, 7) == 0


def test_segment_sums_guard_overflow():
    big = np.array([np.iinfo(np.int64).max, 5], dtype=np.int64)
    with pytest.raises(NumericError):
        checked_segment_sums(big, np.array([0, 2]))
    assert checked_segment_sums(np.array([1, 2, 3]), np.array([0, 1, 3])).tolist() == [1, 5]
