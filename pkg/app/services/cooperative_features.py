"""
Cooperative features, all directed x -> y and built from x's own counters:

- assists A_xy: x's direct assists in shared same-team games
- indirect V_xy: x's indirect (vehicle) assists in shared same-team games
- betrayals B_xy: x's betrayals in shared opposing-team games
"""
from typing import NamedTuple

import numpy as np

from ..exceptions import NumericError
from .interaction_store import EventStore
from .pair_series import CoplayTable

INT64_MAX = np.iinfo(np.int64).max


class CooperativeFeatures(NamedTuple):
    assists: int
    indirect: int
    betrayals: int


def checked_segment_sums(values: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Per-segment int64 sums of non-negative counters; aborts instead of wrapping."""
    values = np.asarray(values, dtype=np.int64)
    if values.size and float(values.sum(dtype=np.float64)) > INT64_MAX:
        raise NumericError("cooperative counter total exceeds 64-bit range")
    cs = np.concatenate(([0], np.cumsum(values, dtype=np.int64)))
    return cs[offsets[1:]] - cs[offsets[:-1]]


def _directed_sum(store: EventStore, x: int, y: int, column: np.ndarray, same_team: bool) -> int:
    ex, ey = store.shared_events(x, y)
    mask = (store.team[ex] == store.team[ey]) == same_team
    picked = np.asarray(column[ex[mask]], dtype=np.int64)
    return int(checked_segment_sums(picked, np.array([0, picked.size]))[0])


def direct_assists(store: EventStore, x: int, y: int) -> int:
    return _directed_sum(store, x, y, store.direct, same_team=True)


def indirect_assists(store: EventStore, x: int, y: int) -> int:
    return _directed_sum(store, x, y, store.indirect, same_team=True)


def betrayals_toward(store: EventStore, x: int, y: int) -> int:
    return _directed_sum(store, x, y, store.betrayals, same_team=False)


def cooperative_features(store: EventStore, x: int, y: int) -> CooperativeFeatures:
    return CooperativeFeatures(
        direct_assists(store, x, y), indirect_assists(store, x, y), betrayals_toward(store, x, y)
    )


def cooperative_columns(store: EventStore, table: CoplayTable):
    """(A, V, B) for every pair of a coplay table."""
    same = table.same_team
    direct = np.where(same, store.direct[table.ev_x], 0)
    indirect = np.where(same, store.indirect[table.ev_x], 0)
    betrayals = np.where(same, 0, store.betrayals[table.ev_x])
    return (
        checked_segment_sums(direct, table.pair_starts),
        checked_segment_sums(indirect, table.pair_starts),
        checked_segment_sums(betrayals, table.pair_starts),
    )
