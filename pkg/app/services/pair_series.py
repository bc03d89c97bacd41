"""
Pair series service.

Builds the binary co-interaction series n_xy(t) of a pair as a sparse sorted
list of bins, and enumerates the universe of (focal, co-player) pairs from a
vectorized expansion of every focal game into its co-players.
"""
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from ..logging_setup import logger
from .interaction_store import EventStore

CACHE_MAGIC = b"TIEPAIRS"
CACHE_VERSION = 1


@dataclass(frozen=True)
class PairSeries:
    x: int
    y: int
    bins: np.ndarray
    total_bins: int

    @property
    def k(self) -> int:
        return int(self.bins.size)


def expand_ranges(starts: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Concatenate arange(s, s + n) for every (s, n) without a Python loop."""
    lengths = np.asarray(lengths, dtype=np.int64)
    total = int(lengths.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    heads = np.cumsum(lengths) - lengths
    return np.repeat(np.asarray(starts, dtype=np.int64) - heads, lengths) + np.arange(total, dtype=np.int64)


def build_series(store: EventStore, x: int, y: int) -> PairSeries:
    """Distinct bins in which x and y shared a game."""
    ex, _ = store.shared_events(x, y)
    return PairSeries(x=x, y=y, bins=np.unique(store.bins[ex]), total_bins=store.total_bins)


def session_count(bins: np.ndarray) -> int:
    """Maximal runs of consecutive bins."""
    bins = np.asarray(bins)
    if bins.size == 0:
        return 0
    return int(1 + np.count_nonzero(np.diff(bins) > 1))


def session_counts(offsets: np.ndarray, bins: np.ndarray) -> np.ndarray:
    """session_count of every CSR segment."""
    if bins.size == 0:
        return np.zeros(max(offsets.size - 1, 0), dtype=np.int64)
    breaks = np.ones(bins.size, dtype=np.int64)
    breaks[1:] = (np.diff(bins) > 1).astype(np.int64)
    breaks[offsets[:-1][offsets[:-1] < bins.size]] = 1
    return np.add.reduceat(breaks, offsets[:-1])


@dataclass(frozen=True)
class CoplayTable:
    """
    One row per (focal player x, co-player y, shared game), sorted by
    (x, y, game). Every bulk pair feature is a segmented reduction over it.
    """
    ev_x: np.ndarray
    ev_y: np.ndarray
    x_code: np.ndarray
    y_code: np.ndarray
    bins: np.ndarray
    same_team: np.ndarray
    pair_starts: np.ndarray

    @property
    def n_rows(self) -> int:
        return int(self.ev_x.size)

    @property
    def n_pairs(self) -> int:
        return int(self.pair_starts.size - 1)

    @property
    def pair_x(self) -> np.ndarray:
        return self.x_code[self.pair_starts[:-1]]

    @property
    def pair_y(self) -> np.ndarray:
        return self.y_code[self.pair_starts[:-1]]

    def row_pair(self) -> np.ndarray:
        """Pair index of every row."""
        return np.repeat(np.arange(self.n_pairs, dtype=np.int64), np.diff(self.pair_starts))

    def distinct_bins(self):
        """CSR (offsets, bins) of each pair's distinct bins; the pair series in bulk."""
        first = np.ones(self.n_rows, dtype=bool)
        first[1:] = (self.bins[1:] != self.bins[:-1])
        first[self.pair_starts[:-1]] = True
        keep = np.flatnonzero(first)
        offsets = np.searchsorted(keep, self.pair_starts).astype(np.int64)
        return offsets, self.bins[keep]


def build_coplay_table(store: EventStore, focal_codes: np.ndarray) -> CoplayTable:
    focal_codes = np.unique(np.asarray(focal_codes, dtype=np.int64))
    starts = store.player_starts[focal_codes]
    lengths = store.player_starts[focal_codes + 1] - starts
    ev_focal = store.player_order[expand_ranges(starts, lengths)]

    games = store.game_index[ev_focal]
    g_start = store.game_starts[games]
    g_size = store.game_starts[games + 1] - g_start
    ev_x = np.repeat(ev_focal, g_size)
    ev_y = expand_ranges(g_start, g_size)
    keep = ev_y != ev_x
    ev_x, ev_y = ev_x[keep], ev_y[keep]

    x_code = store.player_code[ev_x]
    y_code = store.player_code[ev_y]
    order = np.lexsort((store.game_index[ev_x], y_code, x_code))
    ev_x, ev_y, x_code, y_code = ev_x[order], ev_y[order], x_code[order], y_code[order]

    if ev_x.size:
        change = np.flatnonzero((x_code[1:] != x_code[:-1]) | (y_code[1:] != y_code[:-1])) + 1
        pair_starts = np.concatenate(([0], change, [ev_x.size])).astype(np.int64)
    else:
        pair_starts = np.zeros(1, dtype=np.int64)

    return CoplayTable(
        ev_x=ev_x,
        ev_y=ev_y,
        x_code=x_code,
        y_code=y_code,
        bins=store.bins[ev_x],
        same_team=store.team[ev_x] == store.team[ev_y],
        pair_starts=pair_starts,
    )


@dataclass(frozen=True)
class PairUniverse:
    """All (focal, other) pairs with at least one shared game, sorted by (x, y)."""
    x: np.ndarray
    y: np.ndarray
    offsets: np.ndarray
    bins: np.ndarray
    total_bins: int

    def __len__(self) -> int:
        return int(self.x.size)

    def pairs(self):
        return list(zip(self.x.tolist(), self.y.tolist()))

    def series_at(self, i: int) -> PairSeries:
        return PairSeries(
            x=int(self.x[i]), y=int(self.y[i]),
            bins=self.bins[self.offsets[i]:self.offsets[i + 1]],
            total_bins=self.total_bins,
        )

    def index_of(self, x: int, y: int) -> Optional[int]:
        lo = int(np.searchsorted(self.x, np.uint64(x), side="left"))
        hi = int(np.searchsorted(self.x, np.uint64(x), side="right"))
        j = lo + int(np.searchsorted(self.y[lo:hi], np.uint64(y)))
        if j < hi and int(self.y[j]) == y:
            return j
        return None


def universe_from_table(store: EventStore, table: CoplayTable) -> PairUniverse:
    offsets, bins = table.distinct_bins()
    return PairUniverse(
        x=store.players[table.pair_x],
        y=store.players[table.pair_y],
        offsets=offsets,
        bins=bins,
        total_bins=store.total_bins,
    )


def enumerate_pairs(store: EventStore, focal: Iterable[int]) -> PairUniverse:
    """
    Every pair (x, y) with x in focal and at least one shared game.

    Raises:
        UnknownPlayerError: a focal id absent from the store
    """
    focal = np.asarray(sorted(set(int(f) for f in focal)), dtype=np.uint64)
    codes = store.codes_of(focal) if focal.size else np.zeros(0, dtype=np.int64)
    universe = universe_from_table(store, build_coplay_table(store, codes))
    logger.debug("pairs_enumerated", focal=int(focal.size), pairs=len(universe))
    return universe


# ============================================================================
# Binary cache
# ============================================================================

def save_universe_cache(path, universe: PairUniverse, checksum: str) -> None:
    """Header: magic, version, store sha256, pair count, bin count, total bins."""
    header = CACHE_MAGIC + struct.pack(
        "<I64sQQQ", CACHE_VERSION, checksum.encode("ascii"), len(universe), universe.bins.size, universe.total_bins
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(universe.x.astype("<u8").tobytes())
        f.write(universe.y.astype("<u8").tobytes())
        f.write(universe.offsets.astype("<i8").tobytes())
        f.write(universe.bins.astype("<i8").tobytes())


def load_universe_cache(path, store: EventStore) -> Optional[PairUniverse]:
    """Cached universe, or None when missing, stale or of another version."""
    path = Path(path)
    if not path.exists():
        return None
    raw = path.read_bytes()
    head_size = len(CACHE_MAGIC) + struct.calcsize("<I64sQQQ")
    if len(raw) < head_size or raw[:len(CACHE_MAGIC)] != CACHE_MAGIC:
        logger.warning("pair_cache_ignored", path=str(path), reason="bad_magic")
        return None
    version, checksum, n_pairs, n_bins, total_bins = struct.unpack("<I64sQQQ", raw[len(CACHE_MAGIC):head_size])
    if version != CACHE_VERSION:
        logger.warning("pair_cache_ignored", path=str(path), reason="version", version=version)
        return None
    if checksum != store.checksum().encode("ascii"):
        logger.warning("pair_cache_ignored", path=str(path), reason="checksum")
        return None
    expected = head_size + 8 * (3 * n_pairs + 1 + n_bins)
    if len(raw) != expected:
        logger.warning("pair_cache_ignored", path=str(path), reason="truncated")
        return None
    body = np.frombuffer(raw, dtype=np.uint8, offset=head_size)
    cursor = 0

    def take(count, dtype):
        nonlocal cursor
        out = np.frombuffer(body, dtype=dtype, count=count, offset=cursor).astype(dtype.lstrip("<"))
        cursor += 8 * count
        return out

    return PairUniverse(
        x=take(n_pairs, "<u8"),
        y=take(n_pairs, "<u8"),
        offsets=take(n_pairs + 1, "<i8"),
        bins=take(n_bins, "<i8"),
        total_bins=int(total_bins),
    )
