"""
Interaction store service.

Ingests the tab-separated event log into an immutable, indexed, column-oriented
store. Events are kept in canonical order (timestamp, game_id, team, player);
per-player offsets are time sorted and every game occupies one contiguous span.
"""
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, NamedTuple, NewType, Optional, Tuple

import numpy as np

from ..config import settings
from ..exceptions import InputFormatError, ParameterError, UnknownPlayerError
from ..logging_setup import logger

PlayerId = NewType("PlayerId", int)
TimeBin = NewType("TimeBin", int)

SECONDS_PER_DAY = 86400
EVENT_FIELDS = (
    "game_id", "timestamp", "playlist", "team", "player",
    "direct_assists", "indirect_assists", "betrayals",
)
ID_LIMIT = 2 ** 64
VALUE_LIMIT = 2 ** 63
# Exclusive upper bound per field: ids are uint64, everything else int64
FIELD_LIMITS = tuple(ID_LIMIT if name in ("game_id", "player") else VALUE_LIMIT for name in EVENT_FIELDS)


class InteractionEvent(NamedTuple):
    """One player's participation record in one game instance."""
    game_id: int
    timestamp: int
    playlist: int
    team: int
    player: PlayerId
    direct_assists: int
    indirect_assists: int
    betrayals: int


class Counters(NamedTuple):
    direct: int
    indirect: int
    betrayals: int


class GameRef(NamedTuple):
    game_id: int
    bin: TimeBin
    team: int
    playlist: int


class Copresence(NamedTuple):
    bin: TimeBin
    game_id: int
    same_team: bool
    playlist: int
    x: Counters
    y: Counters


def epoch_for(window_start: int) -> int:
    """Bin epoch: the window start truncated to midnight UTC."""
    return int(window_start) - int(window_start) % SECONDS_PER_DAY


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EventStore:
    game_id: np.ndarray
    timestamp: np.ndarray
    playlist: np.ndarray
    team: np.ndarray
    player: np.ndarray
    direct: np.ndarray
    indirect: np.ndarray
    betrayals: np.ndarray
    window_start: int
    window_end: int
    bin_seconds: int = 600
    # Derived indexes, filled by from_columns
    bins: np.ndarray = field(default=None, repr=False)
    weekday: np.ndarray = field(default=None, repr=False)
    players: np.ndarray = field(default=None, repr=False)
    player_code: np.ndarray = field(default=None, repr=False)
    player_order: np.ndarray = field(default=None, repr=False)
    player_starts: np.ndarray = field(default=None, repr=False)
    game_index: np.ndarray = field(default=None, repr=False)
    game_starts: np.ndarray = field(default=None, repr=False)
    playlists: np.ndarray = field(default=None, repr=False)

    @classmethod
    def from_columns(
        cls,
        game_id, timestamp, playlist, team, player, direct, indirect, betrayals,
        window_start: int,
        window_end: int,
        bin_seconds: Optional[int] = None,
    ) -> "EventStore":
        """Sort columns canonically and build the player and game indexes."""
        bin_seconds = int(bin_seconds or settings.BIN_SECONDS)
        if bin_seconds < 1:
            raise ParameterError("bin width must be at least one second")
        cols = [
            np.asarray(game_id, dtype=np.uint64),
            np.asarray(timestamp, dtype=np.int64),
            np.asarray(playlist, dtype=np.int64),
            np.asarray(team, dtype=np.int64),
            np.asarray(player, dtype=np.uint64),
            np.asarray(direct, dtype=np.int64),
            np.asarray(indirect, dtype=np.int64),
            np.asarray(betrayals, dtype=np.int64),
        ]
        order = np.lexsort((cols[4], cols[3], cols[0], cols[1]))
        cols = [np.ascontiguousarray(c[order]) for c in cols]
        gid, ts, pl, tm, pid = cols[:5]

        epoch = epoch_for(window_start)
        bins = (ts - epoch) // bin_seconds
        weekday = (ts // SECONDS_PER_DAY + 3) % 7  # 1970-01-01 was a Thursday; Monday = 0

        players, player_code = np.unique(pid, return_inverse=True)
        player_code = player_code.astype(np.int64).reshape(-1)
        player_order = np.argsort(player_code, kind="stable")
        player_starts = np.zeros(players.size + 1, dtype=np.int64)
        np.cumsum(np.bincount(player_code, minlength=players.size), out=player_starts[1:])

        if gid.size:
            boundary = np.flatnonzero((gid[1:] != gid[:-1]) | (ts[1:] != ts[:-1])) + 1
            game_starts = np.concatenate(([0], boundary, [gid.size])).astype(np.int64)
        else:
            game_starts = np.zeros(1, dtype=np.int64)
        game_index = np.repeat(np.arange(game_starts.size - 1), np.diff(game_starts))

        store = cls(
            *[_readonly(c) for c in cols],
            window_start=int(window_start),
            window_end=int(window_end),
            bin_seconds=bin_seconds,
            bins=_readonly(bins),
            weekday=_readonly(weekday),
            players=_readonly(players),
            player_code=_readonly(player_code),
            player_order=_readonly(player_order),
            player_starts=_readonly(player_starts),
            game_index=_readonly(game_index),
            game_starts=_readonly(game_starts),
            playlists=_readonly(np.unique(pl)),
        )
        return store

    # -- sizes -----------------------------------------------------------

    @property
    def epoch(self) -> int:
        return epoch_for(self.window_start)

    @property
    def n_events(self) -> int:
        return int(self.game_id.size)

    @property
    def n_players(self) -> int:
        return int(self.players.size)

    @property
    def n_games(self) -> int:
        return int(self.game_starts.size - 1)

    @property
    def total_bins(self) -> int:
        span = max(self.window_end - self.epoch, 0)
        return -(-span // self.bin_seconds)

    # -- lookups ---------------------------------------------------------

    def has_player(self, x: int) -> bool:
        if x < 0 or self.players.size == 0:
            return False
        i = int(np.searchsorted(self.players, np.uint64(x)))
        return i < self.players.size and int(self.players[i]) == x

    def code_of(self, x: int) -> int:
        """Dense index of a player; unknown players raise."""
        if not self.has_player(x):
            raise UnknownPlayerError(x)
        return int(np.searchsorted(self.players, np.uint64(x)))

    def codes_of(self, ids) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.uint64)
        codes = np.searchsorted(self.players, ids)
        bad = (codes >= self.players.size) | (self.players[np.minimum(codes, max(self.players.size - 1, 0))] != ids) \
            if self.players.size else np.ones(ids.shape, dtype=bool)
        if np.any(bad):
            raise UnknownPlayerError(int(ids[np.flatnonzero(bad)[0]]))
        return codes.astype(np.int64)

    def events_of_code(self, code: int) -> np.ndarray:
        return self.player_order[self.player_starts[code]:self.player_starts[code + 1]]

    def events_of(self, x: int) -> np.ndarray:
        """Event offsets of a player, time sorted."""
        return self.events_of_code(self.code_of(x))

    def n_games_of(self, x: int) -> int:
        """N_x: the number of games played by x."""
        c = self.code_of(x)
        return int(self.player_starts[c + 1] - self.player_starts[c])

    def games_per_player(self) -> np.ndarray:
        """N_x for every player, aligned with `players`."""
        return np.diff(self.player_starts)

    def games_of(self, x: int) -> List[GameRef]:
        ev = self.events_of(x)
        return [
            GameRef(int(self.game_id[e]), TimeBin(int(self.bins[e])), int(self.team[e]), int(self.playlist[e]))
            for e in ev
        ]

    def game_members(self, g: int) -> np.ndarray:
        return np.arange(self.game_starts[g], self.game_starts[g + 1])

    def shared_events(self, x: int, y: int) -> Tuple[np.ndarray, np.ndarray]:
        """Aligned event offsets of x and y in their shared games, time sorted."""
        ex = self.events_of(x)
        ey = self.events_of(y)
        if x == y:
            return ex[:0], ey[:0]
        _, ix, iy = np.intersect1d(self.game_index[ex], self.game_index[ey], assume_unique=True, return_indices=True)
        return ex[ix], ey[iy]

    def copresence(self, x: int, y: int) -> List[Copresence]:
        """One entry per shared game, time sorted."""
        ex, ey = self.shared_events(x, y)
        out = []
        for a, b in zip(ex, ey):
            out.append(Copresence(
                bin=TimeBin(int(self.bins[a])),
                game_id=int(self.game_id[a]),
                same_team=bool(self.team[a] == self.team[b]),
                playlist=int(self.playlist[a]),
                x=Counters(int(self.direct[a]), int(self.indirect[a]), int(self.betrayals[a])),
                y=Counters(int(self.direct[b]), int(self.indirect[b]), int(self.betrayals[b])),
            ))
        return out

    def event(self, i: int) -> InteractionEvent:
        return InteractionEvent(
            int(self.game_id[i]), int(self.timestamp[i]), int(self.playlist[i]), int(self.team[i]),
            PlayerId(int(self.player[i])), int(self.direct[i]), int(self.indirect[i]), int(self.betrayals[i]),
        )

    def checksum(self) -> str:
        """sha256 over the canonical columns and window."""
        h = hashlib.sha256()
        h.update(f"{self.window_start}:{self.window_end}:{self.bin_seconds}".encode())
        for col in (self.game_id, self.timestamp, self.playlist, self.team, self.player,
                    self.direct, self.indirect, self.betrayals):
            h.update(np.ascontiguousarray(col).tobytes())
        return h.hexdigest()


# ============================================================================
# Event log format
# ============================================================================

def parse_int(token: str, path: str, line_no: int, name: str, minimum: int = 0, limit: int = ID_LIMIT) -> int:
    try:
        value = int(token)
    except ValueError:
        raise InputFormatError(f"field '{name}' is not an integer: {token!r}", path=path, line=line_no)
    if value < minimum:
        raise InputFormatError(f"field '{name}' must be >= {minimum}: {value}", path=path, line=line_no)
    if value >= limit:
        raise InputFormatError(f"field '{name}' overflows: {value} >= {limit}", path=path, line=line_no)
    return value


def text_lines(path: str) -> Iterator[Tuple[int, str]]:
    """Numbered lines of a UTF-8 text file; a bad byte sequence is reported on its line."""
    with open(path, "rb") as f:
        for line_no, raw in enumerate(f, start=1):
            try:
                text = raw.decode("utf-8")
            except UnicodeDecodeError as e:
                raise InputFormatError(f"invalid UTF-8 at byte {e.start}", path=path, line=line_no)
            yield line_no, text.rstrip("\r\n")


def _parse_header(text: str) -> Optional[Tuple[int, int]]:
    parts = text.lstrip("#").split()
    if len(parts) != 2:
        return None
    try:
        start, end = int(parts[0]), int(parts[1])
    except ValueError:
        return None
    return start, end


def _read_tsv(path: str, bin_seconds: Optional[int]) -> EventStore:
    columns: List[List[int]] = [[] for _ in EVENT_FIELDS]
    line_numbers: List[int] = []
    window: Optional[Tuple[int, int]] = None

    for line_no, text in text_lines(path):
        if not text.strip():
            continue
        if text.startswith("#"):
            if window is None and not line_numbers:
                window = _parse_header(text)
                if window is not None and not all(-VALUE_LIMIT <= w < VALUE_LIMIT for w in window):
                    raise InputFormatError("window bounds overflow a 64-bit timestamp", path=path, line=line_no)
                if window is not None and window[1] <= window[0]:
                    raise InputFormatError("window_end must exceed window_start", path=path, line=line_no)
            continue
        tokens = text.split("\t")
        if len(tokens) != len(EVENT_FIELDS):
            raise InputFormatError(
                f"expected {len(EVENT_FIELDS)} tab-separated fields, found {len(tokens)}", path=path, line=line_no
            )
        for i, (token, name, limit) in enumerate(zip(tokens, EVENT_FIELDS, FIELD_LIMITS)):
            columns[i].append(parse_int(token, path, line_no, name, limit=limit))
        line_numbers.append(line_no)

    lines = np.asarray(line_numbers, dtype=np.int64)
    gid = np.asarray(columns[0], dtype=np.uint64)
    ts = np.asarray(columns[1], dtype=np.int64)
    pid = np.asarray(columns[4], dtype=np.uint64)

    if window is None:
        window = (int(ts.min()), int(ts.max()) + 1) if ts.size else (0, 0)
    else:
        outside = np.flatnonzero((ts < window[0]) | (ts >= window[1]))
        if outside.size:
            i = outside[0]
            raise InputFormatError(
                f"timestamp {int(ts[i])} outside declared window [{window[0]}, {window[1]})",
                path=path, line=int(lines[i]),
            )

    if gid.size:
        # All events of one game share one timestamp
        order = np.lexsort((lines, gid))
        same_game = gid[order][1:] == gid[order][:-1]
        clash = np.flatnonzero(same_game & (ts[order][1:] != ts[order][:-1]))
        if clash.size:
            raise InputFormatError(
                f"game {int(gid[order][clash[0] + 1])} has more than one timestamp",
                path=path, line=int(lines[order][clash[0] + 1]),
            )
        # Duplicate (game_id, player)
        order = np.lexsort((lines, pid, gid))
        dup = np.flatnonzero((gid[order][1:] == gid[order][:-1]) & (pid[order][1:] == pid[order][:-1]))
        if dup.size:
            i = order[dup[0] + 1]
            raise InputFormatError(
                f"duplicate record for game {int(gid[i])} and player {int(pid[i])}", path=path, line=int(lines[i])
            )

    return EventStore.from_columns(*columns, window_start=window[0], window_end=window[1], bin_seconds=bin_seconds)


FORMATS = {
    "tsv": _read_tsv,
}


def ingest(path, format: str = "tsv", bin_seconds: Optional[int] = None) -> EventStore:
    """
    Parse an event log into an immutable EventStore.

    Args:
        path: Event log path
        format: Record format id (see FORMATS)
        bin_seconds: Bin width; defaults to settings.BIN_SECONDS

    Returns:
        EventStore holding every record exactly once
    """
    reader = FORMATS.get(format)
    if reader is None:
        raise ParameterError(f"unknown record format '{format}' (known: {', '.join(sorted(FORMATS))})")
    path = str(path)
    store = reader(path, bin_seconds)
    logger.info(
        "store_ingested",
        path=path,
        events=store.n_events,
        players=store.n_players,
        games=store.n_games,
        total_bins=store.total_bins,
    )
    return store


def format_events(store: EventStore) -> str:
    rows = [f"# {store.window_start} {store.window_end}"]
    cols = (store.game_id, store.timestamp, store.playlist, store.team, store.player,
            store.direct, store.indirect, store.betrayals)
    for rec in zip(*(c.tolist() for c in cols)):
        rows.append("\t".join(map(str, rec)))
    return "\n".join(rows) + "\n"


def dump(store: EventStore, path) -> None:
    """Write the canonical event log; ingest(dump(store)) reproduces it bit for bit."""
    Path(path).write_text(format_events(store), encoding="utf-8")


# ============================================================================
# Label and name-map sidecars
# ============================================================================

@dataclass(frozen=True)
class Labels:
    rater: np.ndarray
    target: np.ndarray
    label: np.ndarray

    @property
    def raters(self) -> np.ndarray:
        return np.unique(self.rater)

    def positive_keys(self) -> set:
        mask = self.label == 1
        return set(zip(self.rater[mask].tolist(), self.target[mask].tolist()))

    def __len__(self) -> int:
        return int(self.rater.size)


def load_labels(path) -> Labels:
    """Parse `rater_id target_id label`; unlisted co-played pairs are non-friends."""
    path = str(path)
    raters: List[int] = []
    targets: List[int] = []
    flags: List[int] = []
    seen: Dict[Tuple[int, int], int] = {}
    for line_no, text in text_lines(path):
        text = text.strip()
        if not text or text.startswith("#"):
            continue
        tokens = text.split()
        if len(tokens) != 3:
            raise InputFormatError(f"expected 3 fields, found {len(tokens)}", path=path, line=line_no)
        rater = parse_int(tokens[0], path, line_no, "rater_id")
        target = parse_int(tokens[1], path, line_no, "target_id")
        label = parse_int(tokens[2], path, line_no, "label")
        if label not in (0, 1):
            raise InputFormatError(f"label must be 0 or 1: {label}", path=path, line=line_no)
        if (rater, target) in seen:
            raise InputFormatError(
                f"duplicate label for ({rater}, {target}), first on line {seen[(rater, target)]}",
                path=path, line=line_no,
            )
        seen[(rater, target)] = line_no
        raters.append(rater)
        targets.append(target)
        flags.append(label)
    return Labels(
        rater=np.asarray(raters, dtype=np.uint64),
        target=np.asarray(targets, dtype=np.uint64),
        label=np.asarray(flags, dtype=np.int8),
    )


def write_labels(path, labels: Labels) -> None:
    order = np.lexsort((labels.target, labels.rater))
    lines = [f"{r}\t{t}\t{l}" for r, t, l in zip(
        labels.rater[order].tolist(), labels.target[order].tolist(), labels.label[order].tolist()
    )]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def load_name_map(path) -> Dict[int, str]:
    path = str(path)
    names: Dict[int, str] = {}
    for line_no, text in text_lines(path):
        if not text.strip() or text.startswith("#"):
            continue
        tokens = text.split("\t", 1)
        if len(tokens) != 2 or not tokens[1]:
            raise InputFormatError("expected 'player_id<TAB>original_name'", path=path, line=line_no)
        names[parse_int(tokens[0], path, line_no, "player_id")] = tokens[1]
    return names


def write_name_map(path, names: Dict[int, str]) -> None:
    Path(path).write_text("".join(f"{pid}\t{names[pid]}\n" for pid in sorted(names)), encoding="utf-8")
