"""
Synthetic world generator.

Simulates a population of players with a planted friendship graph who start
sessions at profile-weighted times, form parties with idle friends, are
matchmade into two-team games with concurrently active strangers, and emit
per-game cooperative counters. Every random choice comes from one
numpy Generator seeded with config.seed, drawn in this order:

1. friendship graph seed, then the ring-rewiring graph
2. per-agent activity rates (log-normal around the median)
3. per-agent playlist preferences (Dirichlet)
4. survey respondents
5. per 10-minute bin:
   a. one start draw per agent
   b. per starting agent, ascending: party draw; join draw per idle friend,
      ascending; session length; playlist
   c. per playlist, ascending: party order permutation; a split draw per
      multi-player party
   d. per game: timestamp offset; direct assists; indirect assists (vehicle
      playlists only); betrayals
"""
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import networkx as nx
import numpy as np

from ..exceptions import InputFormatError
from ..logging_setup import logger
from ..schemas import WorldConfig
from .interaction_store import EventStore, Labels, dump, parse_int, text_lines, write_labels, write_name_map

GAME_SECONDS = 600
BINS_PER_DAY = 86400 // GAME_SECONDS
PLAYER_ID_OFFSET = 1000

NAME_PREFIXES = ("Noble", "Sierra", "Red", "Blue", "Ghost", "Iron", "Night", "Storm", "Echo", "Zulu", "Delta", "Nova")
NAME_STEMS = ("Spartan", "Warthog", "Ghost", "Banshee", "Pelican", "Scorpion", "Falcon", "Hornet", "Mongoose",
              "Wraith", "Elite", "Grunt")


def player_id(agent: int) -> int:
    return agent + PLAYER_ID_OFFSET


def gamertag(agent: int) -> str:
    prefix = NAME_PREFIXES[agent % len(NAME_PREFIXES)]
    stem = NAME_STEMS[(agent // len(NAME_PREFIXES)) % len(NAME_STEMS)]
    return f"{prefix}{stem}{agent}"


@dataclass
class GroundTruth:
    """Generator ledgers, keyed by player id; pair keys of shared games are (min, max)."""
    friends: List[Tuple[int, int]] = field(default_factory=list)
    respondents: List[int] = field(default_factory=list)
    activity: Dict[int, float] = field(default_factory=dict)
    games_played: Counter = field(default_factory=Counter)
    shared_games: Counter = field(default_factory=Counter)
    assists: Counter = field(default_factory=Counter)
    indirect: Counter = field(default_factory=Counter)
    betrayals: Counter = field(default_factory=Counter)


@dataclass
class World:
    config: WorldConfig
    store: EventStore
    labels: Labels
    names: Dict[int, str]
    truth: GroundTruth
    undersized_games: int = 0
    dropped_games: int = 0


# ============================================================================
# Intensity profile
# ============================================================================

def profile_table(config: WorldConfig, bins: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Relative start intensity per bin: a daily cosine peaking at the local
    peak hour with the configured peak/trough ratio, times the weekend
    multiplier on local Saturdays and Sundays, normalized to a weekly mean of 1.
    """
    if bins is None:
        bins = np.arange(config.days * BINS_PER_DAY)
    bins = np.asarray(bins, dtype=np.int64)
    local = config.start_timestamp + bins * GAME_SECONDS + GAME_SECONDS // 2 + config.utc_offset_hours * 3600.0
    hour = (local / 3600.0) % 24.0
    weekday = (np.floor(local / 86400.0).astype(np.int64) + 3) % 7
    r = config.peak_trough_ratio
    amplitude = (r - 1.0) / (r + 1.0)
    daily = 1.0 + amplitude * np.cos(2.0 * np.pi * (hour - config.peak_hour) / 24.0)
    m = config.weekend_multiplier
    weekly = np.where(weekday >= 5, m, 1.0) / ((5.0 + 2.0 * m) / 7.0)
    return daily * weekly


def profile_intensity(t: int, config: WorldConfig) -> float:
    return float(profile_table(config, np.array([t]))[0])


# ============================================================================
# Matchmaking
# ============================================================================

def pack_games(units: List[List[int]], split: List[bool], team_size: int) -> List[Tuple[List[int], List[int]]]:
    """
    Greedy two-team packing. Intact parties go to the emptier team that fits
    them; split parties are dealt one member at a time to the emptier team.
    """
    games = []
    a: List[int] = []
    b: List[int] = []
    for unit, is_split in zip(units, split):
        if is_split:
            for member in unit:
                if len(a) >= team_size and len(b) >= team_size:
                    games.append((a, b))
                    a, b = [], []
                if len(a) < team_size and (len(a) <= len(b) or len(b) >= team_size):
                    a.append(member)
                else:
                    b.append(member)
        else:
            first, second = (a, b) if len(a) <= len(b) else (b, a)
            if len(first) + len(unit) <= team_size:
                first.extend(unit)
            elif len(second) + len(unit) <= team_size:
                second.extend(unit)
            else:
                games.append((a, b))
                a, b = list(unit), []
        if len(a) >= team_size and len(b) >= team_size:
            games.append((a, b))
            a, b = [], []
    if a or b:
        games.append((a, b))
    return games


def _rebalance(a: List[int], b: List[int]) -> Optional[Tuple[List[int], List[int]]]:
    """Games with an empty team are not allowed: split the lone team, or drop a one-player game."""
    if a and b:
        return a, b
    lone = a or b
    if len(lone) < 2:
        return None
    half = len(lone) // 2
    return lone[:len(lone) - half], lone[len(lone) - half:]


# ============================================================================
# Generation
# ============================================================================

def _friend_graph(config: WorldConfig, rng: np.random.Generator) -> nx.Graph:
    graph_seed = int(rng.integers(2 ** 31))
    n = config.agents
    k = min(config.friend_mean_degree, n - 1)
    k -= k % 2
    if k < 2:
        return nx.empty_graph(n)
    return nx.watts_strogatz_graph(n, k, config.rewiring_prob, seed=graph_seed)


def generate(config: WorldConfig) -> World:
    """
    Simulate the world described by config.

    Returns:
        World with the event store, survey labels, name map and the ground-truth ledgers
    """
    rng = np.random.default_rng(config.seed)
    n = config.agents
    ts = config.team_size

    graph = _friend_graph(config, rng)
    friends = [sorted(graph.neighbors(i)) for i in range(n)]
    friend_sets = [set(f) for f in friends]
    rates = config.activity_median * np.exp(config.activity_sigma * rng.standard_normal(n))
    prefs = rng.dirichlet(np.full(config.playlist_count, config.playlist_concentration), size=n)
    n_resp = max(1, int(round(config.respondent_fraction * n)))
    respondents = np.sort(rng.choice(n, size=n_resp, replace=False))

    intensity = profile_table(config)
    session_left = np.zeros(n, dtype=np.int64)
    party_of = np.full(n, -1, dtype=np.int64)
    playlist_of = np.zeros(n, dtype=np.int64)
    next_party = 0

    truth = GroundTruth(
        friends=sorted((player_id(u), player_id(v)) for u, v in (sorted(e) for e in graph.edges())),
        respondents=[player_id(int(a)) for a in respondents],
        activity={player_id(i): float(rates[i]) for i in range(n)},
    )
    cols: List[List[int]] = [[] for _ in range(8)]
    game_id = 0
    undersized = 0
    dropped = 0

    for t in range(intensity.size):
        # a. session starts
        u = rng.random(n)
        p_start = 1.0 - np.exp(-rates * intensity[t] / BINS_PER_DAY)
        for s in np.flatnonzero((u < p_start) & (session_left == 0)).tolist():
            if session_left[s] > 0:
                continue
            # b. party formation
            members = [s]
            if rng.random() < config.party_prob:
                for f in friends[s]:
                    if session_left[f] > 0:
                        continue
                    denom = rates[f] + config.activity_median
                    join_p = config.party_join_prob * rates[f] / denom if denom > 0 else 0.0
                    if rng.random() < join_p and len(members) < ts:
                        members.append(f)
            mean = config.party_session_mean if len(members) > 1 else config.solo_session_mean
            length = int(rng.geometric(1.0 / mean))
            playlist = int(rng.choice(config.playlist_count, p=prefs[s]))
            session_left[members] = length
            party_of[members] = next_party
            playlist_of[members] = playlist
            next_party += 1

        active = np.flatnonzero(session_left > 0)
        if active.size == 0:
            continue

        # c. matchmaking
        base_ts = config.start_timestamp + t * GAME_SECONDS
        for k in range(config.playlist_count):
            pool = active[playlist_of[active] == k]
            if pool.size == 0:
                continue
            parties = np.unique(party_of[pool])
            units = [pool[party_of[pool] == p].tolist() for p in parties.tolist()]
            units = [units[i] for i in rng.permutation(len(units)).tolist()]
            split = [len(unit) > 1 and bool(rng.random() < config.party_split_prob) for unit in units]

            # d. per-game emission
            for team_a, team_b in pack_games(units, split, ts):
                teams = _rebalance(team_a, team_b)
                if teams is None:
                    dropped += 1
                    logger.debug("game_dropped", bin=t, playlist=k, players=len(team_a) + len(team_b))
                    continue
                team_a, team_b = teams
                players = team_a + team_b
                size = len(players)
                if size < 2 * ts:
                    undersized += 1
                    logger.debug("game_undersized", bin=t, playlist=k, players=size)
                game_id += 1
                stamp = base_ts + int(rng.integers(GAME_SECONDS))
                team = [0] * len(team_a) + [1] * len(team_b)
                same_friend = np.array([
                    any(q in friend_sets[p] for q in (team_a if tm == 0 else team_b))
                    for p, tm in zip(players, team)
                ])
                opp_friend = np.array([
                    any(q in friend_sets[p] for q in (team_b if tm == 0 else team_a))
                    for p, tm in zip(players, team)
                ])
                direct = rng.poisson(config.assist_rate * np.where(same_friend, config.friend_assist_multiplier, 1.0))
                if k < config.vehicle_playlists:
                    indirect = rng.poisson(
                        config.indirect_rate * np.where(same_friend, config.friend_indirect_multiplier, 1.0))
                else:
                    indirect = np.zeros(size, dtype=np.int64)
                betray = rng.poisson(config.betrayal_rate * np.where(opp_friend, config.friend_betrayal_multiplier, 1.0))

                _record_game(truth, players, team, direct, indirect, betray)
                for i, p in enumerate(players):
                    cols[0].append(game_id)
                    cols[1].append(stamp)
                    cols[2].append(k)
                    cols[3].append(team[i])
                    cols[4].append(player_id(p))
                    cols[5].append(int(direct[i]))
                    cols[6].append(int(indirect[i]))
                    cols[7].append(int(betray[i]))

        session_left[active] -= 1

    window_start = config.start_timestamp
    window_end = config.start_timestamp + config.days * 86400
    store = EventStore.from_columns(*cols, window_start=window_start, window_end=window_end,
                                    bin_seconds=GAME_SECONDS)
    labels = survey_labels(truth)
    names = {player_id(i): gamertag(i) for i in range(n)}
    if undersized or dropped:
        logger.info("games_undersized", undersized=undersized, dropped=dropped, games=game_id)
    if game_id == 0:
        logger.warning("world_empty", agents=n, days=config.days)
    logger.info("world_generated", agents=n, games=game_id, events=store.n_events,
                friendships=len(truth.friends), respondents=len(truth.respondents), seed=config.seed)
    return World(config=config, store=store, labels=labels, names=names, truth=truth,
                 undersized_games=undersized, dropped_games=dropped)


def _record_game(truth: GroundTruth, players: List[int], team: List[int], direct, indirect, betray) -> None:
    ids = [player_id(p) for p in players]
    for x in ids:
        truth.games_played[x] += 1
    for i, x in enumerate(ids):
        for j in range(i + 1, len(ids)):
            y = ids[j]
            truth.shared_games[(min(x, y), max(x, y))] += 1
        for j, y in enumerate(ids):
            if i == j:
                continue
            if team[i] == team[j]:
                if direct[i]:
                    truth.assists[(x, y)] += int(direct[i])
                if indirect[i]:
                    truth.indirect[(x, y)] += int(indirect[i])
            elif betray[i]:
                truth.betrayals[(x, y)] += int(betray[i])


def survey_labels(truth: GroundTruth) -> Labels:
    """Every respondent rates each planted friend as a friend."""
    respondents = set(truth.respondents)
    rows = []
    for a, b in truth.friends:
        if a in respondents:
            rows.append((a, b))
        if b in respondents:
            rows.append((b, a))
    rows.sort()
    arr = np.asarray(rows, dtype=np.uint64).reshape(-1, 2)
    return Labels(rater=arr[:, 0], target=arr[:, 1], label=np.ones(arr.shape[0], dtype=np.int8))


def activity_share(world: World, top_fraction: float = 0.1) -> float:
    """Share of all events contributed by the most active agents."""
    counts = np.zeros(world.config.agents, dtype=np.int64)
    for pid, c in world.truth.games_played.items():
        counts[pid - PLAYER_ID_OFFSET] = c
    total = counts.sum()
    if total == 0:
        return 0.0
    top = max(1, int(np.ceil(top_fraction * counts.size)))
    return float(np.sort(counts)[::-1][:top].sum() / total)


# ============================================================================
# Config file and world output
# ============================================================================

def load_world_config(path, **overrides) -> WorldConfig:
    """Flat key=value file, '#' comments; unknown keys are rejected by WorldConfig."""
    path = str(path)
    values: Dict[str, str] = {}
    for line_no, raw in text_lines(path):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise InputFormatError("expected 'key = value'", path=path, line=line_no)
        key, value = (s.strip() for s in text.split("=", 1))
        values[key] = value
    values.update({k: v for k, v in overrides.items() if v is not None})
    return WorldConfig(**values)


def format_world_config(config: WorldConfig) -> str:
    return "".join(f"{key} = {value}\n" for key, value in config.model_dump().items())


def write_world(out_dir, world: World) -> Dict[str, str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {name: out / name for name in
             ("events.tsv", "labels.tsv", "names.tsv", "friends.tsv", "agents.tsv", "world.conf")}
    dump(world.store, files["events.tsv"])
    write_labels(files["labels.tsv"], world.labels)
    write_name_map(files["names.tsv"], world.names)
    files["friends.tsv"].write_text("".join(f"{a}\t{b}\n" for a, b in world.truth.friends), encoding="utf-8")
    respondents = set(world.truth.respondents)
    rows = ["# player\trate\tgames\trespondent"]
    for pid in sorted(world.truth.activity):
        rows.append(f"{pid}\t{world.truth.activity[pid]!r}\t{world.truth.games_played.get(pid, 0)}\t"
                    f"{int(pid in respondents)}")
    files["agents.tsv"].write_text("\n".join(rows) + "\n", encoding="utf-8")
    files["world.conf"].write_text(format_world_config(world.config), encoding="utf-8")
    return {k: str(v) for k, v in files.items()}


def read_friends(path) -> List[Tuple[int, int]]:
    path = str(path)
    pairs = []
    for line_no, raw in text_lines(path):
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        tokens = text.split()
        if len(tokens) != 2:
            raise InputFormatError(f"expected 2 fields, found {len(tokens)}", path=path, line=line_no)
        u, v = (parse_int(t, path, line_no, "player_id") for t in tokens)
        pairs.append((u, v))
    return pairs
