"""
Feature service module.

Computes the nine pair features for every (focal, co-player) pair in bulk:
the coplay table of a chunk of focal players is reduced segment by segment,
chunks run on the worker pool and are concatenated in submission order.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, NamedTuple, Optional

import numpy as np
from joblib import Parallel, delayed

from ..config import settings
from ..exceptions import InputFormatError
from ..logging_setup import logger
from . import cooperative_features as coop
from . import temporal_features as temporal
from .interaction_store import EventStore, parse_int, text_lines
from .pair_series import build_coplay_table, build_series, session_counts

FEATURE_NAMES = ("ac", "n_xy", "norm_freq", "h_t", "h_s", "h_st", "assists", "indirect", "betrayals")
TEMPORAL_FEATURES = FEATURE_NAMES[:6]
COOPERATIVE_FEATURES = FEATURE_NAMES[6:]
INTEGER_FEATURES = {"ac", "n_xy", "assists", "indirect", "betrayals"}
FEATURE_LABELS = {
    "ac": "autocorrelation AC_xy",
    "n_xy": "pair frequency N_xy",
    "norm_freq": "normalized pair frequency N_xy/N_x",
    "h_t": "schedule entropy H_t",
    "h_s": "spatial entropy H_s",
    "h_st": "joint entropy H_st",
    "assists": "direct assists A_xy",
    "indirect": "indirect assists V_xy",
    "betrayals": "betrayals B_xy",
}


class PairFeatures(NamedTuple):
    ac: int
    n_xy: int
    norm_freq: float
    h_t: float
    h_s: float
    h_st: float
    assists: int
    indirect: int
    betrayals: int


@dataclass(frozen=True)
class FeatureMatrix:
    """Pairs sorted by (x, y), one row of FEATURE_NAMES values each."""
    x: np.ndarray
    y: np.ndarray
    values: np.ndarray
    n_x: np.ndarray
    sessions: Optional[np.ndarray] = None
    names: tuple = field(default=FEATURE_NAMES)

    def __len__(self) -> int:
        return int(self.x.size)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def take(self, idx) -> "FeatureMatrix":
        return FeatureMatrix(
            x=self.x[idx], y=self.y[idx], values=self.values[idx], n_x=self.n_x[idx],
            sessions=None if self.sessions is None else self.sessions[idx], names=self.names,
        )


def _entropy_tables(store: EventStore):
    return {kind: temporal.player_entropies(store, kind) for kind in temporal.ENTROPY_KINDS}


def _features_for_chunk(store: EventStore, codes: np.ndarray, tau_max: int, entropies) -> FeatureMatrix:
    table = build_coplay_table(store, codes)
    px, py = table.pair_x, table.pair_y
    offsets, bins = table.distinct_bins()

    ac = temporal.batch_autocorrelation(offsets, bins, tau_max)
    n_xy = np.diff(table.pair_starts)
    n_x = store.games_per_player()[px]
    assists, indirect, betrayals = coop.cooperative_columns(store, table)

    sessions = session_counts(offsets, bins)

    values = np.column_stack([
        ac.astype(np.float64),
        n_xy.astype(np.float64),
        n_xy / n_x,
        entropies["schedule"][px] + entropies["schedule"][py],
        entropies["spatial"][px] + entropies["spatial"][py],
        entropies["joint"][px] + entropies["joint"][py],
        assists.astype(np.float64),
        indirect.astype(np.float64),
        betrayals.astype(np.float64),
    ]) if px.size else np.zeros((0, len(FEATURE_NAMES)))

    return FeatureMatrix(
        x=store.players[px], y=store.players[py], values=values, n_x=n_x.astype(np.int64), sessions=sessions,
    )


def concat(parts: List[FeatureMatrix]) -> FeatureMatrix:
    return FeatureMatrix(
        x=np.concatenate([p.x for p in parts]),
        y=np.concatenate([p.y for p in parts]),
        values=np.concatenate([p.values for p in parts]),
        n_x=np.concatenate([p.n_x for p in parts]),
        sessions=np.concatenate([p.sessions for p in parts]),
    )


def compute_features(
    store: EventStore,
    focal: Optional[Iterable[int]] = None,
    tau_max: Optional[int] = None,
    threads: Optional[int] = None,
    all_lags: bool = False,
) -> FeatureMatrix:
    """
    Nine features for every pair (x, y), x focal, with at least one shared game.

    Args:
        store: Ingested event store
        focal: Focal player ids; all players when None
        tau_max: Autocorrelation lag bound in bins
        threads: Worker count; never changes the result
        all_lags: Use every lag up to T - 1 (degenerate count mode)
    """
    tau_max = settings.TAU_MAX if tau_max is None else tau_max
    if all_lags:
        tau_max = max(store.total_bins - 1, 1)
    threads = threads or settings.THREADS

    if focal is None:
        codes = np.arange(store.n_players, dtype=np.int64)
    else:
        ids = np.asarray(sorted(set(int(f) for f in focal)), dtype=np.uint64)
        codes = store.codes_of(ids) if ids.size else np.zeros(0, dtype=np.int64)

    entropies = _entropy_tables(store)
    n_chunks = max(1, min(codes.size, 4 * threads))
    chunks = [c for c in np.array_split(codes, n_chunks) if c.size] or [codes]

    parts = Parallel(n_jobs=threads, prefer="threads")(
        delayed(_features_for_chunk)(store, chunk, tau_max, entropies) for chunk in chunks
    )
    matrix = concat(parts)
    logger.info("features_computed", focal=int(codes.size), pairs=len(matrix), tau_max=tau_max, threads=threads)
    return matrix


def pair_features(store: EventStore, x: int, y: int, tau_max: Optional[int] = None) -> PairFeatures:
    """Per-pair path, independent of the bulk reductions."""
    tau_max = settings.TAU_MAX if tau_max is None else tau_max
    series = build_series(store, x, y)
    n_xy, ratio = temporal.pair_frequency(store, x, y)
    return PairFeatures(
        ac=temporal.autocorrelation(series, tau_max),
        n_xy=n_xy,
        norm_freq=ratio,
        h_t=temporal.pair_entropy(store, x, y, "schedule"),
        h_s=temporal.pair_entropy(store, x, y, "spatial"),
        h_st=temporal.pair_entropy(store, x, y, "joint"),
        assists=coop.direct_assists(store, x, y),
        indirect=coop.indirect_assists(store, x, y),
        betrayals=coop.betrayals_toward(store, x, y),
    )


# ============================================================================
# Feature dump
# ============================================================================

def _fmt(name: str, v: float) -> str:
    return str(int(v)) if name in INTEGER_FEATURES else repr(float(v))


def format_features(matrix: FeatureMatrix) -> str:
    lines = ["# x\ty\t" + "\t".join(matrix.names)]
    for i, (x, y) in enumerate(zip(matrix.x.tolist(), matrix.y.tolist())):
        row = matrix.values[i]
        lines.append(f"{x}\t{y}\t" + "\t".join(_fmt(n, v) for n, v in zip(matrix.names, row.tolist())))
    return "\n".join(lines) + "\n"


def write_features(path, matrix: FeatureMatrix) -> None:
    Path(path).write_text(format_features(matrix), encoding="utf-8")


def read_features(path) -> FeatureMatrix:
    """Parse a feature dump; the rater's N_x is recovered as N_xy / (N_xy / N_x)."""
    path = str(path)
    xs, ys, rows = [], [], []
    width = 2 + len(FEATURE_NAMES)
    for line_no, raw in text_lines(path):
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        tokens = text.split("\t")
        if len(tokens) != width:
            raise InputFormatError(f"expected {width} fields, found {len(tokens)}", path=path, line=line_no)
        xs.append(parse_int(tokens[0], path, line_no, "x"))
        ys.append(parse_int(tokens[1], path, line_no, "y"))
        try:
            rows.append([float(t) for t in tokens[2:]])
        except ValueError as e:
            raise InputFormatError(f"bad number: {e}", path=path, line=line_no)
    values = np.asarray(rows, dtype=np.float64).reshape(-1, len(FEATURE_NAMES))
    n_xy = values[:, FEATURE_NAMES.index("n_xy")]
    ratio = values[:, FEATURE_NAMES.index("norm_freq")]
    with np.errstate(divide="ignore", invalid="ignore"):
        n_x = np.where(ratio > 0, np.rint(n_xy / ratio), 0).astype(np.int64)
    return FeatureMatrix(
        x=np.asarray(xs, dtype=np.uint64), y=np.asarray(ys, dtype=np.uint64), values=values, n_x=n_x,
    )
