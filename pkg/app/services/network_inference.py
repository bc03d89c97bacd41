"""
Network inference service.

Chooses an autocorrelation threshold by matching the surveyed degree
distribution (KL rule for the undersampled tail, max-degree cap for the
oversampled tail) and materializes the population graph of pairs at or
above it.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Set, Tuple

import numpy as np
from joblib import Parallel, delayed

from ..config import settings
from ..exceptions import DegenerateDataError, ParameterError
from ..logging_setup import logger
from ..schemas import RecoveryScore
from .graph_stats import InferredGraph, from_edges
from .interaction_store import EventStore, Labels
from .pair_series import build_coplay_table, session_counts
from .temporal_features import batch_autocorrelation

RULES = ("under", "over")
MIN_SHARED_SESSIONS = 3


@dataclass(frozen=True)
class DegreeDistribution:
    support: np.ndarray
    prob: np.ndarray

    @classmethod
    def from_degrees(cls, degrees) -> "DegreeDistribution":
        degrees = np.asarray(degrees, dtype=np.int64)
        if degrees.size == 0:
            return cls(support=np.zeros(0, dtype=np.int64), prob=np.zeros(0))
        support, counts = np.unique(degrees, return_counts=True)
        return cls(support=support, prob=counts / degrees.size)

    @classmethod
    def from_dict(cls, mapping) -> "DegreeDistribution":
        items = sorted(mapping.items())
        return cls(
            support=np.asarray([k for k, _ in items], dtype=np.int64),
            prob=np.asarray([v for _, v in items], dtype=np.float64),
        )

    @property
    def max_degree(self) -> int:
        return int(self.support[-1]) if self.support.size else 0

    def as_dict(self):
        return dict(zip(self.support.tolist(), self.prob.tolist()))


@dataclass(frozen=True)
class ScoredPairs:
    """Pairs with their AC score; `sessions` counts shared play sessions when known."""
    x: np.ndarray
    y: np.ndarray
    score: np.ndarray
    sessions: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return int(self.x.size)


@dataclass(frozen=True)
class ThresholdChoice:
    threshold: float
    rule: str
    objective: float
    candidates: np.ndarray
    kl: np.ndarray
    max_degree: np.ndarray
    edges: np.ndarray


def kl_divergence(p: DegreeDistribution, q: DegreeDistribution, epsilon: Optional[float] = None) -> float:
    """
    sum_i P(i) ln(P(i) / Q(i)) over P's support, Q(i) replaced by epsilon where
    it is zero. Q is not renormalized, so tiny negative values can occur.
    """
    epsilon = settings.EPSILON_KL if epsilon is None else epsilon
    total = float(p.prob.sum())
    if abs(total - 1.0) > 1e-9:
        raise ParameterError(f"P sums to {total!r}, not 1")
    mask = p.prob > 0
    ps, pp = p.support[mask], p.prob[mask]
    idx = np.searchsorted(q.support, ps)
    hit = (idx < q.support.size) & (q.support[np.minimum(idx, max(q.support.size - 1, 0))] == ps) \
        if q.support.size else np.zeros(ps.shape, dtype=bool)
    qq = np.full(ps.shape, 0.0)
    qq[hit] = q.prob[idx[hit]]
    qq = np.where(qq > 0, qq, epsilon)
    return float(np.sum(pp * np.log(pp / qq)))


# ============================================================================
# Scores
# ============================================================================

def respondent_scores(x, y, ac) -> ScoredPairs:
    return ScoredPairs(x=np.asarray(x, dtype=np.uint64), y=np.asarray(y, dtype=np.uint64),
                       score=np.asarray(ac, dtype=np.float64))


def _population_chunk(store: EventStore, codes: np.ndarray, tau_max: int):
    table = build_coplay_table(store, codes)
    offsets, bins = table.distinct_bins()
    upper = table.pair_y > table.pair_x
    ac = batch_autocorrelation(offsets, bins, tau_max)
    sessions = session_counts(offsets, bins)
    return (store.players[table.pair_x[upper]], store.players[table.pair_y[upper]],
            ac[upper], sessions[upper])


def population_scores(
    store: EventStore,
    tau_max: Optional[int] = None,
    threads: Optional[int] = None,
    all_lags: bool = False,
) -> ScoredPairs:
    """AC and shared-session count of every co-playing unordered pair (x < y)."""
    tau_max = settings.TAU_MAX if tau_max is None else tau_max
    if all_lags:
        tau_max = max(store.total_bins - 1, 1)
    threads = threads or settings.THREADS
    codes = np.arange(store.n_players, dtype=np.int64)
    chunks = [c for c in np.array_split(codes, max(1, min(codes.size, 4 * threads))) if c.size] or [codes]
    parts = Parallel(n_jobs=threads, prefer="threads")(
        delayed(_population_chunk)(store, chunk, tau_max) for chunk in chunks
    )
    scored = ScoredPairs(
        x=np.concatenate([p[0] for p in parts]),
        y=np.concatenate([p[1] for p in parts]),
        score=np.concatenate([p[2] for p in parts]).astype(np.float64),
        sessions=np.concatenate([p[3] for p in parts]),
    )
    logger.info("population_scored", pairs=len(scored), tau_max=tau_max)
    return scored


def survey_degrees(labels: Labels, pairs: ScoredPairs) -> np.ndarray:
    """Each respondent's count of labeled friends among their co-players; zeros dropped."""
    positives = labels.positive_keys()
    is_friend = np.fromiter(
        ((a, b) in positives for a, b in zip(pairs.x.tolist(), pairs.y.tolist())), dtype=bool, count=len(pairs),
    )
    _, degrees = np.unique(pairs.x[is_friend], return_counts=True)
    return degrees


def induced_degrees(pairs: ScoredPairs, threshold: float) -> np.ndarray:
    """Degrees of the focal side of the pairs at or above threshold; isolates dropped."""
    _, degrees = np.unique(pairs.x[pairs.score >= threshold], return_counts=True)
    return degrees


def candidate_thresholds(scores, max_candidates: Optional[int] = None) -> np.ndarray:
    """Observed unique scores, or a log-spaced subsample snapped to observed values."""
    max_candidates = max_candidates or settings.MAX_THRESHOLD_CANDIDATES
    unique = np.unique(np.asarray(scores, dtype=np.float64))
    if unique.size <= max_candidates:
        return unique
    has_zero = bool(unique[0] <= 0)
    positive = unique[unique > 0]
    grid = np.geomspace(positive[0], positive[-1], max_candidates - int(has_zero))
    snapped = positive[np.minimum(np.searchsorted(positive, grid, side="left"), positive.size - 1)]
    out = np.unique(snapped)
    if has_zero:
        out = np.r_[unique[0], out]
    return out


def _sweep_cell(pairs: ScoredPairs, threshold: float, p: Optional[DegreeDistribution], epsilon: float):
    degrees = induced_degrees(pairs, threshold)
    kl = kl_divergence(p, DegreeDistribution.from_degrees(degrees), epsilon) if p is not None else float("nan")
    return kl, int(degrees.max()) if degrees.size else 0, int(degrees.sum())


def _sweep(pairs, candidates, p, epsilon, threads):
    cells = Parallel(n_jobs=threads or settings.THREADS, prefer="threads")(
        delayed(_sweep_cell)(pairs, float(t), p, epsilon) for t in candidates
    )
    kl = np.asarray([c[0] for c in cells])
    max_degree = np.asarray([c[1] for c in cells], dtype=np.int64)
    edges = np.asarray([c[2] for c in cells], dtype=np.int64)
    return kl, max_degree, edges


def threshold_undersampled(
    survey: DegreeDistribution,
    candidates,
    pairs: ScoredPairs,
    epsilon: Optional[float] = None,
    threads: Optional[int] = None,
) -> ThresholdChoice:
    """argmin_theta KL(P || Q_theta); ties go to the larger threshold."""
    candidates = np.sort(np.asarray(candidates, dtype=np.float64))
    if candidates.size == 0:
        raise DegenerateDataError("no candidate thresholds")
    kl, max_degree, edges = _sweep(pairs, candidates, survey, epsilon, threads)
    if not np.any(edges > 0):
        raise DegenerateDataError("every candidate threshold induces an empty graph")
    kl = np.where(edges > 0, kl, np.inf)
    best = float(kl.min())
    i = int(np.flatnonzero(kl == best).max())
    if best < 0:
        logger.warning("kl_smoothing_artifact", kl=best)
    logger.info("threshold_selected", rule="under", threshold=float(candidates[i]), kl=best,
                candidates=int(candidates.size))
    return ThresholdChoice(threshold=float(candidates[i]), rule="under", objective=best,
                           candidates=candidates, kl=kl, max_degree=max_degree, edges=edges)


def threshold_oversampled(
    survey_max_degree: int,
    candidates,
    pairs: ScoredPairs,
    threads: Optional[int] = None,
) -> ThresholdChoice:
    """The boundary threshold: smallest candidate whose induced max degree is within the cap."""
    candidates = np.sort(np.asarray(candidates, dtype=np.float64))
    if candidates.size == 0:
        raise DegenerateDataError("no candidate thresholds")
    kl, max_degree, edges = _sweep(pairs, candidates, None, None, threads)
    ok = np.flatnonzero(max_degree <= survey_max_degree)
    if ok.size == 0:
        raise DegenerateDataError(f"no candidate keeps the maximum degree within {survey_max_degree}")
    i = int(ok.min())
    logger.info("threshold_selected", rule="over", threshold=float(candidates[i]), cap=int(survey_max_degree),
                candidates=int(candidates.size))
    return ThresholdChoice(threshold=float(candidates[i]), rule="over", objective=float(max_degree[i]),
                           candidates=candidates, kl=kl, max_degree=max_degree, edges=edges)


def select_threshold(rule: str, degrees: np.ndarray, candidates, pairs: ScoredPairs,
                     epsilon: Optional[float] = None, threads: Optional[int] = None) -> ThresholdChoice:
    if rule == "under":
        return threshold_undersampled(DegreeDistribution.from_degrees(degrees), candidates, pairs,
                                      epsilon=epsilon, threads=threads)
    if rule == "over":
        cap = int(np.max(degrees)) if len(degrees) else 0
        return threshold_oversampled(cap, candidates, pairs, threads=threads)
    raise ParameterError(f"unknown threshold rule '{rule}' (known: {', '.join(RULES)})")


def write_sweep(path, choice: ThresholdChoice) -> None:
    lines = [f"# rule {choice.rule}", f"# chosen {choice.threshold!r}", "# threshold\tkl\tmax_degree\tedges"]
    for t, k, m, e in zip(choice.candidates.tolist(), choice.kl.tolist(), choice.max_degree.tolist(),
                          choice.edges.tolist()):
        lines.append(f"{t!r}\t{k!r}\t{m}\t{e}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ============================================================================
# Materialization and recovery
# ============================================================================

def _filter_chunk(x, y, score, threshold):
    keep = score >= threshold
    return np.column_stack([x[keep], y[keep]])


def materialize(pairs: ScoredPairs, threshold: float, rule: str = "", threads: Optional[int] = None) -> InferredGraph:
    """Edge iff score >= threshold; nodes are the edge endpoints."""
    if not np.isfinite(threshold):
        raise ParameterError(f"threshold must be finite, got {threshold}")
    threads = threads or settings.THREADS
    bounds = np.linspace(0, len(pairs), max(1, threads) + 1).astype(np.int64)
    parts = Parallel(n_jobs=threads, prefer="threads")(
        delayed(_filter_chunk)(pairs.x[a:b], pairs.y[a:b], pairs.score[a:b], threshold)
        for a, b in zip(bounds[:-1], bounds[1:])
    )
    edges = np.concatenate(parts) if parts else np.zeros((0, 2), dtype=np.uint64)
    graph = from_edges(edges, threshold=threshold, rule=rule)
    logger.info("graph_materialized", threshold=threshold, rule=rule, nodes=graph.n_nodes, edges=graph.n_edges)
    return graph


def truth_flags(pairs: ScoredPairs, truth: Set[Tuple[int, int]]) -> np.ndarray:
    """Whether each unordered pair is a planted friendship."""
    return np.fromiter(
        ((min(a, b), max(a, b)) in truth for a, b in zip(pairs.x.tolist(), pairs.y.tolist())),
        dtype=bool, count=len(pairs),
    )


def normalize_truth(edges: Iterable[Tuple[int, int]]) -> Set[Tuple[int, int]]:
    return {(min(a, b), max(a, b)) for a, b in edges if a != b}


def _eligible(pairs: ScoredPairs, min_sessions: int) -> np.ndarray:
    if pairs.sessions is None:
        raise ParameterError("recovery scoring needs shared-session counts")
    return pairs.sessions >= min_sessions


def _score(tp: int, n_pred: int, n_true: int, threshold: float, eligible: int) -> RecoveryScore:
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_true if n_true else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return RecoveryScore(threshold=threshold, precision=precision, recall=recall, f1=f1, eligible_pairs=eligible)


def recovery_scores(pairs: ScoredPairs, truth: Set[Tuple[int, int]], threshold: float,
                    min_sessions: int = MIN_SHARED_SESSIONS) -> RecoveryScore:
    """Precision, recall and F1 of {score >= threshold} against planted ties, on eligible pairs."""
    mask = _eligible(pairs, min_sessions)
    is_true = truth_flags(pairs, truth)[mask]
    pred = pairs.score[mask] >= threshold
    return _score(int(np.sum(pred & is_true)), int(pred.sum()), int(is_true.sum()), float(threshold),
                  int(mask.sum()))


def best_f1_sweep(pairs: ScoredPairs, truth: Set[Tuple[int, int]],
                  min_sessions: int = MIN_SHARED_SESSIONS) -> RecoveryScore:
    """Highest F1 over every observed threshold: the achievable ceiling."""
    mask = _eligible(pairs, min_sessions)
    scores = pairs.score[mask]
    is_true = truth_flags(pairs, truth)[mask]
    n_true = int(is_true.sum())
    if scores.size == 0 or n_true == 0:
        raise DegenerateDataError("no eligible planted ties to recover")
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    tp = np.cumsum(is_true[order])
    ends = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]
    n_pred = ends + 1
    precision = tp[ends] / n_pred
    recall = tp[ends] / n_true
    with np.errstate(invalid="ignore", divide="ignore"):
        f1 = np.where(precision + recall > 0, 2 * precision * recall / (precision + recall), 0.0)
    i = int(np.argmax(f1))
    return _score(int(tp[ends[i]]), int(n_pred[i]), n_true, float(s[ends[i]]), int(mask.sum()))
