"""
Evaluation service module.

Orchestrates the studies run on labeled pair features:
- normalization profile from a random player sample
- train/test splitting by pairs or by individuals
- single-feature logistic table with held-out AUC
- AUC robustness binned by the rater's activity N_x
- feature-set classification tree comparison
"""
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from ..config import settings
from ..exceptions import ConvergenceError, DegenerateDataError, ParameterError
from ..logging_setup import logger
from ..schemas import (
    ClassSummaryRow,
    FeatureTableRow,
    RobustnessPoint,
    TreeComparisonRow,
)
from . import decision_tree, logistic, roc
from .feature_service import (
    COOPERATIVE_FEATURES,
    FEATURE_NAMES,
    TEMPORAL_FEATURES,
    FeatureMatrix,
    compute_features,
)
from .graph_stats import ccdf
from .interaction_store import EventStore, Labels

FEATURE_SETS: Dict[str, Tuple[str, ...]] = {
    "all": FEATURE_NAMES,
    "no_assists": tuple(f for f in FEATURE_NAMES if f != "assists"),
    "temporal": TEMPORAL_FEATURES,
    "cooperative": COOPERATIVE_FEATURES,
    "no_ac": tuple(f for f in FEATURE_NAMES if f != "ac"),
}


@dataclass(frozen=True)
class LabeledExamples:
    x: np.ndarray
    y: np.ndarray
    values: np.ndarray
    label: np.ndarray
    n_x: np.ndarray
    names: Tuple[str, ...] = field(default=FEATURE_NAMES)

    def __len__(self) -> int:
        return int(self.x.size)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def columns(self, names: Sequence[str]) -> np.ndarray:
        return self.values[:, [self.names.index(n) for n in names]]

    def take(self, idx) -> "LabeledExamples":
        return LabeledExamples(
            x=self.x[idx], y=self.y[idx], values=self.values[idx], label=self.label[idx],
            n_x=self.n_x[idx], names=self.names,
        )


def build_examples(matrix: FeatureMatrix, labels: Labels) -> LabeledExamples:
    """Join features with labels; pairs absent from the label file are non-friends."""
    positives = labels.positive_keys()
    label = np.fromiter(
        ((a, b) in positives for a, b in zip(matrix.x.tolist(), matrix.y.tolist())),
        dtype=np.int8, count=len(matrix),
    )
    return LabeledExamples(x=matrix.x, y=matrix.y, values=matrix.values, label=label, n_x=matrix.n_x,
                           names=matrix.names)


# ============================================================================
# Normalization
# ============================================================================

@dataclass(frozen=True)
class NormalizationProfile:
    means: np.ndarray
    normalizable: np.ndarray
    sample: np.ndarray
    names: Tuple[str, ...] = field(default=FEATURE_NAMES)

    @property
    def divisors(self) -> np.ndarray:
        return np.where(self.normalizable, self.means, 1.0)


def build_normalization(
    store: EventStore,
    sample_size: Optional[int] = None,
    seed: Optional[int] = None,
    tau_max: Optional[int] = None,
    threads: Optional[int] = None,
    all_lags: bool = False,
) -> NormalizationProfile:
    """Per-feature means over all co-player pairs of a seeded uniform player sample."""
    sample_size = settings.NORMALIZATION_SAMPLE if sample_size is None else sample_size
    seed = settings.SEED if seed is None else seed
    if sample_size > store.n_players:
        raise ParameterError(f"sample of {sample_size} exceeds population of {store.n_players}")
    rng = np.random.default_rng(seed)
    sample = np.sort(rng.choice(store.players, size=sample_size, replace=False))
    matrix = compute_features(store, sample.tolist(), tau_max=tau_max, threads=threads, all_lags=all_lags)
    means = matrix.values.mean(axis=0) if len(matrix) else np.zeros(len(FEATURE_NAMES))
    normalizable = means > 0
    if not np.all(normalizable):
        logger.warning(
            "normalization_identity",
            features=[n for n, ok in zip(FEATURE_NAMES, normalizable) if not ok],
        )
    return NormalizationProfile(means=means, normalizable=normalizable, sample=sample)


def normalize(examples: LabeledExamples, profile: NormalizationProfile) -> LabeledExamples:
    return LabeledExamples(
        x=examples.x, y=examples.y, values=examples.values / profile.divisors, label=examples.label,
        n_x=examples.n_x, names=examples.names,
    )


def write_normalization(path, profile: NormalizationProfile) -> None:
    lines = ["# feature\tmean\tnormalizable"]
    lines += [f"{n}\t{float(m)!r}\t{int(ok)}" for n, m, ok in zip(profile.names, profile.means, profile.normalizable)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ============================================================================
# Splitting
# ============================================================================

def split(n: int, seed: int, groups: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Random halves of range(n), sorted.

    Without groups the halves hold n // 2 and n - n // 2 examples. With
    groups (e.g. the rater of every pair) the individuals are halved and
    every example follows its individual.
    """
    if n < 2:
        raise ParameterError(f"cannot split {n} examples")
    rng = np.random.default_rng(seed)
    if groups is None:
        perm = rng.permutation(n)
        half = n // 2
        return np.sort(perm[:half]), np.sort(perm[half:])
    groups = np.asarray(groups)
    members = np.unique(groups)
    if members.size < 2:
        raise ParameterError("cannot split a single individual")
    chosen = rng.permutation(members)[:members.size // 2]
    in_train = np.isin(groups, chosen)
    return np.flatnonzero(in_train), np.flatnonzero(~in_train)


def _both_classes(label: np.ndarray) -> bool:
    return label.size > 0 and 0 < int(label.sum()) < label.size


# ============================================================================
# Single-feature logistic table
# ============================================================================

def _ranking_score(model, x: np.ndarray) -> np.ndarray:
    """Held-out score ordering pairs like the fitted logit; exact under positive rescaling of x."""
    return np.sign(model.theta) * x


def _feature_row(name: str, train: LabeledExamples, test: LabeledExamples) -> FeatureTableRow:
    model = logistic.fit_logistic(train.column(name), train.label, feature=name)
    auc = roc.auc_score(_ranking_score(model, test.column(name)), test.label)
    return FeatureTableRow(feature=name, model=model, auc=auc)


def _table_split(examples: LabeledExamples, seed: int):
    train_idx, test_idx = split(len(examples), seed)
    train, test = examples.take(train_idx), examples.take(test_idx)
    if not (_both_classes(train.label) and _both_classes(test.label)):
        raise DegenerateDataError("both halves need friend and non-friend pairs")
    return train, test


def feature_table(examples: LabeledExamples, seed: Optional[int] = None,
                  threads: Optional[int] = None) -> List[FeatureTableRow]:
    """One logistic model per feature, fitted on one half and scored by AUC on the other."""
    seed = settings.SEED if seed is None else seed
    threads = threads or settings.THREADS
    train, test = _table_split(examples, seed)
    rows = Parallel(n_jobs=threads, prefer="threads")(
        delayed(_feature_row)(name, train, test) for name in examples.names
    )
    logger.info("feature_table_built", pairs=len(examples), positives=int(examples.label.sum()),
                best=max(rows, key=lambda r: r.auc).feature)
    return rows


def roc_curves(examples: LabeledExamples, seed: Optional[int] = None) -> Dict[str, roc.RocCurve]:
    seed = settings.SEED if seed is None else seed
    train, test = _table_split(examples, seed)
    curves = {}
    for name in examples.names:
        model = logistic.fit_logistic(train.column(name), train.label, feature=name)
        curves[name] = roc.roc_auc(_ranking_score(model, test.column(name)), test.label)
    return curves


def write_feature_table(path, rows: List[FeatureTableRow]) -> None:
    lines = ["# feature\ttheta\tsigma\tz\tp\tauc"]
    for r in rows:
        m = r.model
        lines.append(f"{r.feature}\t{m.theta!r}\t{m.sigma!r}\t{m.z!r}\t{m.p!r}\t{r.auc!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ============================================================================
# Robustness by activity
# ============================================================================

def activity_bin(n_x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Width 10 below 100 games, width 100 from 100 games on."""
    n_x = np.asarray(n_x, dtype=np.int64)
    width = np.where(n_x < 100, 10, 100)
    lo = (n_x // width) * width
    return lo, lo + width


def _robustness_cell(name: str, sub: LabeledExamples, lo: int, hi: int, permutations: int,
                     seed: int) -> RobustnessPoint:
    if len(sub) < 2 or not _both_classes(sub.label):
        return RobustnessPoint(bin_lo=lo, bin_hi=hi, feature=name, n_pairs=len(sub), skipped=True)
    aucs = []
    for r in range(permutations):
        train_idx, test_idx = split(len(sub), int(np.random.SeedSequence([seed, lo, r]).generate_state(1)[0]))
        train, test = sub.take(train_idx), sub.take(test_idx)
        if not (_both_classes(train.label) and _both_classes(test.label)):
            continue
        try:
            model = logistic.fit_logistic(train.column(name), train.label, feature=name)
        except ConvergenceError:
            continue
        aucs.append(roc.auc_score(_ranking_score(model, test.column(name)), test.label))
    if not aucs:
        return RobustnessPoint(bin_lo=lo, bin_hi=hi, feature=name, n_pairs=len(sub), skipped=True)
    aucs = np.asarray(aucs)
    se = float(aucs.std(ddof=1) / np.sqrt(aucs.size)) if aucs.size > 1 else 0.0
    return RobustnessPoint(
        bin_lo=lo, bin_hi=hi, feature=name, mean_auc=float(aucs.mean()), se=se,
        n_pairs=len(sub), permutations_used=int(aucs.size),
    )


def robustness_study(
    examples: LabeledExamples,
    permutations: Optional[int] = None,
    seed: Optional[int] = None,
    features: Optional[Sequence[str]] = None,
    threads: Optional[int] = None,
) -> List[RobustnessPoint]:
    """
    Mean held-out AUC and its standard error per (N_x bin, feature).

    Bins lacking either class are reported with skipped=True.
    """
    permutations = settings.PERMUTATIONS if permutations is None else permutations
    seed = settings.SEED if seed is None else seed
    threads = threads or settings.THREADS
    features = tuple(features or examples.names)
    lo, hi = activity_bin(examples.n_x)
    cells = []
    for b_lo in np.unique(lo).tolist():
        idx = np.flatnonzero(lo == b_lo)
        sub = examples.take(idx)
        b_hi = int(hi[idx[0]])
        cells.extend((name, sub, int(b_lo), b_hi) for name in features)
    points = Parallel(n_jobs=threads, prefer="threads")(
        delayed(_robustness_cell)(name, sub, b_lo, b_hi, permutations, seed) for name, sub, b_lo, b_hi in cells
    )
    skipped = sum(p.skipped for p in points)
    logger.info("robustness_study_done", cells=len(points), skipped=skipped, permutations=permutations)
    return points


def write_robustness(path, points: List[RobustnessPoint]) -> None:
    lines = ["# bin_lo\tbin_hi\tfeature\tmean_auc\tse\tn_pairs"]
    for p in points:
        mean = "skipped" if p.skipped else repr(p.mean_auc)
        se = "skipped" if p.skipped else repr(p.se)
        lines.append(f"{p.bin_lo}\t{p.bin_hi}\t{p.feature}\t{mean}\t{se}\t{p.n_pairs}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def rater_activity(examples: LabeledExamples) -> np.ndarray:
    """N_x of every distinct rater."""
    _, first = np.unique(examples.x, return_index=True)
    return examples.n_x[first]


def nx_ccdf(examples: LabeledExamples) -> Tuple[np.ndarray, np.ndarray]:
    return ccdf(rater_activity(examples))


# ============================================================================
# Tree comparison
# ============================================================================

def _tree_cell(set_name: str, names: Tuple[str, ...], train: LabeledExamples, test: LabeledExamples,
               folds: int, seed: int, min_leaf: int, max_depth: int):
    tree = decision_tree.fit_tree(
        train.columns(names), train.label, folds=folds, seed=seed, min_leaf=min_leaf, max_depth=max_depth,
        names=names,
    )
    X_test = test.columns(names)
    proba = tree.predict_proba(X_test)
    auc = roc.auc_score(proba, test.label) if _both_classes(test.label) else float("nan")
    error = float(np.mean(tree.predict(X_test) != test.label))
    return set_name, auc, error, roc.naive_error(test.label), tree.root_feature, tree.node_count


def tree_comparison(
    examples: LabeledExamples,
    feature_sets: Optional[Dict[str, Tuple[str, ...]]] = None,
    repeats: Optional[int] = None,
    folds: Optional[int] = None,
    seed: Optional[int] = None,
    min_leaf: Optional[int] = None,
    max_depth: Optional[int] = None,
    threads: Optional[int] = None,
) -> List[TreeComparisonRow]:
    """Pruned trees per feature set on halves split by individuals, averaged over repeats."""
    feature_sets = feature_sets or FEATURE_SETS
    repeats = repeats or settings.TREE_REPEATS
    folds = settings.FOLDS if folds is None else folds
    seed = settings.SEED if seed is None else seed
    min_leaf = min_leaf or settings.MIN_LEAF
    max_depth = max_depth or settings.MAX_DEPTH
    threads = threads or settings.THREADS

    jobs = []
    for r in range(repeats):
        rep_seed = int(np.random.SeedSequence([seed, r]).generate_state(1)[0])
        train_idx, test_idx = split(len(examples), rep_seed, groups=examples.x)
        train, test = examples.take(train_idx), examples.take(test_idx)
        for set_name, names in feature_sets.items():
            jobs.append((set_name, names, train, test, rep_seed))
    results = Parallel(n_jobs=threads, prefer="threads")(
        delayed(_tree_cell)(set_name, names, train, test, folds, rep_seed, min_leaf, max_depth)
        for set_name, names, train, test, rep_seed in jobs
    )

    rows = []
    for set_name, names in feature_sets.items():
        mine = [r for r in results if r[0] == set_name]
        roots = Counter(r[4] for r in mine if r[4] is not None)
        root = min(roots.items(), key=lambda kv: (-kv[1], kv[0]))[0] if roots else None
        rows.append(TreeComparisonRow(
            feature_set=set_name,
            features=list(names),
            mean_auc=float(np.nanmean([r[1] for r in mine])) if any(np.isfinite(r[1]) for r in mine) else float("nan"),
            error_rate=float(np.mean([r[2] for r in mine])),
            naive_error=float(np.mean([r[3] for r in mine])),
            root_feature=root,
            mean_nodes=float(np.mean([r[5] for r in mine])),
            repeats=repeats,
        ))
    logger.info("tree_comparison_done", sets=len(rows), repeats=repeats)
    return rows


def write_tree_comparison(path, rows: List[TreeComparisonRow]) -> None:
    lines = ["# feature_set\tmean_auc\terror_rate\tnaive_error\troot_feature\tmean_nodes\tfeatures"]
    for r in rows:
        lines.append(
            f"{r.feature_set}\t{r.mean_auc!r}\t{r.error_rate!r}\t{r.naive_error!r}\t"
            f"{r.root_feature or '-'}\t{r.mean_nodes!r}\t{','.join(r.features)}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ============================================================================
# Class summaries
# ============================================================================

def cooperative_summary(examples: LabeledExamples,
                        features: Sequence[str] = COOPERATIVE_FEATURES) -> List[ClassSummaryRow]:
    """Mean and SD of each feature over friend and non-friend pairs."""
    friends = examples.label == 1
    rows = []
    for name in features:
        col = examples.column(name)
        f, nf = col[friends], col[~friends]
        rows.append(ClassSummaryRow(
            feature=name,
            friend_mean=float(f.mean()) if f.size else float("nan"),
            friend_sd=float(f.std()) if f.size else float("nan"),
            nonfriend_mean=float(nf.mean()) if nf.size else float("nan"),
            nonfriend_sd=float(nf.std()) if nf.size else float("nan"),
        ))
    return rows


def write_class_summary(path, rows: List[ClassSummaryRow]) -> None:
    lines = ["# feature\tfriend_mean\tfriend_sd\tnonfriend_mean\tnonfriend_sd"]
    lines += [f"{r.feature}\t{r.friend_mean!r}\t{r.friend_sd!r}\t{r.nonfriend_mean!r}\t{r.nonfriend_sd!r}"
              for r in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
