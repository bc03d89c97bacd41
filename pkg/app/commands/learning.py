"""`train`, `eval` and `robustness` subcommands."""
from pathlib import Path
from typing import Dict, Optional

from ..config import settings
from ..exceptions import ParameterError
from ..logging_setup import logger
from ..services import decision_tree, evaluation_service as evaluation, logistic, roc
from ..services.feature_service import FEATURE_NAMES, read_features
from ..services.interaction_store import EventStore, load_labels
from ..services.manifest import manifest_path_for
from . import common

LEARNING_PATHS = ("features", "labels", "store", "output")
MODELS = ("logistic", "tree")


def _add_examples(p) -> None:
    p.add_argument("--features", required=True, help="Feature dump from `features`")
    p.add_argument("--labels", required=True, help="Label file")


def register(subparsers) -> None:
    p = subparsers.add_parser("train", help="Fit a logistic model on one feature or a pruned tree on all")
    _add_examples(p)
    p.add_argument("--model", choices=MODELS, default="logistic")
    p.add_argument("--feature", choices=FEATURE_NAMES, default="ac", help="Feature of the logistic model")
    common.add_seed(p)
    p.add_argument("--folds", type=int, default=None, help=f"Pruning CV folds (default {settings.FOLDS})")
    p.add_argument("-o", "--output", required=True, help="Model file")
    p.set_defaults(handler=train)

    p = subparsers.add_parser("eval", help="Feature table, ROC curves and feature-set tree comparison")
    _add_examples(p)
    p.add_argument("--store", default=None, help="Event log for the normalization profile (optional)")
    common.add_binning(p)
    common.add_lags(p)
    common.add_seed(p)
    common.add_threads(p)
    p.add_argument("--folds", type=int, default=None, help=f"Pruning CV folds (default {settings.FOLDS})")
    p.add_argument("-o", "--output", required=True, help="Output directory")
    p.set_defaults(handler=evaluate)

    p = subparsers.add_parser("robustness", help="Held-out AUC by rater activity bin")
    _add_examples(p)
    common.add_seed(p)
    common.add_threads(p)
    p.add_argument("--permutations", type=int, default=None,
                   help=f"Random splits per bin (default {settings.PERMUTATIONS})")
    p.add_argument("-o", "--output", required=True, help="Robustness table path")
    p.set_defaults(handler=robustness)


def load_examples(features_path: str, labels_path: str) -> evaluation.LabeledExamples:
    return evaluation.build_examples(read_features(features_path), load_labels(labels_path))


# ============================================================================
# train
# ============================================================================

def run_train(examples: evaluation.LabeledExamples, model: str, feature: str, seed: int, folds: int, output) -> None:
    Path(output).parent.mkdir(parents=True, exist_ok=True)
    if model == "logistic":
        fitted = logistic.fit_logistic(examples.column(feature), examples.label, feature=feature)
        logistic.save_logistic(output, fitted)
        logger.info("model_trained", model=model, feature=feature, theta=fitted.theta, p=fitted.p)
    elif model == "tree":
        tree = decision_tree.fit_tree(examples.values, examples.label, folds=folds, seed=seed,
                                      names=examples.names)
        decision_tree.save_tree(output, tree)
        logger.info("model_trained", model=model, nodes=tree.node_count, root=tree.root_feature)
    else:
        raise ParameterError(f"unknown model '{model}' (known: {', '.join(MODELS)})")


def train(args) -> int:
    args.seed = common.resolve(args.seed, settings.SEED)
    args.folds = common.resolve(args.folds, settings.FOLDS)
    manifest_path = manifest_path_for(args.output, is_dir=False)
    manifest = common.start_run("train", args, manifest_path, inputs=[args.features, args.labels],
                                path_keys=LEARNING_PATHS, seed=args.seed)
    examples = load_examples(args.features, args.labels)
    run_train(examples, args.model, args.feature, args.seed, args.folds, args.output)
    common.finish_run(manifest_path, manifest, outputs=[args.output])
    return 0


# ============================================================================
# eval
# ============================================================================

def run_eval(
    examples: evaluation.LabeledExamples,
    output,
    seed: int,
    folds: int,
    threads: Optional[int] = None,
    store: Optional[EventStore] = None,
    tau_max: Optional[int] = None,
    all_lags: bool = False,
) -> Dict[str, str]:
    out = Path(output)
    (out / "roc").mkdir(parents=True, exist_ok=True)
    files = {}

    if store is not None:
        profile = evaluation.build_normalization(
            store, sample_size=min(settings.NORMALIZATION_SAMPLE, store.n_players), seed=seed,
            tau_max=tau_max, threads=threads, all_lags=all_lags,
        )
        files["normalization"] = out / "normalization.tsv"
        evaluation.write_normalization(files["normalization"], profile)
        examples = evaluation.normalize(examples, profile)

    files["feature_table"] = out / "feature_table.tsv"
    evaluation.write_feature_table(files["feature_table"], evaluation.feature_table(examples, seed, threads))
    for name, curve in evaluation.roc_curves(examples, seed).items():
        files[f"roc_{name}"] = out / "roc" / f"{name}.tsv"
        roc.write_roc(files[f"roc_{name}"], curve)

    files["tree_comparison"] = out / "tree_comparison.tsv"
    evaluation.write_tree_comparison(
        files["tree_comparison"], evaluation.tree_comparison(examples, folds=folds, seed=seed, threads=threads),
    )
    files["class_summary"] = out / "class_summary.tsv"
    evaluation.write_class_summary(files["class_summary"], evaluation.cooperative_summary(examples))

    support, tail = evaluation.nx_ccdf(examples)
    files["nx_ccdf"] = out / "nx_ccdf.tsv"
    lines = ["# games_played\tccdf"] + [f"{s}\t{t!r}" for s, t in zip(support.tolist(), tail.tolist())]
    files["nx_ccdf"].write_text("\n".join(lines) + "\n", encoding="utf-8")
    return {k: str(v) for k, v in files.items()}


def evaluate(args) -> int:
    args.seed = common.resolve(args.seed, settings.SEED)
    args.folds = common.resolve(args.folds, settings.FOLDS)
    args.tau_max = common.resolve(args.tau_max, settings.TAU_MAX)
    args.bin_seconds = common.resolve(args.bin_seconds, settings.BIN_SECONDS)
    if args.store is not None:
        args.store, _ = common.resolve_store_paths(args.store)
    manifest_path = manifest_path_for(args.output, is_dir=True)
    manifest = common.start_run("eval", args, manifest_path, inputs=[args.features, args.labels, args.store],
                                path_keys=LEARNING_PATHS, seed=args.seed)
    examples = load_examples(args.features, args.labels)
    store = common.load_store(args.store, args.bin_seconds) if args.store else None
    files = run_eval(examples, args.output, args.seed, args.folds, args.threads, store, args.tau_max, args.all_lags)
    common.finish_run(manifest_path, manifest, outputs=files.values())
    return 0


# ============================================================================
# robustness
# ============================================================================

def run_robustness(examples: evaluation.LabeledExamples, output, permutations: int, seed: int,
                   threads: Optional[int] = None) -> None:
    Path(output).parent.mkdir(parents=True, exist_ok=True)
    points = evaluation.robustness_study(examples, permutations=permutations, seed=seed, threads=threads)
    evaluation.write_robustness(output, points)


def robustness(args) -> int:
    args.seed = common.resolve(args.seed, settings.SEED)
    args.permutations = common.resolve(args.permutations, settings.PERMUTATIONS)
    manifest_path = manifest_path_for(args.output, is_dir=False)
    manifest = common.start_run("robustness", args, manifest_path, inputs=[args.features, args.labels],
                                path_keys=LEARNING_PATHS, seed=args.seed)
    run_robustness(load_examples(args.features, args.labels), args.output, args.permutations, args.seed,
                   args.threads)
    common.finish_run(manifest_path, manifest, outputs=[args.output])
    return 0
