"""`infer` and `graphstats` subcommands."""
import json
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from ..config import settings
from ..exceptions import UsageError
from ..logging_setup import logger
from ..services import graph_stats, network_inference as inference
from ..services.feature_service import FeatureMatrix, compute_features, read_features
from ..services.interaction_store import EventStore, Labels
from ..services.manifest import manifest_path_for
from ..services.synth_world import read_friends
from . import common

INFER_PATHS = ("store", "labels", "features", "truth", "names", "output")
TOP_DEGREE_REPORTED = 5
GRAPHSTATS_PATHS = ("graph", "output")


def register(subparsers) -> None:
    p = subparsers.add_parser("infer", help="Select a threshold and materialize the population graph")
    p.add_argument("--store", required=True, help="Event log or world directory")
    p.add_argument("--labels", default=None, help="Label file (survey degrees)")
    p.add_argument("--features", default=None, help="Respondent feature dump; computed when absent")
    p.add_argument("--truth", default=None, help="Planted friendship edge list for recovery scoring")
    common.add_names(p)
    p.add_argument("--threshold-rule", choices=inference.RULES, default="under")
    p.add_argument("--epsilon-kl", type=float, default=None, help=f"KL smoothing (default {settings.EPSILON_KL})")
    common.add_binning(p)
    common.add_lags(p)
    common.add_threads(p)
    p.add_argument("-o", "--output", required=True, help="Output directory")
    p.set_defaults(handler=infer)

    p = subparsers.add_parser("graphstats", help="Degree, clustering and component summaries of a graph")
    p.add_argument("--graph", required=True, help="Edge list written by `infer`")
    p.add_argument("-o", "--output", required=True, help="Output directory")
    p.set_defaults(handler=graphstats)


def run_infer(
    store: EventStore,
    labels: Labels,
    respondent_features: FeatureMatrix,
    rule: str,
    output,
    epsilon: Optional[float] = None,
    tau_max: Optional[int] = None,
    all_lags: bool = False,
    threads: Optional[int] = None,
    truth_path: Optional[str] = None,
    population: Optional[inference.ScoredPairs] = None,
    names: Optional[Dict[int, str]] = None,
) -> Dict[str, str]:
    """
    Threshold from the respondents' survey, graph over the whole population.

    `population` may be passed in to reuse one scoring across both rules.
    """
    out = Path(output)
    out.mkdir(parents=True, exist_ok=True)
    surveyed = respondent_features.take(np.flatnonzero(np.isin(respondent_features.x, labels.raters)))
    respondents = inference.respondent_scores(surveyed.x, surveyed.y, surveyed.column("ac"))
    degrees = inference.survey_degrees(labels, respondents)
    candidates = inference.candidate_thresholds(respondents.score)
    choice = inference.select_threshold(rule, degrees, candidates, respondents, epsilon=epsilon, threads=threads)

    if population is None:
        population = inference.population_scores(store, tau_max=tau_max, threads=threads, all_lags=all_lags)
    graph = inference.materialize(population, choice.threshold, rule=rule, threads=threads)
    if names and graph.n_nodes:
        degrees = graph.degrees().astype(np.int64)
        order = np.lexsort((graph.nodes, -degrees))[:TOP_DEGREE_REPORTED]
        top = graph.nodes[order].tolist()
        logger.info("top_degree_players", rule=rule, players=top, degrees=degrees[order].tolist(),
                    gamertags=common.gamertags(names, top))

    files = {
        "sweep": out / "threshold_sweep.tsv",
        "graph": out / "graph.tsv",
        "degrees": out / "degrees.tsv",
    }
    inference.write_sweep(files["sweep"], choice)
    graph_stats.write_graph(files["graph"], graph, extra={"objective": repr(choice.objective)})
    graph_stats.write_degree_distribution(files["degrees"], graph)

    if truth_path:
        truth = inference.normalize_truth(read_friends(truth_path))
        achieved = inference.recovery_scores(population, truth, choice.threshold)
        ceiling = inference.best_f1_sweep(population, truth)
        files["recovery"] = out / "recovery.json"
        files["recovery"].write_text(json.dumps(
            {"selected": achieved.model_dump(), "best": ceiling.model_dump(),
             "min_shared_sessions": inference.MIN_SHARED_SESSIONS},
            indent=2, sort_keys=True,
        ) + "\n", encoding="utf-8")
        logger.info("recovery_scored", rule=rule, f1=achieved.f1, best_f1=ceiling.f1)
    return {k: str(v) for k, v in files.items()}


def infer(args) -> int:
    args.store, args.labels = common.resolve_store_paths(args.store, args.labels)
    args.bin_seconds = common.resolve(args.bin_seconds, settings.BIN_SECONDS)
    args.tau_max = common.resolve(args.tau_max, settings.TAU_MAX)
    args.epsilon_kl = common.resolve(args.epsilon_kl, settings.EPSILON_KL)
    if args.labels is None:
        raise UsageError("infer needs --labels (or a world directory holding labels.tsv)")
    manifest_path = manifest_path_for(args.output, is_dir=True)
    manifest = common.start_run("infer", args, manifest_path,
                                inputs=[args.store, args.labels, args.features, args.truth, args.names],
                                path_keys=INFER_PATHS)

    store = common.load_store(args.store, args.bin_seconds)
    labels = common.load_optional_labels(args.labels)
    names = common.load_optional_names(args.names)
    if args.features:
        matrix = read_features(args.features)
    else:
        focal = common.focal_players(store, labels, all_players=False)
        matrix = compute_features(store, focal, tau_max=args.tau_max, threads=args.threads, all_lags=args.all_lags)
    files = run_infer(store, labels, matrix, args.threshold_rule, args.output, epsilon=args.epsilon_kl,
                      tau_max=args.tau_max, all_lags=args.all_lags, threads=args.threads, truth_path=args.truth,
                      names=names)
    common.finish_run(manifest_path, manifest, outputs=files.values())
    return 0


def run_graphstats(graph: graph_stats.InferredGraph, output) -> Dict[str, str]:
    return graph_stats.write_summary(output, graph_stats.summarize(graph))


def graphstats(args) -> int:
    manifest_path = manifest_path_for(args.output, is_dir=True)
    manifest = common.start_run("graphstats", args, manifest_path, inputs=[args.graph],
                                path_keys=GRAPHSTATS_PATHS)
    files = run_graphstats(graph_stats.read_graph(args.graph), args.output)
    common.finish_run(manifest_path, manifest, outputs=files.values())
    return 0
