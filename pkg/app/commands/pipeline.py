"""`pipeline` subcommand: synth, features, train, eval, robustness, infer (both rules), graphstats."""
from pathlib import Path

from ..config import settings
from ..logging_setup import logger
from ..services import graph_stats, network_inference as inference
from ..services.evaluation_service import build_examples
from ..services.feature_service import compute_features, write_features
from ..services.manifest import manifest_path_for
from . import common
from .learning import run_eval, run_robustness, run_train
from .network import run_graphstats, run_infer
from .world import run_synth, world_config

PIPELINE_PATHS = ("config", "output")


def register(subparsers) -> None:
    p = subparsers.add_parser("pipeline", help="Run every stage on a fresh synthetic world")
    p.add_argument("--config", default=None, help="World configuration file (key = value)")
    common.add_seed(p)
    p.add_argument("--agents", type=int, default=None)
    p.add_argument("--days", type=int, default=None)
    common.add_binning(p)
    common.add_lags(p)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--permutations", type=int, default=None)
    p.add_argument("--epsilon-kl", type=float, default=None)
    common.add_threads(p)
    p.add_argument("-o", "--output", default="run", help="Output directory (default ./run)")
    p.set_defaults(handler=pipeline)


def pipeline(args) -> int:
    config = world_config(args.config, args.seed, args.agents, args.days)
    args.seed, args.agents, args.days = config.seed, config.agents, config.days
    args.bin_seconds = common.resolve(args.bin_seconds, settings.BIN_SECONDS)
    args.tau_max = common.resolve(args.tau_max, settings.TAU_MAX)
    args.folds = common.resolve(args.folds, settings.FOLDS)
    args.permutations = common.resolve(args.permutations, settings.PERMUTATIONS)
    args.epsilon_kl = common.resolve(args.epsilon_kl, settings.EPSILON_KL)
    out = Path(args.output)
    manifest_path = manifest_path_for(out, is_dir=True)
    manifest = common.start_run("pipeline", args, manifest_path, inputs=[args.config], path_keys=PIPELINE_PATHS,
                                seed=config.seed)

    world = run_synth(config, out / "world")
    store, labels = world.store, world.labels
    if store.bin_seconds != args.bin_seconds:
        store = common.load_store(str(out / "world" / "events.tsv"), args.bin_seconds)

    focal = common.focal_players(store, labels, all_players=False)
    matrix = compute_features(store, focal, tau_max=args.tau_max, threads=args.threads, all_lags=args.all_lags)
    write_features(out / "features.tsv", matrix)
    examples = build_examples(matrix, labels)

    run_train(examples, "logistic", "ac", args.seed, args.folds, out / "models" / "logistic_ac.txt")
    run_train(examples, "tree", "ac", args.seed, args.folds, out / "models" / "tree.txt")
    run_eval(examples, out / "eval", args.seed, args.folds, args.threads, store, args.tau_max, args.all_lags)
    run_robustness(examples, out / "robustness.tsv", args.permutations, args.seed, args.threads)

    population = inference.population_scores(store, tau_max=args.tau_max, threads=args.threads,
                                             all_lags=args.all_lags)
    for rule in inference.RULES:
        net_dir = out / f"network_{rule}"
        files = run_infer(store, labels, matrix, rule, net_dir, epsilon=args.epsilon_kl, threads=args.threads,
                          truth_path=str(out / "world" / "friends.tsv"), population=population,
                          names=world.names)
        run_graphstats(graph_stats.read_graph(files["graph"]), net_dir / "stats")

    common.finish_run(manifest_path, manifest, outputs=[str(out)])
    logger.info("pipeline_finished", output=str(out))
    return 0
