"""`features` subcommand."""
from pathlib import Path

from ..config import settings
from ..services.feature_service import compute_features, write_features
from ..services.manifest import manifest_path_for
from . import common

FEATURE_PATHS = ("store", "labels", "output")


def register(subparsers) -> None:
    p = subparsers.add_parser("features", help="Compute the nine pair features")
    p.add_argument("--store", required=True, help="Event log or world directory")
    p.add_argument("--labels", default=None, help="Label file; its raters are the focal players")
    common.add_binning(p)
    common.add_lags(p)
    common.add_focal(p)
    common.add_threads(p)
    p.add_argument("-o", "--output", required=True, help="Feature dump path")
    p.set_defaults(handler=features)


def features(args) -> int:
    args.store, args.labels = common.resolve_store_paths(args.store, args.labels)
    args.bin_seconds = common.resolve(args.bin_seconds, settings.BIN_SECONDS)
    args.tau_max = common.resolve(args.tau_max, settings.TAU_MAX)
    manifest_path = manifest_path_for(args.output, is_dir=False)
    manifest = common.start_run("features", args, manifest_path, inputs=[args.store, args.labels],
                                path_keys=FEATURE_PATHS)

    store = common.load_store(args.store, args.bin_seconds)
    labels = common.load_optional_labels(args.labels)
    focal = common.focal_players(store, labels, args.all_players)
    matrix = compute_features(store, focal, tau_max=args.tau_max, threads=args.threads, all_lags=args.all_lags)
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    write_features(args.output, matrix)

    common.finish_run(manifest_path, manifest, outputs=[args.output])
    return 0
