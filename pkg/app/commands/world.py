"""`synth` and `ingest` subcommands."""
import json
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from ..config import settings
from ..logging_setup import logger
from ..schemas import WorldConfig
from ..services import synth_world
from ..services.interaction_store import EventStore, dump
from ..services.pair_series import enumerate_pairs, load_universe_cache, save_universe_cache, session_counts
from ..services.manifest import manifest_path_for
from . import common

SYNTH_PATHS = ("config", "output")
INGEST_PATHS = ("store", "labels", "names", "output")


def register(subparsers) -> None:
    p = subparsers.add_parser("synth", help="Generate a synthetic world with planted friendships")
    p.add_argument("--config", default=None, help="World configuration file (key = value)")
    common.add_seed(p)
    p.add_argument("--agents", type=int, default=None)
    p.add_argument("--days", type=int, default=None)
    p.add_argument("-o", "--output", required=True, help="Output directory")
    p.set_defaults(handler=synth)

    p = subparsers.add_parser("ingest", help="Validate an event log and write its canonical form")
    p.add_argument("--store", required=True, help="Event log or world directory")
    p.add_argument("--labels", default=None, help="Label file; its raters define the cached pair set")
    common.add_names(p)
    common.add_binning(p)
    common.add_focal(p)
    p.add_argument("-o", "--output", required=True, help="Output directory")
    p.set_defaults(handler=ingest)


def world_config(path: Optional[str], seed=None, agents=None, days=None) -> WorldConfig:
    """Config file (or defaults) with command line overrides applied."""
    overrides = {"seed": seed, "agents": agents, "days": days}
    if path:
        return synth_world.load_world_config(path, **overrides)
    return WorldConfig(**{k: v for k, v in overrides.items() if v is not None})


def run_synth(config: WorldConfig, output) -> synth_world.World:
    world = synth_world.generate(config)
    synth_world.write_world(output, world)
    share = synth_world.activity_share(world)
    logger.info("world_written", output=str(output), top_decile_share=round(share, 4),
                undersized_games=world.undersized_games)
    return world


def synth(args) -> int:
    config = world_config(args.config, args.seed, args.agents, args.days)
    args.seed, args.agents, args.days = config.seed, config.agents, config.days
    manifest_path = manifest_path_for(args.output, is_dir=True)
    manifest = common.start_run("synth", args, manifest_path, inputs=[args.config], path_keys=SYNTH_PATHS,
                                seed=config.seed)
    run_synth(config, args.output)
    common.finish_run(manifest_path, manifest, outputs=[args.output])
    return 0


def store_summary(store: EventStore, universe) -> Dict[str, object]:
    sessions = session_counts(universe.offsets, universe.bins)
    return {
        "events": store.n_events,
        "players": store.n_players,
        "games": store.n_games,
        "window_start": store.window_start,
        "window_end": store.window_end,
        "bin_seconds": store.bin_seconds,
        "total_bins": store.total_bins,
        "checksum": store.checksum(),
        "pairs": len(universe),
        "pairs_with_3_sessions": int(np.count_nonzero(sessions >= 3)),
    }


def run_ingest(store: EventStore, focal, output, names: Optional[Dict[int, str]] = None) -> Dict[str, str]:
    out = Path(output)
    out.mkdir(parents=True, exist_ok=True)
    files = {"events": out / "events.tsv", "pairs": out / "pairs.bin", "summary": out / "store.json"}
    dump(store, files["events"])
    universe = load_universe_cache(files["pairs"], store)
    focal = store.players.tolist() if focal is None else focal
    if universe is None or set(universe.x.tolist()) != set(focal):
        universe = enumerate_pairs(store, focal)
        save_universe_cache(files["pairs"], universe, store.checksum())
    else:
        logger.info("pair_cache_reused", path=str(files["pairs"]), pairs=len(universe))
    if names:
        check_names(store, names)
    files["summary"].write_text(json.dumps(store_summary(store, universe), indent=2, sort_keys=True) + "\n",
                                encoding="utf-8")
    return {k: str(v) for k, v in files.items()}


def check_names(store: EventStore, names: Dict[int, str]) -> None:
    """Report how the name map lines up with the players in the log."""
    mapped = np.fromiter(names, dtype=np.uint64, count=len(names))
    present = np.isin(mapped, store.players)
    logger.info("name_map_loaded", named=int(np.count_nonzero(present)),
                unnamed=store.n_players - int(np.count_nonzero(present)))
    strays = sorted(mapped[~present].tolist())
    if strays:
        logger.warning("names_without_games", count=len(strays), players=strays[:5],
                       gamertags=common.gamertags(names, strays[:5]))


def ingest(args) -> int:
    args.store, args.labels = common.resolve_store_paths(args.store, args.labels)
    args.bin_seconds = common.resolve(args.bin_seconds, settings.BIN_SECONDS)
    manifest_path = manifest_path_for(args.output, is_dir=True)
    manifest = common.start_run("ingest", args, manifest_path, inputs=[args.store, args.labels, args.names],
                                path_keys=INGEST_PATHS)
    store = common.load_store(args.store, args.bin_seconds)
    labels = common.load_optional_labels(args.labels)
    focal = common.focal_players(store, labels, args.all_players)
    names = common.load_optional_names(args.names)
    files = run_ingest(store, focal, args.output, names=names)
    common.finish_run(manifest_path, manifest, outputs=files.values())
    return 0
