"""Shared option groups and run bookkeeping for subcommand handlers."""
import argparse
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

from ..config import settings
from ..logging_setup import command_ctx, logger, run_id_ctx
from ..schemas import RunManifest
from ..services import manifest as manifest_service
from ..services.interaction_store import EventStore, Labels, ingest, load_labels, load_name_map


def add_seed(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help=f"Random seed (default {settings.SEED})")


def add_threads(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threads", type=int, default=None, help="Worker threads; never changes output")


def add_binning(p: argparse.ArgumentParser) -> None:
    p.add_argument("--bin-seconds", type=int, default=None, help=f"Bin width (default {settings.BIN_SECONDS})")


def add_lags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tau-max", type=int, default=None, help=f"Autocorrelation lag bound in bins "
                                                             f"(default {settings.TAU_MAX})")
    p.add_argument("--all-lags", action="store_true", help="Use every lag up to T - 1")


def add_names(p: argparse.ArgumentParser) -> None:
    p.add_argument("--names", default=None,
                   help="Name map (player_id<TAB>original name); names are logged masked only")


def add_focal(p: argparse.ArgumentParser) -> None:
    group = p.add_mutually_exclusive_group()
    group.add_argument("--respondents", dest="all_players", action="store_false",
                       help="Focal players are the label raters (default)")
    group.add_argument("--all-players", dest="all_players", action="store_true",
                       help="Every player is focal")
    p.set_defaults(all_players=False)


def resolve(value, default):
    return default if value is None else value


def resolve_store_paths(store: str, labels: Optional[str] = None) -> Tuple[str, Optional[str]]:
    """A world directory stands for its events.tsv and, unless given, its labels.tsv."""
    path = Path(store)
    if path.is_dir():
        events = path / "events.tsv"
        if labels is None and (path / "labels.tsv").is_file():
            labels = str(path / "labels.tsv")
        return str(events), labels
    return str(path), labels


def load_store(store: str, bin_seconds: Optional[int] = None) -> EventStore:
    return ingest(store, bin_seconds=bin_seconds)


def load_optional_labels(path: Optional[str]) -> Optional[Labels]:
    return load_labels(path) if path else None


def load_optional_names(path: Optional[str]) -> Dict[int, str]:
    return load_name_map(path) if path else {}


def gamertags(names: Dict[int, str], players: Iterable[int]) -> List[str]:
    """Original names of the given players, skipping those the map lacks."""
    return [names[p] for p in players if p in names]


def focal_players(store: EventStore, labels: Optional[Labels], all_players: bool) -> Optional[List[int]]:
    """Label raters present in the store, or None for every player."""
    if all_players or labels is None:
        return None
    raters = labels.raters.tolist()
    focal = [r for r in raters if store.has_player(r)]
    if len(focal) < len(raters):
        logger.warning("respondents_without_games", missing=len(raters) - len(focal), respondents=len(raters))
    return focal


def start_run(
    subcommand: str,
    args: argparse.Namespace,
    manifest_path,
    inputs: Iterable[Optional[str]] = (),
    path_keys: Iterable[str] = (),
    seed: Optional[int] = None,
) -> RunManifest:
    """Build the run manifest and bind its run id to every later log line."""
    manifest = manifest_service.build_manifest(
        subcommand, vars(args), Path(manifest_path).parent,
        inputs=[p for p in inputs if p], path_keys=path_keys, seed=seed,
    )
    rid = manifest_service.run_id(manifest)
    run_id_ctx.set(rid)
    command_ctx.set(subcommand)
    logger.info("run_started", seed=seed)
    return manifest


def finish_run(manifest_path, manifest: RunManifest, outputs: Iterable[str] = ()) -> None:
    manifest_service.write_manifest(manifest_path, manifest)
    logger.info("run_finished", outputs=sorted(str(o) for o in outputs))
