"""Subcommand registry and the argument parser."""
import argparse

from ..exceptions import UsageError
from . import features, learning, network, pipeline, world

COMMAND_MODULES = (world, features, learning, network, pipeline)

# Option names holding paths, per subcommand; relative to the manifest when recorded
PATH_KEYS = {
    "synth": world.SYNTH_PATHS,
    "ingest": world.INGEST_PATHS,
    "features": features.FEATURE_PATHS,
    "train": learning.LEARNING_PATHS,
    "eval": learning.LEARNING_PATHS,
    "robustness": learning.LEARNING_PATHS,
    "infer": network.INFER_PATHS,
    "graphstats": network.GRAPHSTATS_PATHS,
    "pipeline": pipeline.PIPELINE_PATHS,
}


class TiesArgumentParser(argparse.ArgumentParser):
    """Usage errors raise instead of exiting with argparse's status 2."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}", usage=self.format_usage())


def build_parser() -> argparse.ArgumentParser:
    parser = TiesArgumentParser(
        prog="ties",
        description="Infer friendship ties from game interaction logs. "
                    "Settings can also be given as TIES_* environment variables (e.g. TIES_THREADS=8).",
    )
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--from-manifest", default=None, help="Re-run the run recorded in a manifest.json")
    subparsers = parser.add_subparsers(dest="subcommand", parser_class=TiesArgumentParser)
    for module in COMMAND_MODULES:
        module.register(subparsers)
    return parser
