"""
Command line entry: parse, dispatch to a subcommand handler, map failures to exit codes.

Exit codes: 0 success, 1 usage, 2 input format, 3 numeric or convergence failure.
"""
import sys
import traceback
from typing import List, Optional

from pydantic import ValidationError

from .commands import PATH_KEYS, build_parser
from .exceptions import TieInferenceError, UsageError
from .logging_setup import logger, setup_logging
from .services.manifest import load_manifest, replay_options


def manifest_argv(path: str) -> List[str]:
    """Rebuild the command line of a recorded run."""
    manifest = load_manifest(path)
    if manifest.subcommand not in PATH_KEYS:
        raise UsageError(f"manifest records unknown subcommand '{manifest.subcommand}'")
    options = replay_options(manifest, path, PATH_KEYS[manifest.subcommand])
    argv = [manifest.subcommand]
    for key, value in sorted(options.items()):
        if key == "subcommand" or value is None:
            continue
        if key == "all_players":
            argv.append("--all-players" if value else "--respondents")
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if value:
                argv.append(flag)
            continue
        argv += [flag, repr(value) if isinstance(value, float) else str(value)]
    return argv


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.log_level:
        setup_logging(level=args.log_level)
    if args.from_manifest:
        replayed = parser.parse_args(manifest_argv(args.from_manifest))
        replayed.log_level = args.log_level
        args = replayed
        logger.info("manifest_replayed", subcommand=args.subcommand)
    if not getattr(args, "handler", None):
        raise UsageError("a subcommand is required", usage=parser.format_usage())
    return args.handler(args)


def main(argv: Optional[List[str]] = None) -> int:
    try:
        return run(argv)
    except TieInferenceError as e:
        location = {k: v for k, v in e.context.items() if k in ("path", "line") and v is not None}
        logger.error("command_failed", error=str(e), error_type=type(e).__name__, exit_code=e.exit_code,
                     **location)
        usage = e.context.get("usage")
        if usage:
            sys.stderr.write(usage)
        return e.exit_code
    except ValidationError as e:
        logger.error("invalid_configuration", error=str(e), exit_code=1)
        return 1
    except Exception as e:
        logger.error("unhandled_exception", exception=traceback.format_exc(), error=str(e), exit_code=1)
        return 1
