"""
structlog setup: run context, gamertag masking, JSON or console output to stderr.
"""
import logging
import sys
from contextvars import ContextVar
from typing import Any, Dict

import structlog

from .config import settings

run_id_ctx: ContextVar[str] = ContextVar("run_id", default=None)
command_ctx: ContextVar[str] = ContextVar("command", default=None)

def mask_gamertag(name: str) -> str:
    """
    Mask an original player identifier to protect PII.
    Example: 'Spartan117' -> 'S***'
    """
    if not name or not isinstance(name, str):
        return name
    return name[0] + "***"

def gamertag_masking_processor(logger: Any, method_name: str, event_dict: Dict[str, Any]) -> Dict[str, Any]:
    """
    Processor that masks gamertags (original player names from the name map).
    Must run AFTER merge_contextvars so that it catches context-injected values too.
    """
    if "gamertag" in event_dict:
        event_dict["gamertag"] = mask_gamertag(event_dict["gamertag"])
    if "gamertags" in event_dict and isinstance(event_dict["gamertags"], (list, tuple)):
        event_dict["gamertags"] = [mask_gamertag(n) for n in event_dict["gamertags"]]
    return event_dict

def run_context_processor(logger: Any, method_name: str, event_dict: Dict[str, Any]) -> Dict[str, Any]:
    """Attach the run id and subcommand of the current invocation."""
    run_id = run_id_ctx.get()
    command = command_ctx.get()
    if run_id is not None:
        event_dict.setdefault("run_id", run_id)
    if command is not None:
        event_dict.setdefault("command", command)
    return event_dict

def setup_logging(level: str = None, fmt: str = None):
    """Configure structlog. Can be called manually if needed to reconfigure."""
    level = (level or settings.LOG_LEVEL).upper()
    fmt = fmt or settings.LOG_FORMAT

    processors = [
        structlog.contextvars.merge_contextvars,
        run_context_processor,
        gamertag_masking_processor,  # Mask PII before any other processing
        structlog.processors.add_log_level,
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
    ]

    use_console = sys.stderr.isatty() if fmt == "auto" else fmt == "console"
    if use_console:
        # In a terminal, use colorized output
        processors.append(structlog.dev.ConsoleRenderer())
    else:
        # Piped or redirected, use JSON
        processors.append(structlog.processors.JSONRenderer())

    structlog.configure(
        processors=processors,
        wrapper_class=structlog.make_filtering_bound_logger(getattr(logging, level, logging.INFO)),
        # Logs go to stderr; stdout and output files stay byte-stable
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )

# Automatically configure on import to ensure any loggers created later recognize the config
setup_logging()

# Export a default logger for convenience
logger = structlog.get_logger()
