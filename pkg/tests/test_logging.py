import importlib
import json
import pkgutil

import structlog

import app
from app.logging_setup import (
    command_ctx,
    gamertag_masking_processor,
    mask_gamertag,
    run_context_processor,
    run_id_ctx,
    setup_logging,
)


def test_mask_gamertag():
    assert mask_gamertag("NobleSpartan117") == "N***"
    assert mask_gamertag("x") == "x***"
    assert mask_gamertag("") == ""
    assert mask_gamertag(None) is None


def test_masking_processor():
    processed = gamertag_masking_processor(None, "info", {"event": "name_loaded", "gamertag": "RedGhost7"})
    assert processed["gamertag"] == "R***"

    processed = gamertag_masking_processor(None, "info", {"gamertags": ["Echo1", "Zulu2"]})
    assert processed["gamertags"] == ["E***", "Z***"]

    processed = gamertag_masking_processor(None, "info", {"event": "world_generated"})
    assert "gamertag" not in processed

    processed = gamertag_masking_processor(None, "info", {"gamertag": 123})
    assert processed["gamertag"] == 123


def test_run_context_processor():
    rid, cmd = run_id_ctx.set("abc123def456"), command_ctx.set("infer")
    try:
        processed = run_context_processor(None, "info", {"event": "x"})
        assert processed["run_id"] == "abc123def456"
        assert processed["command"] == "infer"
        # Explicit values win
        assert run_context_processor(None, "info", {"command": "other"})["command"] == "other"
    finally:
        run_id_ctx.reset(rid)
        command_ctx.reset(cmd)
    assert "run_id" not in run_context_processor(None, "info", {"event": "x"})


def test_json_lines_go_to_stderr(capsys):
    setup_logging(level="INFO", fmt="json")
    structlog.get_logger().info("world_generated", gamertag="NightFalcon3", games=4)
    captured = capsys.readouterr()
    assert captured.out == ""
    line = json.loads(captured.err.strip().splitlines()[-1])
    assert line["event"] == "world_generated"
    assert line["gamertag"] == "N***"
    assert line["level"] == "info"


def test_level_filtering(capsys):
    setup_logging(level="WARNING", fmt="json")
    structlog.get_logger().info("quiet")
    assert capsys.readouterr().err == ""


def test_every_app_module_has_a_docstring():
    for info in pkgutil.walk_packages(app.__path__, "app."):
        assert importlib.import_module(info.name).__doc__, info.name
