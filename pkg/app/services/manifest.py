"""
Run manifests.

Every subcommand records what it was asked to do next to its outputs:
resolved option values, input checksums, seed and artifact version. Paths
are stored relative to the manifest's directory so that a run directory
can be moved or compared with another one byte for byte.
"""
import hashlib
import json
import os
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

from .. import __version__
from ..exceptions import InputFormatError
from ..logging_setup import logger
from ..schemas import RunManifest

MANIFEST_NAME = "manifest.json"
# Execution knobs that never change output bytes
VOLATILE_KEYS = {"threads", "log_level", "from_manifest", "handler"}


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _relative(value: str, base: Path) -> str:
    return Path(os.path.relpath(Path(value).resolve(), base.resolve())).as_posix()


def build_manifest(
    subcommand: str,
    options: Dict[str, Any],
    base_dir,
    inputs: Iterable[str] = (),
    path_keys: Iterable[str] = (),
    seed: Optional[int] = None,
) -> RunManifest:
    """
    Args:
        subcommand: Name of the subcommand
        options: Resolved option values (argparse namespace as a dict)
        base_dir: Directory the manifest is written to
        inputs: Input files to checksum
        path_keys: Option names holding paths, stored relative to base_dir
        seed: Seed of the run, if it uses randomness
    """
    base = Path(base_dir)
    path_keys = set(path_keys)
    config = {}
    for key in sorted(options):
        value = options[key]
        if key in VOLATILE_KEYS or callable(value):
            continue
        if key in path_keys and value is not None:
            value = _relative(str(value), base)
        config[key] = value
    checksums = {_relative(str(p), base): sha256_file(p) for p in inputs if p is not None and Path(p).is_file()}
    return RunManifest(subcommand=subcommand, config=config, inputs=dict(sorted(checksums.items())),
                       seed=seed, version=__version__)


def manifest_json(manifest: RunManifest) -> str:
    return json.dumps(manifest.model_dump(), indent=2, sort_keys=True) + "\n"


def run_id(manifest: RunManifest) -> str:
    """Short content hash; identical runs share a run id."""
    return hashlib.sha256(manifest_json(manifest).encode("utf-8")).hexdigest()[:12]


def manifest_path_for(output, is_dir: bool) -> Path:
    """`<dir>/manifest.json` for directory outputs, `<file>.manifest.json` for single files."""
    output = Path(output)
    return output / MANIFEST_NAME if is_dir else output.with_name(output.name + ".manifest.json")


def write_manifest(path, manifest: RunManifest) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(manifest_json(manifest), encoding="utf-8")
    logger.debug("manifest_written", path=str(path), run_id=run_id(manifest))
    return str(path)


def load_manifest(path) -> RunManifest:
    path = str(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise InputFormatError(f"invalid manifest: {e.msg}", path=path, line=e.lineno)
    except UnicodeDecodeError:
        raise InputFormatError("manifest is not valid UTF-8", path=path)
    return RunManifest(**data)


def replay_options(manifest: RunManifest, manifest_path, path_keys: Iterable[str] = ()) -> Dict[str, Any]:
    """Recorded options with relative paths resolved against the manifest's directory."""
    base = Path(manifest_path).parent
    options = dict(manifest.config)
    for key in path_keys:
        if options.get(key) is not None:
            options[key] = str(base / options[key])
    for rel, expected in manifest.inputs.items():
        actual = base / rel
        if not actual.is_file():
            logger.warning("manifest_input_missing", path=str(actual))
        elif sha256_file(actual) != expected:
            logger.warning("manifest_input_changed", path=str(actual))
    return options
