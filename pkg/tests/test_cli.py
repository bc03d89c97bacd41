import json
from pathlib import Path

import pytest

from app.commands import build_parser
from app.main import main, manifest_argv

SMALL = ["--seed", "7", "--agents", "300", "--days", "21"]


def _tree_bytes(root: Path):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def world_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "world"
    assert main(["synth", *SMALL, "-o", str(out)]) == 0
    return out


def test_synth_writes_world_and_manifest(world_dir):
    names = {p.name for p in world_dir.iterdir()}
    assert {"events.tsv", "labels.tsv", "names.tsv", "friends.tsv", "agents.tsv", "world.conf",
            "manifest.json"} <= names
    manifest = json.loads((world_dir / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["subcommand"] == "synth"
    assert manifest["seed"] == 7
    assert manifest["config"]["agents"] == 300
    assert manifest["config"]["output"] == "."


def test_ingest(world_dir, tmp_path):
    out = tmp_path / "ingested"
    assert main(["ingest", "--store", str(world_dir), "-o", str(out)]) == 0
    summary = json.loads((out / "store.json").read_text(encoding="utf-8"))
    assert summary["bin_seconds"] == 600
    assert summary["pairs"] >= summary["pairs_with_3_sessions"] > 0
    assert (out / "events.tsv").read_bytes() == (world_dir / "events.tsv").read_bytes()
    # A second run reuses the pair cache and writes the same bytes
    before = _tree_bytes(out)
    assert main(["ingest", "--store", str(world_dir), "-o", str(out)]) == 0
    assert _tree_bytes(out) == before


def test_features_train_eval_robustness(world_dir, tmp_path):
    features = tmp_path / "features.tsv"
    labels = str(world_dir / "labels.tsv")
    assert main(["features", "--store", str(world_dir), "-o", str(features)]) == 0
    assert (tmp_path / "features.tsv.manifest.json").is_file()

    assert main(["train", "--features", str(features), "--labels", labels, "-o", str(tmp_path / "lr.txt")]) == 0
    assert (tmp_path / "lr.txt").read_text(encoding="utf-8").startswith("# tie-logistic v1")
    assert main(["train", "--model", "tree", "--features", str(features), "--labels", labels,
                 "-o", str(tmp_path / "tree.txt")]) == 0
    assert (tmp_path / "tree.txt").read_text(encoding="utf-8").startswith("# tie-tree v1")

    assert main(["eval", "--features", str(features), "--labels", labels, "--store", str(world_dir),
                 "-o", str(tmp_path / "eval")]) == 0
    for name in ("normalization.tsv", "feature_table.tsv", "tree_comparison.tsv", "class_summary.tsv",
                 "nx_ccdf.tsv", "roc/ac.tsv", "manifest.json"):
        assert (tmp_path / "eval" / name).is_file()

    assert main(["robustness", "--features", str(features), "--labels", labels, "--permutations", "3",
                 "-o", str(tmp_path / "robustness.tsv")]) == 0
    assert (tmp_path / "robustness.tsv").read_text(encoding="utf-8").startswith("# bin_lo")


def test_infer_and_graphstats(world_dir, tmp_path):
    out = tmp_path / "net"
    assert main(["infer", "--store", str(world_dir), "--truth", str(world_dir / "friends.tsv"),
                 "--threshold-rule", "over", "-o", str(out)]) == 0
    recovery = json.loads((out / "recovery.json").read_text(encoding="utf-8"))
    assert recovery["best"]["f1"] >= recovery["selected"]["f1"]
    assert recovery["min_shared_sessions"] == 3
    assert "# rule over" in (out / "graph.tsv").read_text(encoding="utf-8")

    assert main(["graphstats", "--graph", str(out / "graph.tsv"), "-o", str(tmp_path / "stats")]) == 0
    summary = json.loads((tmp_path / "stats" / "summary.json").read_text(encoding="utf-8"))
    assert summary["note"] == "isolated players excluded"


def test_replay_from_manifest_reproduces_bytes(world_dir, tmp_path):
    features = tmp_path / "features.tsv"
    assert main(["features", "--store", str(world_dir / "events.tsv"), "--all-players", "--tau-max", "144",
                 "-o", str(features)]) == 0
    manifest = tmp_path / "features.tsv.manifest.json"
    argv = manifest_argv(str(manifest))
    assert argv[0] == "features"
    assert "--all-players" in argv and "--threads" not in argv
    first, first_manifest = features.read_bytes(), manifest.read_bytes()
    features.unlink()
    assert main(["--from-manifest", str(manifest)]) == 0
    assert features.read_bytes() == first
    assert manifest.read_bytes() == first_manifest


def test_usage_errors_exit_1(capsys):
    assert main([]) == 1
    assert main(["features"]) == 1
    assert "usage:" in capsys.readouterr().err
    assert main(["bogus"]) == 1


def test_invalid_world_config_exits_1(tmp_path):
    assert main(["synth", "--agents", "0", "-o", str(tmp_path / "w")]) == 1


def test_parameter_error_exits_1(tiny_log, tiny_labels, tmp_path):
    features = tmp_path / "f.tsv"
    assert main(["features", "--store", str(tiny_log), "--all-players", "-o", str(features)]) == 0
    assert main(["train", "--model", "tree", "--folds", "1", "--features", str(features),
                 "--labels", str(tiny_labels), "-o", str(tmp_path / "t.txt")]) == 1


@pytest.mark.parametrize("content, line", [
    (b"# 0 600\n1\t0\t0\t0\tnot-a-player\t0\t0\t0\n", 2),
    (b"# 0 600\n1\t0\t0\t0\t5\t0\t0\t0\n1\t0\t0\t1\t\xff\t0\t0\t0\n", 3),
    (b"# 0 600\n1\t0\t0\t0\t5\t99999999999999999999\t0\t0\n", 2),
])
def test_malformed_log_exits_2(tmp_path, capsys, content, line):
    bad = tmp_path / "events.tsv"
    bad.write_bytes(content)
    assert main(["features", "--store", str(bad), "-o", str(tmp_path / "f.tsv")]) == 2
    assert main(["ingest", "--store", str(bad), "-o", str(tmp_path / "ingested")]) == 2
    err = capsys.readouterr().err
    assert "command_failed" in err and f'"line": {line}' in err
    assert "unhandled_exception" not in err


def test_bad_graph_header_exits_2(tmp_path, capsys):
    graph = tmp_path / "graph.tsv"
    graph.write_text("# threshold abc\n1\t2\n", encoding="utf-8")
    assert main(["graphstats", "--graph", str(graph), "-o", str(tmp_path / "stats")]) == 2
    assert '"line": 1' in capsys.readouterr().err


def test_ingest_rebuilds_damaged_pair_cache(world_dir, tmp_path):
    out = tmp_path / "ingested"
    assert main(["ingest", "--store", str(world_dir), "-o", str(out)]) == 0
    cache = out / "pairs.bin"
    good = cache.read_bytes()
    damaged = bytearray(good)
    damaged[12] = 0xFF  # first byte of the stored store checksum
    cache.write_bytes(bytes(damaged))
    assert main(["ingest", "--store", str(world_dir), "-o", str(out)]) == 0
    assert cache.read_bytes() == good


def test_names_reach_logs_only_masked(world_dir, tmp_path, capsys):
    names = dict(line.split("\t", 1) for line in
                 (world_dir / "names.tsv").read_text(encoding="utf-8").splitlines())
    extra = tmp_path / "names.tsv"
    extra.write_text((world_dir / "names.tsv").read_text(encoding="utf-8") + "9223372036854775807\tGhostPlayer\n",
                     encoding="utf-8")
    assert main(["--log-level", "INFO", "ingest", "--store", str(world_dir), "--names", str(extra),
                 "-o", str(tmp_path / "ingested")]) == 0
    assert main(["--log-level", "INFO", "infer", "--store", str(world_dir), "--names", str(extra),
                 "-o", str(tmp_path / "net")]) == 0
    events = [json.loads(line) for line in capsys.readouterr().err.splitlines() if line.startswith("{")]
    stray = next(e for e in events if e["event"] == "names_without_games")
    assert stray["count"] >= 1
    assert all(len(tag) == 4 and tag.endswith("***") for tag in stray["gamertags"])
    top = next(e for e in events if e["event"] == "top_degree_players")
    assert len(top["gamertags"]) == len(top["players"]) > 0
    for player, tag in zip(top["players"], top["gamertags"]):
        assert tag == names[str(player)][0] + "***"
    logged = "\n".join(json.dumps(e) for e in events)
    assert "GhostPlayer" not in logged
    assert not any(names[str(p)] in logged for p in top["players"])
    manifest = json.loads((tmp_path / "net" / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["config"]["names"] == "../names.tsv"


def test_single_class_exits_3(tiny_log, tmp_path):
    features = tmp_path / "f.tsv"
    labels = tmp_path / "labels.tsv"
    labels.write_text("3\t4\t0\n", encoding="utf-8")
    assert main(["features", "--store", str(tiny_log), "--all-players", "-o", str(features)]) == 0
    assert main(["train", "--features", str(features), "--labels", str(labels), "-o", str(tmp_path / "m.txt")]) == 3


@pytest.mark.slow
def test_pipeline_is_deterministic(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(["pipeline", *SMALL, "--permutations", "3", "--threads", "1", "-o", str(a)]) == 0
    assert main(["pipeline", *SMALL, "--permutations", "3", "--threads", "1", "-o", str(b)]) == 0
    assert main(["pipeline", *SMALL, "--permutations", "3", "--threads", "8", "-o", str(c)]) == 0
    first = _tree_bytes(a)
    for name in ("world/events.tsv", "features.tsv", "models/tree.txt", "eval/feature_table.tsv",
                 "robustness.tsv", "network_under/graph.tsv", "network_over/stats/summary.json", "manifest.json"):
        assert name in first
    assert _tree_bytes(b) == first
    assert _tree_bytes(c) == first


def test_pipeline_accepts_bin_width():
    args = build_parser().parse_args(["pipeline", "--bin-seconds", "1200"])
    assert args.bin_seconds == 1200


@pytest.mark.slow
def test_pipeline_rebins_the_world(tmp_path):
    out = tmp_path / "run"
    assert main(["pipeline", *SMALL, "--permutations", "2", "--bin-seconds", "1200", "-o", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["config"]["bin_seconds"] == 1200
    assert (out / "network_under" / "graph.tsv").is_file()
