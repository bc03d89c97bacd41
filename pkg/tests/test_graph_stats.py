import itertools
import json

import networkx as nx
import numpy as np
import pytest

from app.exceptions import InputFormatError, UnknownPlayerError
from app.services.graph_stats import (
    ccdf,
    clustering,
    clustering_all,
    clustering_histogram,
    components,
    from_edges,
    read_graph,
    summarize,
    write_graph,
    write_summary,
)


def _brute_clustering(edges, node):
    nbrs = {v for u, v in edges if u == node} | {u for u, v in edges if v == node}
    d = len(nbrs)
    if d < 2:
        return 0.0
    links = sum(1 for a, b in itertools.combinations(sorted(nbrs), 2) if (a, b) in edges or (b, a) in edges)
    return links / (d * (d - 1) / 2)


def test_clique_star_triangle():
    clique = from_edges(list(itertools.combinations(range(1, 6), 2)))
    assert clustering_all(clique).tolist() == [1.0] * 5
    star = from_edges([(0, k) for k in range(1, 7)])
    assert clustering(star, 0) == 0.0
    assert clustering(star, 3) == 0.0
    triangle = from_edges([(1, 2), (2, 3), (1, 3)])
    assert clustering(triangle, 2) == 1.0
    assert components(triangle) == [3]


def test_clustering_matches_brute_force():
    rng = np.random.default_rng(12)
    for _ in range(50):
        n = int(rng.integers(3, 40))
        p = float(rng.uniform(0.05, 0.6))
        edges = {(a, b) for a, b in itertools.combinations(range(n), 2) if rng.random() < p}
        if not edges:
            continue
        g = from_edges(sorted(edges))
        bulk = clustering_all(g)
        for i, node in enumerate(g.nodes.tolist()):
            expected = _brute_clustering(edges, node)
            assert abs(bulk[i] - expected) < 1e-12
            assert abs(clustering(g, node) - expected) < 1e-12


def test_components_match_networkx():
    rng = np.random.default_rng(13)
    for _ in range(50):
        n = int(rng.integers(2, 60))
        edges = [(int(a), int(b)) for a, b in rng.integers(0, n, size=(int(rng.integers(1, n)), 2))]
        g = from_edges(edges)
        reference = nx.Graph()
        reference.add_edges_from((a, b) for a, b in edges if a != b)
        expected = sorted((len(c) for c in nx.connected_components(reference)), reverse=True)
        assert components(g) == expected


def test_from_edges_drops_loops_and_duplicates():
    g = from_edges([(5, 3), (3, 5), (4, 4), (3, 7)])
    assert g.nodes.tolist() == [3, 5, 7]
    assert g.edge_ids().tolist() == [[3, 5], [3, 7]]
    assert g.degrees().tolist() == [2, 1, 1]
    with pytest.raises(UnknownPlayerError):
        g.index_of(4)


def test_ccdf():
    support, tail = ccdf([1, 1, 2, 4])
    assert support.tolist() == [1, 2, 4]
    assert tail.tolist() == [1.0, 0.5, 0.25]
    assert ccdf([])[0].size == 0


def test_clustering_histogram_includes_one():
    values = np.array([0.0, 0.05, 0.1, 0.95, 1.0, 0.3])
    degrees = np.array([2, 2, 3, 4, 2, 1])
    edges, counts = clustering_histogram(values, degrees)
    assert edges[0] == 0.0 and edges.size == 10
    assert counts.tolist() == [2, 1, 0, 0, 0, 0, 0, 0, 0, 2]


def test_summary_files(tmp_path):
    g = from_edges([(1, 2), (2, 3), (1, 3), (7, 8)])
    summary = summarize(g)
    assert summary.n_components == 2
    assert summary.largest_component == 3
    files = write_summary(tmp_path / "stats", summary)
    data = json.loads(open(files["summary"], encoding="utf-8").read())
    assert data["nodes"] == 5 and data["edges"] == 4
    assert "isolated" in data["note"]
    assert set(files) == {"degree_ccdf", "clustering_by_degree", "clustering_hist", "component_sizes", "summary"}


def test_empty_graph_summary():
    summary = summarize(from_edges([]))
    assert summary.n_nodes == 0
    assert summary.largest_component == 0


def test_graph_file_round_trip(tmp_path):
    g = from_edges([(10, 20), (20, 30)], threshold=4.0, rule="over")
    path = tmp_path / "graph.tsv"
    write_graph(path, g, extra={"objective": "2"})
    back = read_graph(path)
    assert back.threshold == 4.0 and back.rule == "over"
    assert back.edge_ids().tolist() == g.edge_ids().tolist()


def test_read_graph_errors(tmp_path):
    path = tmp_path / "graph.tsv"
    path.write_text("# rule under\n1\t2\t3\n", encoding="utf-8")
    with pytest.raises(InputFormatError) as exc:
        read_graph(path)
    assert exc.value.line == 2
    path.write_text("a\tb\n", encoding="utf-8")
    with pytest.raises(InputFormatError):
        read_graph(path)
    path.write_text("# threshold abc\n1\t2\n", encoding="utf-8")
    with pytest.raises(InputFormatError, match="threshold") as exc:
        read_graph(path)
    assert exc.value.line == 1
    path.write_bytes(b"1\t2\n3\t\xfe\n")
    with pytest.raises(InputFormatError) as exc:
        read_graph(path)
    assert exc.value.line == 2
