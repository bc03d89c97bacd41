"""
Graph statistics service.

Structural summary of an inferred network: degree CCDF, local clustering
from sparse triangle counts, and connected components by disjoint sets.
Isolated players are never part of an inferred graph.
"""
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.cluster.hierarchy import DisjointSet

from ..exceptions import InputFormatError, UnknownPlayerError
from ..logging_setup import logger
from .interaction_store import parse_int, text_lines

ISOLATES_NOTE = "isolated players excluded"


@dataclass(frozen=True)
class InferredGraph:
    """Undirected simple graph over player ids; edges index into `nodes` with u < v, sorted."""
    nodes: np.ndarray
    edges: np.ndarray
    threshold: float = float("nan")
    rule: str = ""

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.size)

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n_nodes)

    def index_of(self, node: int) -> int:
        i = int(np.searchsorted(self.nodes, np.uint64(node))) if node >= 0 else self.n_nodes
        if i >= self.n_nodes or int(self.nodes[i]) != node:
            raise UnknownPlayerError(node)
        return i

    def edge_ids(self) -> np.ndarray:
        return self.nodes[self.edges]

    def adjacency(self) -> sparse.csr_matrix:
        n = self.n_nodes
        u, v = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * u.size, dtype=np.int64)
        return sparse.csr_matrix((data, (np.r_[u, v], np.r_[v, u])), shape=(n, n))


def from_edges(pairs, threshold: float = float("nan"), rule: str = "") -> InferredGraph:
    """Build a graph from (id, id) pairs; self-loops and duplicates are dropped."""
    pairs = np.asarray(pairs, dtype=np.uint64).reshape(-1, 2)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    pairs = np.sort(pairs, axis=1)
    if pairs.size:
        pairs = np.unique(pairs, axis=0)
    nodes = np.unique(pairs.ravel())
    edges = np.searchsorted(nodes, pairs).astype(np.int64).reshape(-1, 2)
    return InferredGraph(nodes=nodes, edges=edges, threshold=float(threshold), rule=rule)


def ccdf(values) -> Tuple[np.ndarray, np.ndarray]:
    """Support and P(X >= v) over it."""
    values = np.asarray(values)
    if values.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    support, counts = np.unique(values, return_counts=True)
    tail = np.cumsum(counts[::-1])[::-1]
    return support, tail / values.size


# ============================================================================
# Clustering
# ============================================================================

def clustering_all(g: InferredGraph) -> np.ndarray:
    """C_i for every node; 0 where degree < 2."""
    if g.n_nodes == 0:
        return np.zeros(0)
    A = g.adjacency()
    closed = np.asarray((A @ A).multiply(A).sum(axis=1)).ravel()
    deg = g.degrees()
    out = np.zeros(g.n_nodes)
    ok = deg >= 2
    out[ok] = closed[ok] / (deg[ok] * (deg[ok] - 1))
    return out


def clustering(g: InferredGraph, node: int) -> float:
    i = g.index_of(node)
    A = g.adjacency()
    nbrs = A.indices[A.indptr[i]:A.indptr[i + 1]]
    d = nbrs.size
    if d < 2:
        return 0.0
    links = A[nbrs][:, nbrs].sum() / 2
    return float(links / (d * (d - 1) / 2))


def clustering_by_degree(g: InferredGraph, values: Optional[np.ndarray] = None):
    """Mean C_i per degree, degrees >= 2 only."""
    values = clustering_all(g) if values is None else values
    deg = g.degrees()
    ok = deg >= 2
    support = np.unique(deg[ok])
    sums = np.bincount(deg[ok], weights=values[ok])
    counts = np.bincount(deg[ok])
    return support, sums[support] / counts[support]


def clustering_histogram(values: np.ndarray, degrees: np.ndarray):
    """Counts in [0, .1), [.1, .2), ..., [.9, 1.0] over nodes of degree >= 2."""
    vals = values[degrees >= 2]
    idx = np.minimum(np.floor(vals * 10 + 1e-9).astype(np.int64), 9)
    return np.arange(10) / 10.0, np.bincount(idx, minlength=10)


# ============================================================================
# Components
# ============================================================================

def component_labels(g: InferredGraph) -> np.ndarray:
    """Component root of every node index."""
    ds = DisjointSet(range(g.n_nodes))
    for u, v in g.edges.tolist():
        ds.merge(u, v)
    return np.asarray([ds[i] for i in range(g.n_nodes)], dtype=np.int64)


def components(g: InferredGraph) -> List[int]:
    """Component sizes, descending."""
    if g.n_nodes == 0:
        return []
    _, sizes = np.unique(component_labels(g), return_counts=True)
    return sorted(sizes.tolist(), reverse=True)


# ============================================================================
# Summary
# ============================================================================

@dataclass(frozen=True)
class GraphSummary:
    n_nodes: int
    n_edges: int
    n_components: int
    median_degree: float
    degree_ccdf: Tuple[np.ndarray, np.ndarray]
    clustering_by_degree: Tuple[np.ndarray, np.ndarray]
    clustering_hist: Tuple[np.ndarray, np.ndarray]
    component_sizes: Tuple[np.ndarray, np.ndarray]
    largest_component: int


def summarize(g: InferredGraph) -> GraphSummary:
    deg = g.degrees()
    values = clustering_all(g)
    sizes = components(g)
    size_support, size_counts = np.unique(np.asarray(sizes, dtype=np.int64), return_counts=True)
    summary = GraphSummary(
        n_nodes=g.n_nodes,
        n_edges=g.n_edges,
        n_components=len(sizes),
        median_degree=float(np.median(deg)) if deg.size else 0.0,
        degree_ccdf=ccdf(deg),
        clustering_by_degree=clustering_by_degree(g, values),
        clustering_hist=clustering_histogram(values, deg),
        component_sizes=(size_support, size_counts),
        largest_component=sizes[0] if sizes else 0,
    )
    logger.info(
        "graph_summarized", nodes=summary.n_nodes, edges=summary.n_edges,
        components=summary.n_components, median_degree=summary.median_degree,
    )
    return summary


def _two_columns(path: Path, header: str, a, b, fmt_b=repr) -> None:
    lines = [f"# {ISOLATES_NOTE}", f"# {header}"]
    lines += [f"{x}\t{fmt_b(y)}" for x, y in zip(np.asarray(a).tolist(), np.asarray(b).tolist())]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_summary(out_dir, summary: GraphSummary) -> Dict[str, str]:
    """Plot-ready dumps plus summary.json; returns the written paths by name."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "degree_ccdf": out / "degree_ccdf.tsv",
        "clustering_by_degree": out / "clustering_by_degree.tsv",
        "clustering_hist": out / "clustering_hist.tsv",
        "component_sizes": out / "component_sizes.tsv",
        "summary": out / "summary.json",
    }
    _two_columns(files["degree_ccdf"], "degree\tccdf", *summary.degree_ccdf)
    _two_columns(files["clustering_by_degree"], "degree\tmean_ci", *summary.clustering_by_degree)
    _two_columns(files["clustering_hist"], "ci_bin\tcount", *summary.clustering_hist, fmt_b=str)
    _two_columns(files["component_sizes"], "component_size\tcount", *summary.component_sizes, fmt_b=str)
    files["summary"].write_text(json.dumps({
        "nodes": summary.n_nodes,
        "edges": summary.n_edges,
        "components": summary.n_components,
        "largest_component": summary.largest_component,
        "median_degree": summary.median_degree,
        "note": ISOLATES_NOTE,
    }, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return {k: str(v) for k, v in files.items()}


# ============================================================================
# Edge list and degree dumps
# ============================================================================

def write_graph(path, g: InferredGraph, extra: Optional[Dict[str, object]] = None) -> None:
    lines = [f"# threshold {g.threshold!r}", f"# rule {g.rule}", f"# nodes {g.n_nodes}", f"# edges {g.n_edges}",
             f"# {ISOLATES_NOTE}"]
    for key, value in sorted((extra or {}).items()):
        lines.append(f"# {key} {value}")
    lines += [f"{u}\t{v}" for u, v in g.edge_ids().tolist()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_graph(path) -> InferredGraph:
    path = str(path)
    threshold, rule, pairs = float("nan"), "", []
    for line_no, raw in text_lines(path):
        text = raw.strip()
        if not text:
            continue
        if text.startswith("#"):
            parts = text[1:].split(None, 1)
            if len(parts) == 2 and parts[0] == "threshold":
                try:
                    threshold = float(parts[1])
                except ValueError:
                    raise InputFormatError(f"threshold is not a number: {parts[1]!r}", path=path, line=line_no)
            elif len(parts) == 2 and parts[0] == "rule":
                rule = parts[1]
            continue
        tokens = text.split()
        if len(tokens) != 2:
            raise InputFormatError(f"expected 2 fields, found {len(tokens)}", path=path, line=line_no)
        u, v = (parse_int(t, path, line_no, "node_id") for t in tokens)
        pairs.append((u, v))
    return from_edges(pairs, threshold=threshold, rule=rule)


def write_degree_distribution(path, g: InferredGraph) -> None:
    support, counts = np.unique(g.degrees(), return_counts=True)
    lines = [f"# {ISOLATES_NOTE}", "# degree\tcount"]
    lines += [f"{d}\t{c}" for d, c in zip(support.tolist(), counts.tolist())]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
