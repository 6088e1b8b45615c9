"""Brute-force reference implementations and random-instance generators."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np

from graphrisk.graph import CommunicationGraph, DependenceGraph
from graphrisk.model import DependencyEdge, SystemModel, build_model
from graphrisk.synthetic import SyntheticSpec, synthetic_document


def simple_paths(adjacency, source):
    """Every simple path starting at ``source``, as node tuples."""
    stack = [(source,)]
    while stack:
        path = stack.pop()
        yield path
        for nxt in adjacency[path[-1]]:
            if nxt not in path:
                stack.append(path + (nxt,))


def brute_shortest(cg: CommunicationGraph, source: str) -> dict[str, tuple[float, tuple[str, ...]]]:
    """Minimum-weight simple path to every reachable node; ties go to the smallest node sequence."""
    best: dict[str, tuple[float, tuple[str, ...]]] = {}
    for path in simple_paths(cg.adjacency, source):
        w = math.fsum(cg.adjacency[a][b] for a, b in zip(path, path[1:]))
        label = (w, path)
        if path[-1] not in best or label < best[path[-1]]:
            best[path[-1]] = label
    return best


def random_comm_graph(rng: np.random.Generator, n: int, p_edge: float) -> CommunicationGraph:
    """Integer weights keep path sums exact, so ties are real ties."""
    nodes = tuple(f"v{i}" for i in range(n))
    adjacency: dict[str, dict[str, float]] = {v: {} for v in nodes}
    for a, b in itertools.combinations(nodes, 2):
        if rng.random() < p_edge:
            w = float(rng.integers(1, 5))
            adjacency[a][b] = adjacency[b][a] = w
    return CommunicationGraph(nodes, adjacency)


def digraph(n: int, edges) -> DependenceGraph:
    nodes = tuple(f"n{i}" for i in range(n))
    return DependenceGraph(nodes, {(nodes[u], nodes[v]): DependencyEdge.of(nodes[u], nodes[v], "SR")
                                   for u, v in edges}, "oracle")


def brute_betweenness(n: int, edges) -> list[Fraction]:
    """Directed, unweighted, normalized by (n-1)(n-2); all shortest paths found by enumeration."""
    adjacency = {i: [v for u, v in edges if u == i] for i in range(n)}
    by_pair: dict[tuple[int, int], list[tuple[int, ...]]] = {}
    for s in range(n):
        for path in simple_paths(adjacency, s):
            if len(path) > 1:
                by_pair.setdefault((s, path[-1]), []).append(path)
    score = [Fraction(0)] * n
    for paths in by_pair.values():
        shortest = min(len(p) for p in paths)
        best = [p for p in paths if len(p) == shortest]
        for v in range(n):
            score[v] += Fraction(sum(1 for p in best if v in p[1:-1]), len(best))
    norm = (n - 1) * (n - 2)
    return [x / norm if norm else Fraction(0) for x in score]


def all_digraphs(n: int):
    pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
    for mask in range(1 << len(pairs)):
        yield [pairs[i] for i in range(len(pairs)) if mask >> i & 1]


def random_digraph(rng: np.random.Generator, n: int):
    p = rng.uniform(0.1, 0.7)
    return [(u, v) for u in range(n) for v in range(n) if u != v and rng.random() < p]


def random_model(seed: int, max_assets: int = 8, max_vulns: int = 30) -> SystemModel:
    rng = np.random.default_rng(seed)
    spec = SyntheticSpec(
        n_assets=int(rng.integers(2, max_assets + 1)),
        n_vulns=int(rng.integers(0, max_vulns + 1)),
        subnets=int(rng.integers(1, 4)),
        cross_edges_per_asset=float(rng.uniform(0, 2)),
        criticality_threshold=float(rng.uniform(0.1, 0.5)),
        seed=seed,
    )
    return build_model(synthetic_document(spec))
