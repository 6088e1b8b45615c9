"""Dependence and communication graphs, centralities and asset criticality."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import networkx as nx
import numpy as np
from scipy import sparse

from graphrisk.errors import GraphRiskError, ScopeError
from graphrisk.model import (
    DependencyEdge,
    EdgeKind,
    RiskParams,
    SystemModel,
    component_key,
)

SYSTEM = "system"
PAGERANK_TOL = 1e-9
PAGERANK_MAX_ITER = 200


@dataclass(frozen=True)
class DependenceGraph:
    """Directed graph; an edge ``u -> v`` means *u depends on v*."""

    nodes: tuple[str, ...]
    edges: Mapping[tuple[str, str], DependencyEdge]
    scope: str

    def __post_init__(self):
        succ: dict[str, list[tuple[str, float]]] = {n: [] for n in self.nodes}
        pred: dict[str, list[tuple[str, float]]] = {n: [] for n in self.nodes}
        for (u, v), e in self.edges.items():
            succ[u].append((v, e.weight))
            pred[v].append((u, e.weight))
        object.__setattr__(self, "_succ", {n: tuple(sorted(x)) for n, x in succ.items()})
        object.__setattr__(self, "_pred", {n: tuple(sorted(x)) for n, x in pred.items()})

    def __contains__(self, node: str) -> bool:
        return node in self._succ

    def __len__(self) -> int:
        return len(self.nodes)

    def dependencies(self, node: str) -> tuple[tuple[str, float], ...]:
        """Nodes that ``node`` depends on, with edge weights."""
        return self._succ[node]

    def dependents(self, node: str) -> tuple[tuple[str, float], ...]:
        """Nodes that depend on ``node``, with edge weights."""
        return self._pred[node]

    def weight(self, source: str, target: str) -> float:
        e = self.edges.get((source, target))
        return e.weight if e else 0.0

    def to_networkx(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        for (u, v), e in self.edges.items():
            g.add_edge(u, v, weight=e.weight, kind=e.kind.value)
        return g

    def matrix(self) -> list[list[float]]:
        """Row i, column j holds the weight of "i depends on j"."""
        return [[self.weight(u, v) for v in self.nodes] for u in self.nodes]

    def edge_list(self) -> str:
        lines = [f"{e.source} {e.target} {e.weight:g} {e.kind.value}" for e in self.edges.values()]
        return "\n".join(lines) + ("\n" if lines else "")

    def matrix_text(self) -> str:
        width = max((len(n) for n in self.nodes), default=1)
        rows = [" " * width + " " + " ".join(self.nodes)]
        for name, row in zip(self.nodes, self.matrix()):
            rows.append(name.ljust(width) + " " + " ".join(f"{w:g}".rjust(len(n)) for w, n in zip(row, self.nodes)))
        return "\n".join(rows) + "\n"


def _merge_edge(edges: dict[tuple[str, str], DependencyEdge], edge: DependencyEdge) -> None:
    # parallel rules between one pair keep the heaviest dependency
    key = (edge.source, edge.target)
    old = edges.get(key)
    if old is None or edge.weight > old.weight:
        edges[key] = edge


def _qualify(asset_id: str, edge: DependencyEdge) -> DependencyEdge:
    return DependencyEdge(component_key(asset_id, edge.source), component_key(asset_id, edge.target), edge.kind, edge.weight)


def _graph_for_assets(model: SystemModel, asset_ids: Iterable[str], scope: str, with_nr: bool) -> DependenceGraph:
    members = list(asset_ids)
    member_set = set(members)
    nodes: list[str] = []
    edges: dict[tuple[str, str], DependencyEdge] = {}
    for aid in members:
        asset = model.asset(aid)
        nodes.extend(component_key(aid, c.id) for c in asset.components)
        for e in asset.intra_edges:
            _merge_edge(edges, _qualify(aid, e))
    node_set = set(nodes)
    for e in model.cross_asset_edges:
        if e.kind is EdgeKind.NR:
            if not with_nr or not {e.source, e.target} <= member_set:
                continue
            for end in (e.source, e.target):
                if end not in node_set:
                    node_set.add(end)
                    nodes.append(end)
            _merge_edge(edges, e)
        elif e.source in node_set and e.target in node_set:
            _merge_edge(edges, e)
    return DependenceGraph(tuple(nodes), edges, scope)


def build_dependence_graph(model: SystemModel, scope: str = SYSTEM) -> DependenceGraph:
    """Asset-local graph for an asset id, or the system-wide graph for ``"system"``."""
    if scope == SYSTEM:
        return _graph_for_assets(model, [a.id for a in model.assets], SYSTEM, with_nr=True)
    try:
        model.asset(scope)
    except KeyError:
        raise ScopeError(f"unknown scope {scope!r}") from None
    return _graph_for_assets(model, [scope], f"asset:{scope}", with_nr=False)


def build_host_graph(model: SystemModel, host_id: str) -> DependenceGraph:
    """Components of every asset on a host plus the dependencies among them."""
    try:
        host = model.host(host_id)
    except KeyError:
        raise ScopeError(f"unknown host {host_id!r}") from None
    return _graph_for_assets(model, host.assets, f"host:{host_id}", with_nr=False)


# ---------------------------------------------------------------------------
# centrality

@dataclass(frozen=True)
class CentralityScores:
    degree: Mapping[str, float]
    betweenness: Mapping[str, float]
    pagerank: Mapping[str, float]
    combined: Mapping[str, float]
    normalized_combined: Mapping[str, float]

    def __getitem__(self, node: str) -> float:
        return self.normalized_combined[node]


def pagerank(g: DependenceGraph, damping: float = 0.85, tol: float = PAGERANK_TOL,
             max_iter: int = PAGERANK_MAX_ITER) -> dict[str, float]:
    """Weighted PageRank in which rank flows toward depended-upon nodes.

    Dangling nodes spread their rank uniformly. Iteration stops when the L1
    change drops below ``tol`` or after ``max_iter`` sweeps.
    """
    n = len(g.nodes)
    if n == 0:
        return {}
    index = {node: i for i, node in enumerate(g.nodes)}
    rows, cols, vals = [], [], []
    for (u, v), e in g.edges.items():
        rows.append(index[u])
        cols.append(index[v])
        vals.append(e.weight)
    m = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n), dtype=float)
    out = np.asarray(m.sum(axis=1)).ravel()
    dangling = out == 0
    inv = np.zeros(n)
    inv[~dangling] = 1.0 / out[~dangling]
    transition = sparse.diags(inv) @ m  # row-stochastic for non-dangling rows
    x = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        prev = x
        x = damping * (transition.T @ prev + prev[dangling].sum() / n) + (1.0 - damping) / n
        if np.abs(x - prev).sum() < tol:
            break
    x = x / x.sum()
    return {node: float(x[i]) for i, node in enumerate(g.nodes)}


def centrality(g: DependenceGraph, damping: float = 0.85) -> CentralityScores:
    n = len(g.nodes)
    if n == 0:
        raise GraphRiskError("centrality of an empty graph")
    nxg = g.to_networkx()
    if n > 1:
        degree = {node: (nxg.in_degree(node) + nxg.out_degree(node)) / (n - 1) for node in g.nodes}
    else:
        degree = {node: 0.0 for node in g.nodes}
    # unweighted directed betweenness, normalized by (n-1)(n-2)
    betweenness = nx.betweenness_centrality(nxg, normalized=True, weight=None) if n > 2 else {}
    betweenness = {node: float(betweenness.get(node, 0.0)) for node in g.nodes}
    pr = pagerank(g, damping)
    combined = {node: (degree[node] + betweenness[node] + pr[node]) / 3.0 for node in g.nodes}
    top = max(combined.values())
    normalized = {node: (1.0 if combined[node] == top else combined[node] / top) for node in g.nodes}
    return CentralityScores(degree, betweenness, pr, combined, normalized)


def asset_centrality(model: SystemModel, asset_id: str, system_scores: CentralityScores | None = None,
                     params: RiskParams | None = None) -> float:
    """Mean system-wide centrality of an asset's components."""
    asset = model.asset(asset_id)
    if not asset.components:
        raise GraphRiskError(f"asset {asset_id!r} has no components")
    if system_scores is None:
        p = params or model.params
        system_scores = centrality(build_dependence_graph(model, SYSTEM), p.pagerank_damping)
    values = [system_scores[component_key(asset_id, c.id)] for c in asset.components]
    return math.fsum(values) / len(values)


@dataclass(frozen=True)
class Criticality:
    score: float
    level: int
    centrality: float = 0.0
    business: float = 0.0


def criticality_from(centrality_value: float, business_value: float, p: RiskParams) -> Criticality:
    score = p.w1 * centrality_value + p.w2 * business_value
    # guard floor() against 0.3 * 10 == 2.9999999999999996 style artefacts
    level = math.floor(round(score * 10, 9))
    return Criticality(score, level, centrality_value, business_value)


def asset_criticality(model: SystemModel, asset_id: str, p: RiskParams | None = None,
                      system_scores: CentralityScores | None = None) -> Criticality:
    p = p or model.params
    asset = model.asset(asset_id)
    business = p.business_criticality_scale[asset.business_criticality_level]
    return criticality_from(asset_centrality(model, asset_id, system_scores, p), business, p)


# ---------------------------------------------------------------------------
# communication graph

@dataclass(frozen=True)
class CommunicationGraph:
    nodes: tuple[str, ...]
    adjacency: Mapping[str, Mapping[str, float]] = field(repr=False)

    def neighbors(self, node: str) -> Mapping[str, float]:
        return self.adjacency[node]

    def weight(self, a: str, b: str) -> float | None:
        return self.adjacency.get(a, {}).get(b)

    @property
    def edges(self) -> list[tuple[str, str, float]]:
        out = []
        for a in self.nodes:
            for b, w in sorted(self.adjacency[a].items()):
                if a < b:
                    out.append((a, b, w))
        return out

    def connected_components(self) -> list[frozenset[str]]:
        seen: set[str] = set()
        comps = []
        for start in self.nodes:
            if start in seen:
                continue
            stack, comp = [start], set()
            while stack:
                node = stack.pop()
                if node in comp:
                    continue
                comp.add(node)
                stack.extend(self.adjacency[node])
            seen |= comp
            comps.append(frozenset(comp))
        return comps


def build_communication_graph(model: SystemModel) -> CommunicationGraph:
    """Undirected reachability graph; duplicate edges keep the smallest weight."""
    nodes = tuple(model.waypoints) + tuple(a.id for a in model.assets)
    adjacency: dict[str, dict[str, float]] = {n: {} for n in nodes}
    for e in model.communication_edges:
        w = min(e.weight, adjacency[e.a].get(e.b, math.inf))
        adjacency[e.a][e.b] = w
        adjacency[e.b][e.a] = w
    return CommunicationGraph(nodes, adjacency)


def dijkstra(cg: CommunicationGraph, source: str) -> dict[str, tuple[float, tuple[str, ...]]]:
    """Shortest paths from ``source``.

    Among equal-weight paths the lexicographically smallest node sequence
    wins, which keeps results independent of insertion order.
    """
    best: dict[str, tuple[float, tuple[str, ...]]] = {source: (0.0, (source,))}
    heap: list[tuple[float, tuple[str, ...]]] = [(0.0, (source,))]
    done: set[str] = set()
    while heap:
        dist, path = heapq.heappop(heap)
        node = path[-1]
        if node in done:
            continue
        done.add(node)
        for nbr, w in cg.neighbors(node).items():
            if nbr in done:
                continue
            label = (dist + w, path + (nbr,))
            if nbr not in best or label < best[nbr]:
                best[nbr] = label
                heapq.heappush(heap, label)
    return best
