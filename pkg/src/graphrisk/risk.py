"""Vulnerability, component, asset, host, network and system risk."""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from time import perf_counter
from typing import Iterable, Mapping

from graphrisk.errors import GraphRiskError, NoCriticalAssetsError, ScopeError
from graphrisk.graph import (
    SYSTEM,
    CentralityScores,
    CommunicationGraph,
    Criticality,
    DependenceGraph,
    build_communication_graph,
    build_dependence_graph,
    build_host_graph,
    centrality,
    criticality_from,
    dijkstra,
)
from graphrisk.model import (
    SEVERITY_LEVELS,
    ComponentNode,
    Host,
    RiskParams,
    SystemModel,
    VulnClass,
    VulnerabilityRecord,
    component_key,
    validate_params,
)

log = logging.getLogger(__name__)

fsum = math.fsum


def exploit_likelihood(v: VulnerabilityRecord, p: RiskParams) -> float:
    return (
        p.alpha * (v.likelihood_subscore / 10.0)
        + p.beta * v.epss
        + p.gamma_exploit * (1.0 if v.exploit_exists else 0.0)
    )


def propagation_likelihood(v: VulnerabilityRecord, p: RiskParams) -> float:
    return p.delta * (1.0 if v.scope_change else 0.0) + p.theta * (1.0 if v.ransomware else 0.0)


def direct_risk(v: VulnerabilityRecord, component_centrality: float, p: RiskParams) -> float:
    return exploit_likelihood(v, p) * v.impact_subscore * component_centrality


def propagation_targets(g: DependenceGraph, source: str) -> list[tuple[str, float]]:
    """Components reached from ``source`` by walking depends-on edges backwards.

    Breadth-first; each component is reached once and keeps the cumulative
    weight of the path that reached it first.
    """
    if source not in g:
        raise ScopeError(f"component {source!r} is not in graph {g.scope}")
    seen = {source}
    queue = deque([(source, 0.0)])
    reached = []
    while queue:
        node, weight = queue.popleft()
        for dependent, w in g.dependents(node):
            if dependent in seen:
                continue
            seen.add(dependent)
            cumulative = weight + w
            reached.append((dependent, cumulative))
            queue.append((dependent, cumulative))
    return reached


def indirect_risk(v: VulnerabilityRecord, source: str, g: DependenceGraph, p: RiskParams) -> float:
    if source not in g:
        raise ScopeError(f"component {source!r} is not in graph {g.scope}")
    pl = propagation_likelihood(v, p)
    if pl < p.sigma or not g.dependents(source):
        return 0.0
    return pl * fsum(w for _, w in propagation_targets(g, source)) * v.impact_subscore


@dataclass(frozen=True)
class VulnRiskBreakdown:
    cve_id: str
    asset_id: str
    component: str
    exploit_likelihood: float
    propagation_likelihood: float
    centrality: float
    direct: float
    indirect: float
    total: float
    propagation_targets: tuple[tuple[str, float], ...] = ()
    explanation: tuple[str, ...] = ()

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.asset_id, self.component, self.cve_id)


def vulnerability_risk(v: VulnerabilityRecord, g: DependenceGraph, p: RiskParams,
                       scores: CentralityScores | None = None) -> VulnRiskBreakdown:
    """Direct plus indirect risk of ``v`` on its component inside ``g``."""
    source = v.component_ref
    if source not in g:
        raise ScopeError(f"component {source!r} is not in graph {g.scope}")
    scores = scores or centrality(g, p.pagerank_damping)
    cent = scores[source]
    el = exploit_likelihood(v, p)
    pl = propagation_likelihood(v, p)
    direct = el * v.impact_subscore * cent
    has_incoming = bool(g.dependents(source))
    targets: tuple[tuple[str, float], ...] = ()
    indirect = 0.0
    if pl >= p.sigma and has_incoming:
        targets = tuple(propagation_targets(g, source))
        indirect = pl * fsum(w for _, w in targets) * v.impact_subscore

    why = [
        f"EL={el:.4f} (alpha*{v.likelihood_subscore:g}/10 + beta*EPSS {v.epss:g}"
        f" + gamma*exploit {int(v.exploit_exists)})",
        f"impact={v.impact_subscore:g}",
        f"centrality={cent:.4f}",
        f"PL={pl:.2f} (scope_change={v.scope_change}, ransomware={v.ransomware})",
    ]
    if targets:
        why.append("propagates to " + ", ".join(f"{n} (w={w:g})" for n, w in targets))
    elif pl >= p.sigma:
        why.append("no dependents, propagation blocked")
    else:
        why.append(f"PL below sigma={p.sigma:g}, no propagation")
    asset_id = source.partition("/")[0]
    return VulnRiskBreakdown(
        cve_id=v.cve_id,
        asset_id=asset_id,
        component=source,
        exploit_likelihood=el,
        propagation_likelihood=pl,
        centrality=cent,
        direct=direct,
        indirect=indirect,
        total=direct + indirect,
        propagation_targets=targets,
        explanation=tuple(why),
    )


def cvs(component: ComponentNode, p: RiskParams) -> float:
    """Severity-weighted CVSS sum divided by the sum of the severity weights."""
    if not component.vulnerabilities:
        return 0.0
    buckets: dict[str, list[float]] = {lvl: [] for lvl in SEVERITY_LEVELS}
    for v in component.vulnerabilities:
        buckets[v.severity].append(v.cvss_base)
    weights = [p.severity_weights.get(lvl, 0.0) for lvl in SEVERITY_LEVELS]
    num = fsum(w * fsum(buckets[lvl]) for w, lvl in zip(weights, SEVERITY_LEVELS))
    return num / fsum(weights)


def component_risk(model: SystemModel, key: str, p: RiskParams | None = None,
                   scores: CentralityScores | None = None) -> float:
    """CVS times asset-local centrality."""
    p = p or model.params
    asset_id = key.partition("/")[0]
    if scores is None:
        scores = centrality(build_dependence_graph(model, asset_id), p.pagerank_damping)
    return cvs(model.component(key), p) * scores[key]


def asset_risk(model: SystemModel, asset_id: str, p: RiskParams | None = None) -> float:
    p = p or model.params
    g = build_dependence_graph(model, asset_id)
    scores = centrality(g, p.pagerank_damping) if len(g) else None
    return fsum(vulnerability_risk(v, g, p, scores).total for v in model.asset(asset_id).vulnerabilities)


def classify_vulnerability(v: VulnerabilityRecord) -> VulnClass:
    return VulnClass.NETWORK if v.is_network_based else VulnClass.HOST


# ---------------------------------------------------------------------------
# attack paths

@dataclass(frozen=True)
class AttackPath:
    source: str
    target: str
    nodes: tuple[str, ...]
    weight: float
    from_entry: bool = True


def critical_assets(criticalities: Mapping[str, Criticality], p: RiskParams) -> list[str]:
    return [aid for aid, c in criticalities.items() if c.score > p.criticality_threshold]


def shortest_attack_paths(cg: CommunicationGraph, model: SystemModel, p: RiskParams | None = None,
                          criticalities: Mapping[str, Criticality] | None = None,
                          lateral: bool = True, notices: list[str] | None = None) -> list[AttackPath]:
    """Shortest paths to every critical asset.

    Paths start at each entry point and, when ``lateral`` is set, at every
    other asset as well; only entry-point paths carry ``from_entry=True``.
    Unreachable pairs are skipped and reported through ``notices``.
    """
    p = p or model.params
    if criticalities is None:
        criticalities = compute_criticalities(model, p)
    targets = critical_assets(criticalities, p)
    if not targets:
        raise NoCriticalAssetsError(
            f"no asset has criticality above {p.criticality_threshold:g}; lower criticality_threshold"
        )
    notices = notices if notices is not None else []
    cache: dict[str, dict] = {}

    def from_source(source: str, target: str, from_entry: bool) -> AttackPath | None:
        if source == target:
            return AttackPath(source, target, (source,), 0.0, from_entry)
        if source not in cache:
            cache[source] = dijkstra(cg, source)
        hit = cache[source].get(target)
        if hit is None:
            notices.append(f"{target} is unreachable from {source}")
            return None
        return AttackPath(source, target, hit[1], hit[0], from_entry)

    paths = []
    entries = list(model.entry_points)
    for target in targets:
        for source in entries:
            path = from_source(source, target, True)
            if path is not None:
                paths.append(path)
        if lateral:
            for a in model.assets:
                if a.id == target or a.id in entries:
                    continue
                path = from_source(a.id, target, False)
                if path is not None:
                    paths.append(path)
    return paths


def path_multiplicity(paths: Iterable[AttackPath], model: SystemModel, dedup: bool) -> dict[str, int]:
    """How many scored paths pass through each asset."""
    asset_ids = {a.id for a in model.assets}
    counts = {a.id: 0 for a in model.assets}
    for path in paths:
        if not path.from_entry:
            continue
        for node in path.nodes:
            if node in asset_ids:
                counts[node] += 1
    if dedup:
        counts = {k: min(v, 1) for k, v in counts.items()}
    return counts


def network_term(v: VulnerabilityRecord, system_scores: CentralityScores, p: RiskParams) -> float:
    if not v.is_network_based:
        return 0.0
    return exploit_likelihood(v, p) * v.impact_subscore * system_scores[v.component_ref]


def network_risk(paths: Iterable[AttackPath], model: SystemModel, p: RiskParams | None = None,
                 system_scores: CentralityScores | None = None) -> float:
    """Sum of network-exploitable vulnerability risk over entry-point paths."""
    p = p or model.params
    if system_scores is None:
        system_scores = centrality(build_dependence_graph(model, SYSTEM), p.pagerank_damping)
    mult = path_multiplicity(paths, model, p.dedup_paths)
    per_asset = [
        mult[a.id] * fsum(network_term(v, system_scores, p) for v in a.vulnerabilities)
        for a in model.assets
    ]
    return fsum(per_asset)


def compute_criticalities(model: SystemModel, p: RiskParams,
                          system_scores: CentralityScores | None = None) -> dict[str, Criticality]:
    if system_scores is None:
        system_scores = centrality(build_dependence_graph(model, SYSTEM), p.pagerank_damping)
    out = {}
    for a in model.assets:
        # component-less assets (bare appliances) contribute no structural weight
        values = [system_scores[component_key(a.id, c.id)] for c in a.components]
        cent = fsum(values) / len(values) if values else 0.0
        business = p.business_criticality_scale[a.business_criticality_level]
        out[a.id] = criticality_from(cent, business, p)
    return out


def host_risk(model: SystemModel, host_id: str, p: RiskParams | None = None,
              criticalities: Mapping[str, Criticality] | None = None) -> float:
    """Criticality-weighted vulnerability risk, propagating only inside the host."""
    p = p or model.params
    if criticalities is None:
        criticalities = compute_criticalities(model, p)
    g = build_host_graph(model, host_id)
    scores = centrality(g, p.pagerank_damping) if len(g) else None
    parts = []
    for aid in model.host(host_id).assets:
        vsum = fsum(vulnerability_risk(v, g, p, scores).total for v in model.asset(aid).vulnerabilities)
        parts.append(criticalities[aid].score * vsum)
    return fsum(parts)


# ---------------------------------------------------------------------------
# whole-system evaluation

Occurrence = tuple[str, str, str]  # (asset id, component key, cve id)


@dataclass(frozen=True)
class ComponentScore:
    cvs: float
    centrality: float
    risk: float


@dataclass(frozen=True)
class AssetScore:
    risk: float
    centrality: float
    criticality: float
    criticality_level: int
    critical: bool
    host_vulnerability_risk: float
    network_risk: float
    path_count: int


@dataclass(frozen=True)
class Levels:
    assets: Mapping[str, float]
    host_vulnerability_sums: Mapping[str, float]
    hosts: Mapping[str, float]
    network_by_asset: Mapping[str, float]
    network: float
    system: float


@dataclass
class RiskReport:
    params: RiskParams
    vulnerabilities: list[VulnRiskBreakdown]
    components: dict[str, ComponentScore]
    assets: dict[str, AssetScore]
    hosts: dict[str, float]
    network: float
    system: float
    paths: list[AttackPath]
    network_terms: dict[Occurrence, float] = field(default_factory=dict)
    notices: list[str] = field(default_factory=list)

    def audit(self) -> list[str]:
        """Check that every total equals the sum of its reported parts."""
        problems = []
        for b in self.vulnerabilities:
            if b.total != b.direct + b.indirect:
                problems.append(f"{b.cve_id} on {b.component}: total != direct + indirect")
        for aid, score in self.assets.items():
            parts = [b.total for b in self.vulnerabilities if b.asset_id == aid]
            if score.risk != fsum(parts):
                problems.append(f"asset {aid}: risk != sum of vulnerability totals")
        if self.system != self.network + fsum(self.hosts.values()):
            problems.append("system != network + sum(hosts)")
        if self.network != fsum(s.path_count * s.network_risk for s in self.assets.values()):
            problems.append("network != sum over paths of network vulnerability risk")
        return problems


class RiskContext:
    """Everything that stays fixed when vulnerabilities are patched.

    Centralities, criticalities and attack paths depend only on the graphs,
    so they are computed once; :meth:`aggregate` then re-sums risk with any
    set of vulnerability occurrences removed.
    """

    def __init__(self, model: SystemModel, p: RiskParams | None = None, *, lateral_paths: bool = True):
        self.model = model
        self.params = p = p or model.params
        validate_params(p)
        self.notices: list[str] = []
        self.timings: dict[str, float] = {}
        self._asset_order = tuple(a.id for a in model.assets)
        self._hosts = {h.id: h for h in model.hosts}
        t0 = perf_counter()

        self.asset_graphs: dict[str, DependenceGraph] = {}
        self.asset_scores: dict[str, CentralityScores] = {}
        for a in model.assets:
            g = build_dependence_graph(model, a.id)
            self.asset_graphs[a.id] = g
            if len(g):
                self.asset_scores[a.id] = centrality(g, p.pagerank_damping)

        self.host_graphs: dict[str, DependenceGraph] = {}
        self.host_scores: dict[str, CentralityScores] = {}
        for h in model.hosts:
            if len(h.assets) == 1:
                aid = h.assets[0]
                self.host_graphs[h.id] = self.asset_graphs[aid]
                if aid in self.asset_scores:
                    self.host_scores[h.id] = self.asset_scores[aid]
                continue
            g = build_host_graph(model, h.id)
            self.host_graphs[h.id] = g
            if len(g):
                self.host_scores[h.id] = centrality(g, p.pagerank_damping)

        self.system_graph = build_dependence_graph(model, SYSTEM)
        self.system_scores = centrality(self.system_graph, p.pagerank_damping)
        self.criticalities = compute_criticalities(model, p, self.system_scores)
        self.timings["centrality"] = perf_counter() - t0

        t0 = perf_counter()
        self.comm = build_communication_graph(model)
        self.paths: list[AttackPath] = []
        if not model.entry_points:
            self.notices.append("no entry points declared; network risk is 0")
        elif not critical_assets(self.criticalities, p):
            self.notices.append(
                f"no asset has criticality above {p.criticality_threshold:g}; network risk is 0"
            )
        else:
            self.paths = shortest_attack_paths(
                self.comm, model, p, self.criticalities, lateral=lateral_paths, notices=self.notices
            )
        self.multiplicity = path_multiplicity(self.paths, model, p.dedup_paths)

        self.timings["paths"] = perf_counter() - t0

        self.host_of = {aid: h.id for h in model.hosts for aid in h.assets}
        self.score_vulnerabilities()

        t0 = perf_counter()
        self._base = self._asset_sums(a.id for a in model.assets)
        self._base_hosts = {h.id: self._host_value(h, self._base) for h in model.hosts}
        self.baseline = self.aggregate()
        self.timings["aggregate"] = perf_counter() - t0

    def score_vulnerabilities(self) -> float:
        """Per-vulnerability pass over fixed graphs; returns its runtime in seconds."""
        p, model = self.params, self.model
        t0 = perf_counter()
        self.asset_breakdowns: dict[Occurrence, VulnRiskBreakdown] = {}
        self.host_totals: dict[Occurrence, float] = {}
        self.network_terms: dict[Occurrence, float] = {}
        self.occurrences_by_asset: dict[str, list[Occurrence]] = {a.id: [] for a in model.assets}
        for a in model.assets:
            g = self.asset_graphs[a.id]
            hid = self.host_of[a.id]
            hg = self.host_graphs[hid]
            for c in a.components:
                for v in c.vulnerabilities:
                    occ = (a.id, v.component_ref, v.cve_id)
                    b = vulnerability_risk(v, g, p, self.asset_scores[a.id])
                    self.asset_breakdowns[occ] = b
                    if hg is g:
                        self.host_totals[occ] = b.total
                    else:
                        self.host_totals[occ] = vulnerability_risk(v, hg, p, self.host_scores[hid]).total
                    self.network_terms[occ] = network_term(v, self.system_scores, p)
                    self.occurrences_by_asset[a.id].append(occ)
        self.timings["asset_risk"] = elapsed = perf_counter() - t0
        return elapsed

    def _asset_sums(self, asset_ids: Iterable[str], excluded: frozenset = frozenset()) -> dict[str, tuple]:
        out = {}
        for aid in asset_ids:
            occs = [o for o in self.occurrences_by_asset[aid] if o not in excluded]
            out[aid] = (
                fsum(self.asset_breakdowns[o].total for o in occs),
                fsum(self.host_totals[o] for o in occs),
                fsum(self.network_terms[o] for o in occs),
            )
        return out

    def _host_value(self, host: Host, sums: Mapping[str, tuple]) -> float:
        return fsum(self.criticalities[aid].score * sums[aid][1] for aid in host.assets)

    def occurrences(self, pairs: Iterable[tuple[str, str]]) -> frozenset[Occurrence]:
        """Expand (asset id, cve id) pairs into occurrences, rejecting unknown pairs."""
        found = set()
        for asset_id, cve_id in pairs:
            hits = [o for o in self.occurrences_by_asset.get(asset_id, ()) if o[2] == cve_id]
            if not hits:
                raise ScopeError(f"unknown patch target ({asset_id}, {cve_id})")
            found.update(hits)
        return frozenset(found)

    def aggregate(self, excluded: Iterable[Occurrence] = ()) -> Levels:
        """Every level with ``excluded`` removed; only touched assets are re-summed."""
        excluded = frozenset(excluded)
        touched = {o[0] for o in excluded}
        sums = dict(self._base)
        sums.update(self._asset_sums(touched, excluded))
        hosts = dict(self._base_hosts)
        for hid in {self.host_of[aid] for aid in touched}:
            hosts[hid] = self._host_value(self._hosts[hid], sums)
        order = self._asset_order
        network = fsum(self.multiplicity[aid] * sums[aid][2] for aid in order)
        system = network + fsum(hosts.values())
        return Levels(
            {aid: sums[aid][0] for aid in order},
            {aid: sums[aid][1] for aid in order},
            hosts,
            {aid: sums[aid][2] for aid in order},
            network,
            system,
        )

    def report(self) -> RiskReport:
        p, model, base = self.params, self.model, self.baseline
        components = {}
        for a in model.assets:
            scores = self.asset_scores.get(a.id)
            for c in a.components:
                key = component_key(a.id, c.id)
                cent = scores[key]
                value = cvs(c, p)
                components[key] = ComponentScore(value, cent, value * cent)
        assets = {}
        for a in model.assets:
            crit = self.criticalities[a.id]
            assets[a.id] = AssetScore(
                risk=base.assets[a.id],
                centrality=crit.centrality,
                criticality=crit.score,
                criticality_level=crit.level,
                critical=crit.score > p.criticality_threshold,
                host_vulnerability_risk=base.host_vulnerability_sums[a.id],
                network_risk=base.network_by_asset[a.id],
                path_count=self.multiplicity[a.id],
            )
        return RiskReport(
            params=p,
            vulnerabilities=list(self.asset_breakdowns.values()),
            components=components,
            assets=assets,
            hosts=dict(base.hosts),
            network=base.network,
            system=base.system,
            paths=list(self.paths),
            network_terms=dict(self.network_terms),
            notices=list(self.notices),
        )


def system_risk(model: SystemModel, p: RiskParams | None = None, *, lateral_paths: bool = True) -> RiskReport:
    """Network risk plus criticality-weighted host risk, with every intermediate value."""
    return RiskContext(model, p, lateral_paths=lateral_paths).report()
