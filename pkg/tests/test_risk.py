import math

import pytest

from conftest import SCENARIOS, asset, comp, small_doc, vuln
from graphrisk import SCENARIO_DIR
from graphrisk.errors import NoCriticalAssetsError, ScopeError
from graphrisk.graph import DependenceGraph, build_communication_graph, build_dependence_graph, centrality
from graphrisk.model import (
    AttackVector, ComponentNode, DependencyEdge, RiskParams, VulnerabilityRecord, build_model, load_system_model,
)
from graphrisk.risk import (
    RiskContext,
    asset_risk,
    classify_vulnerability,
    component_risk,
    cvs,
    direct_risk,
    exploit_likelihood,
    host_risk,
    indirect_risk,
    network_risk,
    propagation_likelihood,
    propagation_targets,
    shortest_attack_paths,
    system_risk,
    vulnerability_risk,
)

P = RiskParams()


def record(cve="CVE-X", *, base=5.0, like=2.0, impact=3.0, epss=0.0, exploit=False, scope=False, ransom=False,
           av=AttackVector.NETWORK, ref="a/c") -> VulnerabilityRecord:
    return VulnerabilityRecord(cve, base, like, impact, epss, exploit, scope, ransom, av, ref)


def web_vuln(enterprise, comp_id, cve):
    return enterprise.component(f"web_server/{comp_id}").vulnerability(cve)


class TestLikelihoods:
    def test_el_low_epss_no_exploit(self, enterprise):
        v = web_vuln(enterprise, "ubuntu", "CVE-2020-25719")
        assert (v.likelihood_subscore, v.epss, v.exploit_exists) == (1.2, 0.00123, False)
        assert exploit_likelihood(v, P) == pytest.approx(0.036492, abs=1e-12)

    def test_el_with_exploit(self, enterprise):
        v = web_vuln(enterprise, "ubuntu", "CVE-2022-0492")
        assert exploit_likelihood(v, P) == pytest.approx(0.39206, abs=1e-12)

    def test_el_zero(self):
        assert exploit_likelihood(record(like=0.0, epss=0.0), P) == 0.0

    @pytest.mark.parametrize("scope, ransom, expected", [(True, False, 0.5), (False, True, 0.5),
                                                         (False, False, 0.0), (True, True, 1.0)])
    def test_pl(self, scope, ransom, expected):
        assert propagation_likelihood(record(scope=scope, ransom=ransom), P) == expected


class TestVulnerabilityRisk:
    def test_direct_on_top_component(self, enterprise):
        g = build_dependence_graph(enterprise, "web_server")
        v = web_vuln(enterprise, "ubuntu", "CVE-2021-3156")
        b = vulnerability_risk(v, g, P)
        assert b.centrality == 1.0
        assert round(b.direct, 4) == 4.3573 and b.indirect == 0.0

    def test_direct_zero_el(self):
        assert direct_risk(record(like=0.0), 1.0, P) == 0.0

    def test_tomcat_propagates_to_http(self, enterprise):
        g = build_dependence_graph(enterprise, "web_server")
        v = web_vuln(enterprise, "tomcat", "CVE-2023-41080")
        assert propagation_targets(g, "web_server/tomcat") == [("web_server/http", 1.0)]
        assert indirect_risk(v, "web_server/tomcat", g, P) == pytest.approx(1.35, abs=1e-12)

    def test_http_has_no_dependents(self, enterprise):
        g = build_dependence_graph(enterprise, "web_server")
        v = web_vuln(enterprise, "http", "CVE-2021-41773")
        assert propagation_likelihood(v, P) == 0.5
        assert indirect_risk(v, "web_server/http", g, P) == 0.0
        assert "propagation blocked" in " ".join(vulnerability_risk(v, g, P).explanation)

    def test_chain_oracle(self):
        # c2 depends on c3 (w 1), c4 depends on c2 (w 2): reaching c2 costs 1, c4 costs 1 + 2
        edges = {("c2", "c3"): DependencyEdge.of("c2", "c3", "SR", 1), ("c4", "c2"): DependencyEdge.of("c4", "c2", "ER", 2)}
        g = DependenceGraph(("c2", "c3", "c4"), edges, "chain")
        v = record(impact=2.7, scope=True, ref="c3")
        assert propagation_targets(g, "c3") == [("c2", 1.0), ("c4", 3.0)]
        assert indirect_risk(v, "c3", g, P) == pytest.approx(0.5 * (1 + 3) * 2.7, abs=1e-12)

    def test_first_reach_wins(self):
        # d reachable from s via a (1 + 1) and via b (5 + 1); breadth-first sees a first
        E = lambda u, v, w: ((u, v), DependencyEdge.of(u, v, "SR", w))
        g = DependenceGraph(("s", "a", "b", "d"), dict([E("a", "s", 1), E("b", "s", 5), E("d", "a", 1),
                                                         E("d", "b", 1)]), "diamond")
        assert propagation_targets(g, "s") == [("a", 1.0), ("b", 5.0), ("d", 2.0)]

    def test_pl_below_sigma_blocks(self, enterprise):
        g = build_dependence_graph(enterprise, "web_server")
        v = record(impact=5.0, ref="web_server/tomcat")
        b = vulnerability_risk(v, g, P)
        assert b.indirect == 0.0 and b.total == b.direct

    def test_sigma_is_inclusive(self, enterprise):
        g = build_dependence_graph(enterprise, "web_server")
        v = record(impact=5.0, scope=True, ref="web_server/tomcat")
        assert indirect_risk(v, "web_server/tomcat", g, P.with_overrides({"sigma": 0.5})) > 0
        assert indirect_risk(v, "web_server/tomcat", g, P.with_overrides({"sigma": 0.51})) == 0

    def test_unknown_component(self, enterprise):
        g = build_dependence_graph(enterprise, "web_server")
        with pytest.raises(ScopeError):
            vulnerability_risk(record(ref="nope/x"), g, P)

    def test_total_is_sum(self, enterprise):
        for a, _, v in enterprise.iter_vulnerabilities():
            b = vulnerability_risk(v, build_dependence_graph(enterprise, a.id), P)
            assert b.total == b.direct + b.indirect


class TestCvs:
    def test_no_vulnerabilities(self):
        assert cvs(ComponentNode("x", "acme", "x", "1"), P) == 0.0

    def test_single_critical(self):
        c = build_model({"assets": [asset("a", [comp("c", vuln("CVE-1", base=9.8))])]}).component("a/c")
        assert cvs(c, P) == pytest.approx(9.8 / 2.5, abs=1e-12)

    def test_two_highs(self):
        c = build_model({"assets": [asset("a", [comp("c", vuln("CVE-1", base=7.8), vuln("CVE-2", base=7.2))])]})
        assert cvs(c.component("a/c"), P) == pytest.approx(0.75 * 15.0 / 2.5, abs=1e-12)

    def test_web_server_components(self, enterprise):
        got = {cid: round(cvs(enterprise.component(f"web_server/{cid}"), P), 4) for cid in ("ubuntu", "http", "tomcat")}
        assert got == {"ubuntu": 6.84, "http": 2.25, "tomcat": 9.67}

    def test_component_risk(self, enterprise):
        assert component_risk(enterprise, "web_server/ubuntu") == cvs(enterprise.component("web_server/ubuntu"), P)
        s = centrality(build_dependence_graph(enterprise, "web_server"))
        key = "web_server/http"
        assert component_risk(enterprise, key) == cvs(enterprise.component(key), P) * s[key]

    def test_component_risk_without_cves(self):
        doc = small_doc()
        doc["assets"][0]["components"].append(comp("clean"))
        assert component_risk(build_model(doc), "web/clean") == 0.0


class TestAggregates:
    def test_web_server_pinned(self, enterprise):
        assert asset_risk(enterprise, "web_server") == 17.28771381100919

    def test_vulnerability_free_asset(self):
        doc = small_doc()
        doc["assets"].append(asset("clean", [comp("x")], level=2))
        assert asset_risk(build_model(doc), "clean") == 0.0

    def test_enterprise_levels_pinned(self, enterprise):
        r = system_risk(enterprise)
        assert r.network == 35.136957400454946
        assert math.fsum(r.hosts.values()) == 51.88493049818802
        assert r.system == 87.02188789864297
        assert r.audit() == []

    def test_enterprise_paths(self, enterprise):
        r = system_risk(enterprise)
        entry = {p.target: p.nodes for p in r.paths if p.from_entry}
        assert entry["app_server"] == ("internet", "external_firewall", "web_server", "internal_firewall",
                                       "internal_gateway", "app_server")
        assert set(entry) == {"app_server", "db_server", "admin_server"}

    def test_dedup_toggle(self, enterprise):
        literal = system_risk(enterprise)
        dedup = system_risk(enterprise, enterprise.params.with_overrides({"dedup_paths": True}))
        assert dedup.network < literal.network
        assert max(s.path_count for s in dedup.assets.values()) == 1
        assert literal.assets["web_server"].path_count == 3

    @pytest.mark.parametrize("name", SCENARIOS)
    def test_audit_every_scenario(self, name):
        assert system_risk(load_system_model(SCENARIO_DIR / name)).audit() == []

    def test_host_of_single_asset(self):
        doc = {"assets": [asset("a", [comp("c", vuln("CVE-1"))])], "params": {"w1": 0.0, "w2": 1.0,
                                                                             "business_criticality_scale": {3: 1.0}}}
        model = build_model(doc)
        assert host_risk(model, "a") == asset_risk(model, "a")

    def test_host_of_zero_criticality(self):
        doc = {"assets": [asset("a", [comp("c", vuln("CVE-1"))])], "params": {"w1": 0.0, "w2": 0.0}}
        assert host_risk(build_model(doc), "a") == 0.0

    def test_host_risk_matches_report(self, small_model):
        r = system_risk(small_model)
        for h in small_model.hosts:
            assert host_risk(small_model, h.id) == r.hosts[h.id]

    def test_no_network_vulnerabilities(self, small_document):
        for a in small_document["assets"]:
            for c in a["components"]:
                for v in c["vulnerabilities"]:
                    v["attack_vector"] = "Local"
        r = system_risk(build_model(small_document))
        assert r.network == 0.0 and r.paths

    def test_single_network_cve(self):
        doc = {"waypoints": ["internet"], "entry_points": ["internet"],
               "assets": [asset("a", [comp("c", vuln("CVE-1", like=3.9, impact=5.9, epss=0.5, exploit=True))], level=6)],
               "communication_edges": [{"a": "internet", "b": "a"}]}
        model = build_model(doc)
        v = model.component("a/c").vulnerabilities[0]
        r = system_risk(model)
        assert r.network == exploit_likelihood(v, P) * 5.9 * 1.0

    def test_empty_vulnerability_set(self, small_document):
        for a in small_document["assets"]:
            for c in a["components"]:
                c["vulnerabilities"] = []
        r = system_risk(build_model(small_document))
        assert r.system == 0.0 and r.network == 0.0

    def test_single_host_no_network(self):
        doc = {"assets": [asset("a", [comp("c", vuln("CVE-1"))], level=5)]}
        r = system_risk(build_model(doc))
        assert r.network == 0.0 and r.system == r.hosts["a"]
        assert any("no entry points" in n for n in r.notices)

    def test_network_risk_function_matches_context(self, enterprise):
        ctx = RiskContext(enterprise)
        assert network_risk(ctx.paths, enterprise) == ctx.baseline.network


class TestAttackPaths:
    def test_source_equals_target(self):
        doc = {"entry_points": ["a"], "assets": [asset("a", [comp("c")], level=6)]}
        model = build_model(doc)
        (path,) = shortest_attack_paths(build_communication_graph(model), model)
        assert path.nodes == ("a",) and path.weight == 0.0

    def test_no_critical_assets(self, small_model):
        p = small_model.params.with_overrides({"criticality_threshold": 0.99})
        with pytest.raises(NoCriticalAssetsError):
            shortest_attack_paths(build_communication_graph(small_model), small_model, p)
        r = system_risk(small_model, p)
        assert r.network == 0.0 and any("criticality" in n for n in r.notices)

    def test_unreachable_target_noted(self, small_document):
        small_document["communication_edges"] = [{"a": "internet", "b": "web"}]
        r = system_risk(build_model(small_document))
        assert any("unreachable" in n for n in r.notices)

    def test_lateral_paths_are_not_scored(self, enterprise):
        with_lateral = system_risk(enterprise)
        entry_only = system_risk(enterprise, lateral_paths=False)
        assert len(with_lateral.paths) > len(entry_only.paths)
        assert with_lateral.network == entry_only.network

    def test_consecutive_nodes_are_neighbours(self, enterprise):
        cg = build_communication_graph(enterprise)
        for p in system_risk(enterprise).paths:
            assert math.fsum(cg.weight(a, b) for a, b in zip(p.nodes, p.nodes[1:])) == p.weight


@pytest.mark.parametrize("av, cls", [("Network", "network-based"), ("Adjacent", "network-based"),
                                     ("Local", "host-based"), ("Physical", "host-based")])
def test_classification(av, cls):
    assert classify_vulnerability(record(av=AttackVector.parse(av))).value == cls


def test_context_aggregate_matches_fresh_model(small_model):
    ctx = RiskContext(small_model)
    removed = ctx.occurrences([("web", "CVE-2000-0002")])
    patched = ctx.aggregate(removed)
    fresh = RiskContext(small_model.without([("web", "CVE-2000-0002")])).baseline
    assert patched.system == fresh.system and patched.network == fresh.network
    assert patched.hosts == fresh.hosts


def test_context_rejects_unknown_pair(small_model):
    with pytest.raises(ScopeError):
        RiskContext(small_model).occurrences([("web", "CVE-1999-9999")])


def test_timings_recorded(small_model):
    ctx = RiskContext(small_model)
    assert set(ctx.timings) == {"centrality", "paths", "asset_risk", "aggregate"}
