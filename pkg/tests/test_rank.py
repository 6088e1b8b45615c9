import pytest

from conftest import asset, comp, small_doc, vuln
from graphrisk.errors import ScopeError
from graphrisk.model import build_model
from graphrisk.rank import Scope, component_factor_rank, rank_patches, what_if
from graphrisk.risk import RiskContext


class TestScope:
    @pytest.mark.parametrize("text", ["system", "host:h1", "asset:web", "component:web/app"])
    def test_round_trip(self, text):
        assert str(Scope.parse(text)) == text

    @pytest.mark.parametrize("text", ["", "asset", "asset:", "rack:x", "components:web/app"])
    def test_malformed(self, text):
        with pytest.raises(ScopeError):
            Scope.parse(text)

    @pytest.mark.parametrize("text", ["asset:nope", "host:nope", "component:web/nope"])
    def test_unknown_target(self, small_model, text):
        with pytest.raises(ScopeError):
            rank_patches(small_model, scope=text)


class TestRankPatches:
    def test_invariants(self, small_model):
        r = rank_patches(small_model)
        assert [e.rank for e in r.entries] == list(range(1, len(r.entries) + 1))
        reductions = [e.reduction for e in r.entries]
        assert reductions == sorted(reductions, reverse=True)
        assert all(e.reduction >= 0 and e.reduction == e.risk_before - e.risk_after for e in r.entries)
        assert len(r.entries) == 5

    def test_recompute_reproduces_risk_after(self, small_model):
        for e in rank_patches(small_model).entries:
            fresh = RiskContext(small_model.without([(e.asset, e.cve_id)]), lateral_paths=False)
            assert fresh.baseline.system == e.risk_after

    def test_web_server_asset_scope(self, enterprise):
        r = rank_patches(enterprise, scope="asset:web_server")
        assert r.entries[0].cve_id == "CVE-2021-3156"
        assert r.entries[1].cve_id == "CVE-2020-1938"
        assert {e.asset for e in r.entries} == {"web_server"}

    def test_asset_scope_uses_asset_risk(self, enterprise):
        r = rank_patches(enterprise, scope="asset:web_server")
        total = RiskContext(enterprise).baseline.assets["web_server"]
        assert r.entries[0].risk_before == total

    def test_component_scope(self, enterprise):
        r = rank_patches(enterprise, scope="component:web_server/tomcat")
        assert len(r.entries) == 5
        assert r.entries[-1].risk_after >= 0

    def test_host_scope(self, enterprise):
        r = rank_patches(enterprise, scope="host:h_web")
        assert {e.asset for e in r.entries} == {"web_server"}

    def test_zero_reduction_goes_last(self, small_document):
        small_document["assets"][1]["components"][1]["vulnerabilities"].append(
            vuln("CVE-0000-0000", like=0.0, epss=0.0, av="Local"))
        r = rank_patches(build_model(small_document))
        assert r.entries[-1].cve_id == "CVE-0000-0000"
        assert r.entries[-1].reduction == 0.0

    def test_single_cve_component(self, small_model):
        r = rank_patches(small_model, scope="component:web/os")
        assert [(e.cve_id, e.rank) for e in r.entries] == [("CVE-2000-0001", 1)]

    def test_identical_factors_fall_back_to_cve_id(self):
        twin = dict(base=5.0, like=2.0, impact=3.0, epss=0.2, av="Local")
        doc = {"assets": [asset("a", [comp("c", vuln("CVE-2020-0009", **twin), vuln("CVE-2020-0002", **twin))])]}
        r = rank_patches(build_model(doc))
        assert r.cve_order() == ["CVE-2020-0002", "CVE-2020-0009"]
        assert r.entries[0].reduction == r.entries[1].reduction

    def test_top_and_lookup(self, enterprise):
        r = rank_patches(enterprise)
        assert r.top(0).entries == ()
        assert len(r.top(3).entries) == 3
        assert r.rank_of("CVE-2023-36884", "db_server") == 1
        with pytest.raises(KeyError):
            r.rank_of("CVE-1999-0000")

    def test_same_cve_on_two_assets_ranked_separately(self, enterprise):
        r = rank_patches(enterprise)
        assets = {e.asset for e in r.entries if e.cve_id == "CVE-2023-36884"}
        assert assets == {"db_server", "admin_server"}

    def test_shared_context(self, enterprise):
        ctx = RiskContext(enterprise, lateral_paths=False)
        assert rank_patches(enterprise, context=ctx) == rank_patches(enterprise)


class TestWhatIf:
    def test_empty(self, small_model):
        assert what_if(small_model, patch_set=[]).delta == 0.0

    def test_everything(self, small_model):
        pairs = [(a.id, v.cve_id) for a, _, v in small_model.iter_vulnerabilities()]
        result = what_if(small_model, patch_set=pairs)
        assert result.after.system == 0.0
        assert all(v == 0 for v in result.after.assets.values())

    def test_single_matches_ranking(self, enterprise):
        entry = next(e for e in rank_patches(enterprise).entries if e.cve_id == "CVE-2021-3156")
        assert what_if(enterprise, patch_set=[("web_server", "CVE-2021-3156")]).delta == entry.reduction

    def test_top_entry(self, enterprise):
        top = rank_patches(enterprise).entries[0]
        assert what_if(enterprise, patch_set=[(top.asset, top.cve_id)]).delta == top.reduction

    def test_unknown_pair(self, small_model):
        with pytest.raises(ScopeError):
            what_if(small_model, patch_set=[("web", "CVE-1999-0000")])

    def test_level_deltas(self, small_model):
        d = what_if(small_model, patch_set=[("db", "CVE-2000-0005")]).level_deltas()
        assert d["asset:web"] == 0.0 and d["asset:db"] > 0
        assert d["system"] == pytest.approx(d["network"] + d["host:web"] + d["host:db"], abs=1e-12)


class TestComponentFactors:
    def test_tomcat(self, enterprise):
        order = component_factor_rank(enterprise, "web_server/tomcat")
        assert order[0].cve_id == "CVE-2020-1938"
        assert [f.rank for f in order] == [1, 2, 3, 4, 5]
        scores = [f.score for f in order]
        assert scores == sorted(scores, reverse=True)

    def test_single(self, small_model):
        (only,) = component_factor_rank(small_model, "web/os")
        assert only.cve_id == "CVE-2000-0001" and only.rank == 1

    def test_pl_breaks_ties(self):
        doc = {"assets": [asset("a", [comp("c", vuln("CVE-1", scope=False), vuln("CVE-2", scope=True))])]}
        assert [f.cve_id for f in component_factor_rank(build_model(doc), "a/c")] == ["CVE-2", "CVE-1"]

    def test_unknown_component(self, small_model):
        with pytest.raises(ScopeError):
            component_factor_rank(small_model, "web/nope")


def test_explanations_present(small_model):
    for e in rank_patches(small_model).entries:
        assert any(line.startswith("EL=") for line in e.explanation)
        assert e.record is not None and e.record.cve_id == e.cve_id


def test_small_doc_is_untouched_by_ranking():
    doc = small_doc()
    model = build_model(doc)
    rank_patches(model)
    assert build_model(doc) == model
