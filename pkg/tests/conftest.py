from __future__ import annotations

import copy
from pathlib import Path

import pytest

from graphrisk import SCENARIO_DIR, load_system_model
from graphrisk.model import build_model

SCENARIOS = ("enterprise.yaml", "as1.yaml", "as2_np1.yaml", "as2_np2.yaml", "as3.yaml")

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def vuln(cve: str, *, base=5.0, like=2.0, impact=3.0, epss=0.1, exploit=False, scope=False, ransom=False,
         av="Network") -> dict:
    return {"cve_id": cve, "cvss_base": base, "likelihood_subscore": like, "impact_subscore": impact,
            "epss": epss, "exploit_exists": exploit, "scope_change": scope, "ransomware": ransom,
            "attack_vector": av}


def comp(cid: str, *vulns: dict, part: str = "application") -> dict:
    return {"id": cid, "vendor": "acme", "product": cid, "version": "1.0", "part": part,
            "vulnerabilities": list(vulns)}


def asset(aid: str, comps: list[dict], edges: list[tuple] = (), level: int = 3) -> dict:
    return {"id": aid, "business_criticality_level": level, "components": comps,
            "intra_edges": [{"from": e[0], "to": e[1], "kind": e[2], **({"weight": e[3]} if len(e) > 3 else {})}
                            for e in edges]}


def small_doc() -> dict:
    """Two assets behind one gateway; the web app depends on its OS and on the database."""
    web = asset("web", [
        comp("os", vuln("CVE-2000-0001", base=7.8, like=1.8, impact=5.9, epss=0.2, exploit=True, av="Local"),
             part="os"),
        comp("app", vuln("CVE-2000-0002", base=9.8, like=3.9, impact=5.9, epss=0.9, exploit=True),
             vuln("CVE-2000-0003", base=6.1, like=2.8, impact=2.7, epss=0.01, scope=True)),
    ], [("app", "os", "ER")], level=3)
    db = asset("db", [
        comp("os", vuln("CVE-2000-0004", base=5.5, like=1.8, impact=3.6, epss=0.05, av="Local"), part="os"),
        comp("sql", vuln("CVE-2000-0005", base=8.8, like=2.8, impact=5.9, epss=0.4, ransom=True)),
    ], [("sql", "os", "ER")], level=6)
    return {
        "name": "small",
        "waypoints": ["internet"],
        "entry_points": ["internet"],
        "assets": [web, db],
        "communication_edges": [{"a": "internet", "b": "web"}, {"a": "web", "b": "db"}],
        "cross_asset_edges": [{"from": "web/app", "to": "db/sql", "kind": "DR"}],
        "params": {"criticality_threshold": 0.3},
    }


@pytest.fixture
def small_model():
    return build_model(small_doc())


@pytest.fixture
def small_document():
    return copy.deepcopy(small_doc())


@pytest.fixture(scope="session")
def enterprise():
    return load_system_model(SCENARIO_DIR / "enterprise.yaml")


@pytest.fixture(scope="session")
def scenario_dir() -> Path:
    return SCENARIO_DIR


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
