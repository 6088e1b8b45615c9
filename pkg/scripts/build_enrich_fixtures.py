"""Rebuild the offline enrichment fixtures for the web-server skeleton.

The replayed NVD and EPSS bodies are reconstructions in the real API shapes,
trimmed to the CVEs pinned in ``enterprise.yaml``. They are written once and
committed; tests never touch the network.

    python scripts/build_enrich_fixtures.py
"""

from __future__ import annotations

import argparse
import csv
import warnings
from pathlib import Path

import yaml

from graphrisk.enrich import (
    EPSS_URL, NVD_PAGE_SIZE, NVD_URL, Client, EnrichConfig, FixtureStore, enrich_document, generate_cpe,
)
from graphrisk.model import ComponentNode, Part, load_system_model

SCENARIOS = Path(__file__).resolve().parents[1] / "src" / "graphrisk" / "scenarios"
FETCHED_AT = "2024-10-01T00:00:00+00:00"
AV_NAMES = {"Network": "NETWORK", "Adjacent": "ADJACENT_NETWORK", "Local": "LOCAL", "Physical": "PHYSICAL"}

SKELETON = {
    "name": "web-skeleton",
    "waypoints": ["internet"],
    "entry_points": ["internet"],
    "assets": [{
        "id": "web_server",
        "name": "Web Server",
        "business_criticality_level": 2,
        "components": [
            {"id": "ubuntu", "vendor": "Canonical", "product": "Ubuntu Linux", "version": "20.04", "part": "os"},
            {"id": "http", "vendor": "Apache", "product": "HTTP Server", "version": "2.4.49"},
            {"id": "tomcat", "vendor": "Apache", "product": "Tomcat", "version": "9.0.2"},
            {"id": "site_app", "vendor": "Example Corp", "product": "Storefront", "version": "1.0"},
        ],
        "intra_edges": [
            {"from": "http", "to": "ubuntu", "kind": "ER"},
            {"from": "http", "to": "tomcat", "kind": "SR"},
            {"from": "tomcat", "to": "ubuntu", "kind": "ER"},
            {"from": "site_app", "to": "tomcat", "kind": "ER"},
        ],
    }],
    "communication_edges": [{"a": "internet", "b": "web_server"}],
}


def nvd_item(v) -> dict:
    return {"cve": {
        "id": v.cve_id,
        "metrics": {"cvssMetricV31": [{
            "source": "nvd@nist.gov",
            "type": "Primary",
            "cvssData": {
                "version": "3.1",
                "baseScore": v.cvss_base,
                "attackVector": AV_NAMES[v.attack_vector.value],
                "scope": "CHANGED" if v.scope_change else "UNCHANGED",
            },
            "exploitabilityScore": v.likelihood_subscore,
            "impactScore": v.impact_subscore,
        }]},
    }}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=SCENARIOS / "enrich")
    args = ap.parse_args()
    out = args.out
    store = FixtureStore(out / "responses")
    source = load_system_model(SCENARIOS / "enterprise.yaml").asset("web_server")

    vulns = {}
    for comp in SKELETON["assets"][0]["components"]:
        node = ComponentNode(comp["id"], comp["vendor"], comp["product"], comp["version"],
                             Part(comp.get("part", "application")))
        cpe = generate_cpe(node)
        found = source.component(comp["id"]).vulnerabilities if comp["id"] != "site_app" else ()
        items = [nvd_item(v) for v in sorted(found, key=lambda v: v.cve_id)]
        body = {"resultsPerPage": len(items), "startIndex": 0, "totalResults": len(items),
                "format": "NVD_CVE", "version": "2.0", "vulnerabilities": items}
        store.save(NVD_URL, {"cpeName": cpe.full, "resultsPerPage": NVD_PAGE_SIZE, "startIndex": 0},
                   body, FETCHED_AT)
        vulns.update({v.cve_id: v for v in found})

    ids = sorted(vulns)
    epss_body = {"status": "OK", "total": len(ids),
                 "data": [{"cve": c, "epss": f"{vulns[c].epss:.5f}", "date": FETCHED_AT[:10]} for c in ids]}
    store.save(EPSS_URL, {"cve": ",".join(ids)}, epss_body, FETCHED_AT)

    with open(out / "flags.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cve_id", "exploit_exists", "ransomware"])
        for c in ids:
            w.writerow([c, int(vulns[c].exploit_exists), int(vulns[c].ransomware)])

    (out / "skeleton.yaml").write_text(yaml.safe_dump(SKELETON, sort_keys=False))
    client = Client(EnrichConfig(mode="fixture", fixture_dir=out / "responses"))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        golden, summary = enrich_document(SKELETON, client, out / "flags.csv")
    (out / "golden.yaml").write_text(yaml.safe_dump(golden, sort_keys=False))
    print(f"wrote fixtures for {summary.components} components, {summary.cves} CVEs into {out}")


if __name__ == "__main__":
    main()
