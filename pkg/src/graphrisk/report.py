"""Rendering of risk reports and patch rankings as structured data, CSV or text tables."""

from __future__ import annotations

import csv
import io
import json
from typing import Any, Iterable, Mapping, Sequence

from graphrisk.model import RiskParams
from graphrisk.rank import PatchRanking, RankEntry, WhatIfResult
from graphrisk.risk import AssetScore, AttackPath, ComponentScore, RiskReport, VulnRiskBreakdown

SCHEMA_VERSION = 1


def report_to_dict(report: RiskReport) -> dict[str, Any]:
    return {
        "schema": SCHEMA_VERSION,
        "params": report.params.to_dict(),
        "system": report.system,
        "network": report.network,
        "hosts": dict(report.hosts),
        "assets": {
            aid: {
                "risk": s.risk, "centrality": s.centrality, "criticality": s.criticality,
                "criticality_level": s.criticality_level, "critical": s.critical,
                "host_vulnerability_risk": s.host_vulnerability_risk,
                "network_risk": s.network_risk, "path_count": s.path_count,
            }
            for aid, s in report.assets.items()
        },
        "components": {k: {"cvs": c.cvs, "centrality": c.centrality, "risk": c.risk}
                       for k, c in report.components.items()},
        "vulnerabilities": [
            {
                "cve_id": b.cve_id, "asset": b.asset_id, "component": b.component,
                "exploit_likelihood": b.exploit_likelihood, "propagation_likelihood": b.propagation_likelihood,
                "centrality": b.centrality, "direct": b.direct, "indirect": b.indirect, "total": b.total,
                "propagation_targets": [[n, w] for n, w in b.propagation_targets],
                "explanation": list(b.explanation),
            }
            for b in report.vulnerabilities
        ],
        "network_terms": [
            {"asset": a, "component": c, "cve_id": cve, "value": v}
            for (a, c, cve), v in report.network_terms.items()
        ],
        "paths": [
            {"source": p.source, "target": p.target, "nodes": list(p.nodes), "weight": p.weight,
             "from_entry": p.from_entry}
            for p in report.paths
        ],
        "notices": list(report.notices),
    }


def report_from_dict(doc: Mapping[str, Any]) -> RiskReport:
    if doc.get("schema") != SCHEMA_VERSION:
        raise ValueError(f"unsupported report schema {doc.get('schema')!r}")
    return RiskReport(
        params=RiskParams().with_overrides(doc["params"]),
        vulnerabilities=[
            VulnRiskBreakdown(
                cve_id=v["cve_id"], asset_id=v["asset"], component=v["component"],
                exploit_likelihood=v["exploit_likelihood"], propagation_likelihood=v["propagation_likelihood"],
                centrality=v["centrality"], direct=v["direct"], indirect=v["indirect"], total=v["total"],
                propagation_targets=tuple((n, w) for n, w in v["propagation_targets"]),
                explanation=tuple(v["explanation"]),
            )
            for v in doc["vulnerabilities"]
        ],
        components={k: ComponentScore(**c) for k, c in doc["components"].items()},
        assets={k: AssetScore(**a) for k, a in doc["assets"].items()},
        hosts=dict(doc["hosts"]),
        network=doc["network"],
        system=doc["system"],
        paths=[AttackPath(p["source"], p["target"], tuple(p["nodes"]), p["weight"], p["from_entry"])
               for p in doc["paths"]],
        network_terms={(t["asset"], t["component"], t["cve_id"]): t["value"] for t in doc["network_terms"]},
        notices=list(doc["notices"]),
    )


def dumps(doc: Any) -> str:
    """Stable JSON: sorted keys, repr-exact floats."""
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _table(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    cells = [[str(h) for h in header]] + [[_fmt(x) for x in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _fmt(x: Any) -> str:
    if isinstance(x, bool):
        return "yes" if x else "no"
    if isinstance(x, float):
        return f"{x:.4f}"
    return str(x)


VULN_COLUMNS = ("asset", "component", "cve_id", "exploit_likelihood", "propagation_likelihood",
                "centrality", "direct", "indirect", "total")


def _vuln_rows(report: RiskReport, asset: str | None = None):
    for b in report.vulnerabilities:
        if asset is None or b.asset_id == asset:
            yield (b.asset_id, b.component, b.cve_id, b.exploit_likelihood, b.propagation_likelihood,
                   b.centrality, b.direct, b.indirect, b.total)


def render_report(report: RiskReport, fmt: str, scope: str = "system") -> str:
    """Text for one scope: ``system``, ``host:<id>``, ``asset:<id>`` or ``component:<key>``."""
    kind, _, target = scope.partition(":")
    if fmt == "structured":
        doc = report_to_dict(report)
        doc["scope"] = scope
        return dumps(doc)
    asset = target if kind == "asset" else None
    if kind == "component":
        asset = target.split("/", 1)[0]
    rows = [r for r in _vuln_rows(report, asset) if kind != "component" or r[1] == target]
    if fmt == "csv":
        return _csv(VULN_COLUMNS, rows)
    out = [_table(VULN_COLUMNS, rows)]
    if kind == "system":
        out.append(_table(("asset", "risk", "centrality", "criticality", "level", "critical", "paths"),
                          [(a, s.risk, s.centrality, s.criticality, s.criticality_level, s.critical, s.path_count)
                           for a, s in report.assets.items()]))
        out.append(_table(("host", "risk"), report.hosts.items()))
        out.append(f"network risk  {report.network:.4f}\nhost risk     {sum(report.hosts.values()):.4f}\n"
                   f"system risk   {report.system:.4f}\n")
        for p in report.paths:
            if p.from_entry:
                out.append(f"path to {p.target}: {' -> '.join(p.nodes)} (weight {p.weight:g})\n")
    elif kind == "host":
        out.append(f"host {target} risk  {report.hosts[target]:.4f}\n")
    elif kind == "asset":
        s = report.assets[target]
        out.append(f"asset {target} risk  {s.risk:.4f}  criticality {s.criticality:.4f} (level {s.criticality_level})\n")
    else:
        c = report.components[target]
        out.append(f"component {target}  CVS {c.cvs:.4f}  centrality {c.centrality:.4f}  risk {c.risk:.4f}\n")
    for n in report.notices:
        out.append(f"note: {n}\n")
    return "\n".join(out)


RANK_COLUMNS = ("rank", "asset", "component", "cve_id", "cvss_base", "likelihood_subscore", "impact_subscore",
                "epss", "exploit_exists", "scope_change", "ransomware", "risk_before", "risk_after", "reduction")


def _rank_row(e: RankEntry) -> tuple:
    v = e.record
    return (e.rank, e.asset, e.component, e.cve_id, v.cvss_base, v.likelihood_subscore, v.impact_subscore,
            v.epss, int(v.exploit_exists), v.scope_change, int(v.ransomware), e.risk_before, e.risk_after,
            e.reduction)


def ranking_to_dict(ranking: PatchRanking) -> dict[str, Any]:
    return {
        "schema": SCHEMA_VERSION,
        "scope": ranking.scope,
        "entries": [
            {"rank": e.rank, "cve_id": e.cve_id, "asset": e.asset, "component": e.component,
             "risk_before": e.risk_before, "risk_after": e.risk_after, "reduction": e.reduction,
             "exploit_likelihood": e.exploit_likelihood, "impact": e.impact,
             "explanation": list(e.explanation)}
            for e in ranking.entries
        ],
    }


def render_ranking(ranking: PatchRanking, fmt: str) -> str:
    if fmt == "structured":
        return dumps(ranking_to_dict(ranking))
    rows = [_rank_row(e) for e in ranking.entries]
    if fmt == "csv":
        return _csv(RANK_COLUMNS, rows)
    short = ("rank", "asset", "component", "cve_id", "cvss_base", "epss", "reduction")
    idx = [RANK_COLUMNS.index(c) for c in short]
    return _table(short, [[r[i] for i in idx] for r in rows])


def whatif_to_dict(result: WhatIfResult) -> dict[str, Any]:
    return {
        "schema": SCHEMA_VERSION,
        "patched": [list(o) for o in result.patched],
        "before": result.before.system,
        "after": result.after.system,
        "delta": result.delta,
        "levels": result.level_deltas(),
    }


def render_whatif(result: WhatIfResult, fmt: str) -> str:
    if fmt == "structured":
        return dumps(whatif_to_dict(result))
    rows = sorted(result.level_deltas().items())
    if fmt == "csv":
        return _csv(("level", "delta"), rows)
    head = f"system before {result.before.system:.4f}  after {result.after.system:.4f}  delta {result.delta:.4f}\n\n"
    return head + _table(("level", "delta"), rows)
