"""Seeded random inventories for benchmarks and property tests."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from graphrisk.model import SystemModel, build_model

_VECTORS = ("Network", "Network", "Network", "Adjacent", "Local", "Physical")


@dataclass(frozen=True)
class SyntheticSpec:
    n_assets: int = 50
    n_vulns: int = 500
    components_per_asset: tuple[int, int] = (2, 4)
    subnets: int = 10
    cross_edges_per_asset: float = 1.0
    criticality_threshold: float = 0.3
    seed: int = 0


def _vuln(rng: np.random.Generator, serial: int) -> dict[str, Any]:
    likelihood = float(np.round(rng.uniform(0.1, 3.9), 1))
    impact = float(np.round(rng.uniform(0.0, 6.0), 1))
    return {
        "cve_id": f"CVE-2099-{serial:06d}",
        "cvss_base": float(min(10.0, np.round(likelihood + impact, 1))),
        "likelihood_subscore": likelihood,
        "impact_subscore": impact,
        "epss": float(np.round(rng.uniform(0, 1), 5)),
        "exploit_exists": bool(rng.random() < 0.3),
        "scope_change": bool(rng.random() < 0.2),
        "ransomware": bool(rng.random() < 0.1),
        "attack_vector": _VECTORS[int(rng.integers(len(_VECTORS)))],
    }


def synthetic_document(spec: SyntheticSpec) -> dict[str, Any]:
    """Subnets behind one firewall each, fronted by an internet waypoint.

    Components run on a per-asset OS, a few depend on components of other
    assets, and vulnerabilities are spread uniformly over components.
    """
    # separate streams: changing n_vulns must not move the topology
    rng = np.random.default_rng([spec.seed, 0])
    vuln_rng = np.random.default_rng([spec.seed, 1])
    lo, hi = spec.components_per_asset
    n_fw = max(1, min(spec.subnets, spec.n_assets // 2))
    assets, comps_all = [], []
    for i in range(spec.n_assets):
        aid = f"fw{i:04d}" if i < n_fw else f"a{i:04d}"
        k = 1 if i < n_fw else int(rng.integers(lo, hi + 1))
        comps = [{"id": "os", "vendor": "v", "product": "os", "version": "1", "part": "os", "vulnerabilities": []}]
        comps += [{"id": f"c{j}", "vendor": "v", "product": f"p{j}", "version": "1", "vulnerabilities": []}
                  for j in range(1, k)]
        edges = [{"from": f"c{j}", "to": "os", "kind": "ER"} for j in range(1, k)]
        if k > 2:
            edges.append({"from": "c1", "to": "c2", "kind": "SR"})
        assets.append({"id": aid, "business_criticality_level": int(rng.integers(1, 7)),
                       "components": comps, "intra_edges": edges})
        comps_all.extend((aid, c) for c in comps)

    ids = [a["id"] for a in assets]
    firewalls, servers = ids[:n_fw], ids[n_fw:]
    subnet_of = {s: firewalls[int(rng.integers(n_fw))] for s in servers}
    comm = [{"a": "internet", "b": fw} for fw in firewalls]
    comm += [{"a": fw, "b": firewalls[(i + 1) % n_fw]} for i, fw in enumerate(firewalls) if n_fw > 2]
    comm += [{"a": s, "b": subnet_of[s], "weight": float(rng.integers(1, 4))} for s in servers]
    by_subnet: dict[str, list[str]] = {}
    for s in servers:
        by_subnet.setdefault(subnet_of[s], []).append(s)
    for members in by_subnet.values():
        for a, b in zip(members, members[1:]):
            if rng.random() < 0.5:
                comm.append({"a": a, "b": b})

    cross, seen = [], set()
    app_comps = [(a, c["id"]) for a, c in comps_all if c["id"] != "os" and a in subnet_of]
    n_cross = int(spec.cross_edges_per_asset * len(servers)) if len(app_comps) > 1 else 0
    for _ in range(n_cross):
        (a1, c1), (a2, c2) = (app_comps[int(i)] for i in rng.choice(len(app_comps), 2, replace=False))
        if a1 == a2 or (a1, c1, a2, c2) in seen:
            continue
        seen.add((a1, c1, a2, c2))
        cross.append({"from": f"{a1}/{c1}", "to": f"{a2}/{c2}", "kind": str(rng.choice(["SR", "DR", "SCR", "IR"]))})
    cross += [{"from": s, "to": subnet_of[s], "kind": "NR"} for s in servers]

    for serial in range(spec.n_vulns):
        aid, comp = comps_all[int(vuln_rng.integers(len(comps_all)))]
        comp["vulnerabilities"].append(_vuln(vuln_rng, serial))

    # system-wide centrality thins out on large graphs; a lower bar keeps attack paths in play
    return {"name": f"synthetic-{spec.seed}", "waypoints": ["internet"], "entry_points": ["internet"],
            "params": {"criticality_threshold": spec.criticality_threshold},
            "assets": assets, "communication_edges": comm, "cross_asset_edges": cross}


def synthetic_model(n_assets: int = 50, n_vulns: int = 500, seed: int = 0, **kw) -> SystemModel:
    return build_model(synthetic_document(SyntheticSpec(n_assets=n_assets, n_vulns=n_vulns, seed=seed, **kw)))
