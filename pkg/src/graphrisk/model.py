"""Domain types, inventory loading and validation."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterable, Mapping

import yaml

from graphrisk.errors import InventoryError, InvalidParameterError, ValidationError


class AttackVector(str, enum.Enum):
    NETWORK = "Network"
    ADJACENT = "Adjacent"
    LOCAL = "Local"
    PHYSICAL = "Physical"

    @classmethod
    def parse(cls, value: str) -> "AttackVector":
        text = str(value).strip()
        abbrev = {"N": cls.NETWORK, "A": cls.ADJACENT, "L": cls.LOCAL, "P": cls.PHYSICAL}
        if text.upper() in abbrev:
            return abbrev[text.upper()]
        if text.upper() == "ADJACENT_NETWORK":
            return cls.ADJACENT
        for member in cls:
            if member.value.lower() == text.lower() or member.name.lower() == text.lower():
                return member
        raise ValueError(f"unknown attack vector {value!r}")


class VulnClass(str, enum.Enum):
    HOST = "host-based"
    NETWORK = "network-based"


class Part(str, enum.Enum):
    APPLICATION = "application"
    OS = "os"
    HARDWARE = "hardware"

    @property
    def cpe_code(self) -> str:
        return {"application": "a", "os": "o", "hardware": "h"}[self.value]


class EdgeKind(str, enum.Enum):
    ER = "ER"
    IR = "IR"
    DR = "DR"
    SR = "SR"
    SCR = "SCR"
    NR = "NR"


# Embedding and network dependencies weigh 2, the rest 1.
DEFAULT_EDGE_WEIGHTS: dict[EdgeKind, float] = {
    EdgeKind.ER: 2.0,
    EdgeKind.NR: 2.0,
    EdgeKind.IR: 1.0,
    EdgeKind.DR: 1.0,
    EdgeKind.SR: 1.0,
    EdgeKind.SCR: 1.0,
}

SEVERITY_LEVELS = ("Critical", "High", "Medium", "Low")


def severity(cvss_base: float) -> str:
    """CVSS v3 qualitative rating; 0.0 ("none") is folded into Low."""
    if cvss_base >= 9.0:
        return "Critical"
    if cvss_base >= 7.0:
        return "High"
    if cvss_base >= 4.0:
        return "Medium"
    return "Low"


def component_key(asset_id: str, component_id: str) -> str:
    return f"{asset_id}/{component_id}"


@dataclass(frozen=True)
class VulnerabilityRecord:
    cve_id: str
    cvss_base: float
    likelihood_subscore: float
    impact_subscore: float
    epss: float
    exploit_exists: bool
    scope_change: bool
    ransomware: bool
    attack_vector: AttackVector
    component_ref: str = ""

    @property
    def is_network_based(self) -> bool:
        return self.attack_vector in (AttackVector.NETWORK, AttackVector.ADJACENT)

    @property
    def severity(self) -> str:
        return severity(self.cvss_base)


@dataclass(frozen=True)
class ComponentNode:
    id: str
    vendor: str
    product: str
    version: str
    part: Part = Part.APPLICATION
    cpe: str | None = None
    vulnerabilities: tuple[VulnerabilityRecord, ...] = ()

    @property
    def cve_ids(self) -> tuple[str, ...]:
        return tuple(v.cve_id for v in self.vulnerabilities)

    def vulnerability(self, cve_id: str) -> VulnerabilityRecord:
        for v in self.vulnerabilities:
            if v.cve_id == cve_id:
                return v
        raise KeyError(cve_id)


@dataclass(frozen=True)
class DependencyEdge:
    """``source`` depends on ``target``."""

    source: str
    target: str
    kind: EdgeKind
    weight: float

    @classmethod
    def of(cls, source: str, target: str, kind: EdgeKind | str, weight: float | None = None):
        kind = EdgeKind(kind)
        return cls(source, target, kind, DEFAULT_EDGE_WEIGHTS[kind] if weight is None else float(weight))


@dataclass(frozen=True)
class Asset:
    id: str
    name: str
    host_ref: str
    business_criticality_level: int
    components: tuple[ComponentNode, ...] = ()
    intra_edges: tuple[DependencyEdge, ...] = ()
    ip: str = ""
    mac: str = ""
    subnet: str = ""

    def component(self, component_id: str) -> ComponentNode:
        for c in self.components:
            if c.id == component_id:
                return c
        raise KeyError(f"asset {self.id!r} has no component {component_id!r}")

    @property
    def vulnerabilities(self) -> tuple[VulnerabilityRecord, ...]:
        return tuple(v for c in self.components for v in c.vulnerabilities)


@dataclass(frozen=True)
class Host:
    id: str
    assets: tuple[str, ...]


@dataclass(frozen=True)
class CommunicationEdge:
    a: str
    b: str
    weight: float = 1.0


@dataclass(frozen=True)
class RiskParams:
    alpha: float = 0.3
    beta: float = 0.4
    gamma_exploit: float = 0.3
    delta: float = 0.5
    theta: float = 0.5
    sigma: float = 0.5
    severity_weights: Mapping[str, float] = field(
        default_factory=lambda: {"Critical": 1.0, "High": 0.75, "Medium": 0.5, "Low": 0.25}
    )
    w1: float = 0.6
    w2: float = 0.4
    criticality_threshold: float = 0.4
    pagerank_damping: float = 0.85
    # business criticality level (1..6) -> normalized value; default level * 0.15
    business_criticality_scale: Mapping[int, float] = field(
        default_factory=lambda: {lvl: round(lvl * 0.15, 10) for lvl in range(1, 7)}
    )
    dedup_paths: bool = False

    def with_overrides(self, overrides: Mapping[str, Any] | None) -> "RiskParams":
        if not overrides:
            return self
        known = {f.name for f in fields(self)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise InvalidParameterError([f"unknown parameter {name!r}" for name in unknown])
        clean = dict(overrides)
        if "severity_weights" in clean:
            clean["severity_weights"] = {**self.severity_weights, **clean["severity_weights"]}
        if "business_criticality_scale" in clean:
            scale = {int(k): float(v) for k, v in clean["business_criticality_scale"].items()}
            clean["business_criticality_scale"] = {**self.business_criticality_scale, **scale}
        return replace(self, **clean)

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["severity_weights"] = dict(self.severity_weights)
        out["business_criticality_scale"] = {int(k): v for k, v in self.business_criticality_scale.items()}
        return out


def validate_params(p: RiskParams) -> list[str]:
    """Reject invalid parameters; return soft warnings for unusual but legal ones."""
    errors = []
    for name in ("alpha", "beta", "gamma_exploit", "delta", "theta", "w1", "w2", "criticality_threshold"):
        value = getattr(p, name)
        if not isinstance(value, (int, float)) or math.isnan(value) or value < 0:
            errors.append(f"{name} must be a nonnegative number, got {value!r}")
    for level, weight in p.severity_weights.items():
        if level not in SEVERITY_LEVELS:
            errors.append(f"unknown severity level {level!r}")
        elif weight < 0:
            errors.append(f"severity weight for {level} must be nonnegative, got {weight!r}")
    if sum(p.severity_weights.get(lvl, 0.0) for lvl in SEVERITY_LEVELS) <= 0:
        errors.append("severity weights must not all be zero")
    if not 0.0 <= p.sigma <= 1.0:
        errors.append(f"sigma must lie in [0, 1], got {p.sigma!r}")
    if not 0.0 < p.pagerank_damping < 1.0:
        errors.append(f"pagerank_damping must lie in (0, 1), got {p.pagerank_damping!r}")
    for level in range(1, 7):
        value = p.business_criticality_scale.get(level)
        if value is None or value < 0:
            errors.append(f"business_criticality_scale needs a nonnegative value for level {level}")
    if errors:
        raise InvalidParameterError(errors)

    warnings = []
    likelihood_sum = p.alpha + p.beta + p.gamma_exploit
    if not math.isclose(likelihood_sum, 1.0, abs_tol=1e-9):
        warnings.append(f"likelihood weights sum to {likelihood_sum:g}")
    propagation_sum = p.delta + p.theta
    if not math.isclose(propagation_sum, 1.0, abs_tol=1e-9):
        warnings.append(f"propagation weights sum to {propagation_sum:g}")
    return warnings


@dataclass(frozen=True)
class SystemModel:
    hosts: tuple[Host, ...]
    assets: tuple[Asset, ...]
    entry_points: tuple[str, ...] = ()
    communication_edges: tuple[CommunicationEdge, ...] = ()
    cross_asset_edges: tuple[DependencyEdge, ...] = ()
    waypoints: tuple[str, ...] = ()
    params: RiskParams = field(default_factory=RiskParams)
    name: str = ""

    def asset(self, asset_id: str) -> Asset:
        for a in self.assets:
            if a.id == asset_id:
                return a
        raise KeyError(f"unknown asset {asset_id!r}")

    def host(self, host_id: str) -> Host:
        for h in self.hosts:
            if h.id == host_id:
                return h
        raise KeyError(f"unknown host {host_id!r}")

    def component(self, key: str) -> ComponentNode:
        asset_id, _, comp_id = key.partition("/")
        return self.asset(asset_id).component(comp_id)

    def iter_vulnerabilities(self) -> Iterable[tuple[Asset, ComponentNode, VulnerabilityRecord]]:
        for a in self.assets:
            for c in a.components:
                for v in c.vulnerabilities:
                    yield a, c, v

    def without(self, occurrences: Iterable[tuple[str, str]]) -> "SystemModel":
        """Copy of the model with the given (asset_id, cve_id) pairs removed."""
        drop: dict[str, set[str]] = {}
        for asset_id, cve_id in occurrences:
            drop.setdefault(asset_id, set()).add(cve_id)
        assets = []
        for a in self.assets:
            gone = drop.get(a.id)
            if not gone:
                assets.append(a)
                continue
            comps = tuple(
                replace(c, vulnerabilities=tuple(v for v in c.vulnerabilities if v.cve_id not in gone))
                for c in a.components
            )
            assets.append(replace(a, components=comps))
        return replace(self, assets=tuple(assets))


# ---------------------------------------------------------------------------
# inventory documents

def _read_document(path: Path) -> dict[str, Any]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InventoryError(f"cannot read inventory {path}: {exc.strerror or exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            doc = json.loads(text)
        else:
            doc = yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise InventoryError(f"malformed inventory {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise InventoryError(f"malformed inventory {path}: top level must be a mapping")
    return doc


def _merge_documents(base: dict[str, Any], overlay: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in overlay.items():
        if key == "params" and isinstance(value, dict):
            merged["params"] = {**base.get("params", {}), **value}
        else:
            merged[key] = value
    return merged


def read_inventory(path: str | Path, _seen: tuple[Path, ...] = ()) -> dict[str, Any]:
    """Read an inventory document, resolving ``include`` chains.

    Keys in the including document replace those of the included one, except
    ``params`` which is merged key by key, and ``remove_communication_edges``
    which deletes matching edges from the included document.
    """
    path = Path(path).resolve()
    if path in _seen:
        raise InventoryError(f"include cycle through {path}")
    doc = _read_document(path)
    include = doc.pop("include", None)
    if include is None:
        doc.pop("remove_communication_edges", None)
        return doc
    base = read_inventory(path.parent / include, _seen + (path,))
    removals = doc.pop("remove_communication_edges", None) or []
    merged = _merge_documents(base, doc)
    if removals:
        drop = {frozenset((str(e["a"]), str(e["b"]))) for e in removals}
        merged["communication_edges"] = [
            e for e in merged.get("communication_edges", [])
            if frozenset((str(e["a"]), str(e["b"]))) not in drop
        ]
    return merged


def _bool(value: Any, where: str) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)) and value in (0, 1):
        return bool(value)
    if isinstance(value, str) and value.strip().lower() in ("true", "false", "yes", "no", "1", "0"):
        return value.strip().lower() in ("true", "yes", "1")
    raise ValidationError(f"{where}: expected a boolean, got {value!r}")


def _number(value: Any, where: str, lo: float, hi: float) -> float:
    try:
        num = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{where}: expected a number, got {value!r}") from None
    if math.isnan(num) or not lo <= num <= hi:
        raise ValidationError(f"{where}: {num!r} outside [{lo:g}, {hi:g}]")
    return num


def _require(entry: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in entry or entry[key] is None:
        raise ValidationError(f"{where}: missing field {key!r}")
    return entry[key]


def _parse_vulnerability(entry: Mapping[str, Any], comp_ref: str) -> VulnerabilityRecord:
    cve = str(_require(entry, "cve_id", f"vulnerability on {comp_ref}"))
    where = f"{cve} on {comp_ref}"
    version = str(entry.get("cvss_version", "3.1"))
    if version.startswith("2"):
        raise ValidationError(f"{where}: CVSS v2 records are not supported")
    try:
        av = AttackVector.parse(_require(entry, "attack_vector", where))
    except ValueError as exc:
        raise ValidationError(f"{where}: {exc}") from None
    return VulnerabilityRecord(
        cve_id=cve,
        cvss_base=_number(_require(entry, "cvss_base", where), f"{where} cvss_base", 0, 10),
        likelihood_subscore=_number(
            _require(entry, "likelihood_subscore", where), f"{where} likelihood_subscore", 0, 10
        ),
        impact_subscore=_number(_require(entry, "impact_subscore", where), f"{where} impact_subscore", 0, 10),
        epss=_number(_require(entry, "epss", where), f"{where} epss", 0, 1),
        exploit_exists=_bool(_require(entry, "exploit_exists", where), f"{where} exploit_exists"),
        scope_change=_bool(_require(entry, "scope_change", where), f"{where} scope_change"),
        ransomware=_bool(_require(entry, "ransomware", where), f"{where} ransomware"),
        attack_vector=av,
        component_ref=comp_ref,
    )


def _parse_edge(entry: Mapping[str, Any], where: str) -> DependencyEdge:
    try:
        kind = EdgeKind(str(_require(entry, "kind", where)).upper())
    except ValueError:
        raise ValidationError(f"{where}: unknown dependency kind {entry.get('kind')!r}") from None
    weight = entry.get("weight")
    if weight is not None:
        weight = _number(weight, f"{where} weight", 0, math.inf)
        if weight <= 0:
            raise ValidationError(f"{where}: weight must be positive")
    return DependencyEdge.of(str(_require(entry, "from", where)), str(_require(entry, "to", where)), kind, weight)


def build_model(doc: Mapping[str, Any]) -> SystemModel:
    """Validate a parsed inventory document and build the model."""
    raw_assets = doc.get("assets") or []
    if not raw_assets:
        raise ValidationError("no assets")

    assets = []
    seen_assets: set[str] = set()
    for raw in raw_assets:
        asset_id = str(_require(raw, "id", "asset"))
        if asset_id in seen_assets:
            raise ValidationError(f"duplicate asset id {asset_id!r}")
        seen_assets.add(asset_id)
        level = raw.get("business_criticality_level")
        if not isinstance(level, int) or isinstance(level, bool) or not 1 <= level <= 6:
            raise ValidationError(f"asset {asset_id!r}: business_criticality_level must be an integer in 1..6")

        comps = []
        comp_ids: set[str] = set()
        for rc in raw.get("components") or []:
            cid = str(_require(rc, "id", f"component of {asset_id}"))
            if cid in comp_ids:
                raise ValidationError(f"asset {asset_id!r}: duplicate component id {cid!r}")
            comp_ids.add(cid)
            ref = component_key(asset_id, cid)
            try:
                part = Part(str(rc.get("part", "application")).lower())
            except ValueError:
                raise ValidationError(f"component {ref!r}: unknown part {rc.get('part')!r}") from None
            vulns = tuple(_parse_vulnerability(rv, ref) for rv in rc.get("vulnerabilities") or [])
            dup = {v.cve_id for v in vulns if sum(w.cve_id == v.cve_id for w in vulns) > 1}
            if dup:
                raise ValidationError(f"component {ref!r}: duplicate vulnerability {sorted(dup)[0]}")
            comps.append(
                ComponentNode(
                    id=cid,
                    vendor=str(rc.get("vendor", "")),
                    product=str(rc.get("product", "")),
                    version=str(rc.get("version", "")),
                    part=part,
                    cpe=rc.get("cpe"),
                    vulnerabilities=vulns,
                )
            )

        edges = []
        for re_ in raw.get("intra_edges") or []:
            edge = _parse_edge(re_, f"intra edge of {asset_id}")
            for end in (edge.source, edge.target):
                if end not in comp_ids:
                    raise ValidationError(f"asset {asset_id!r}: edge references unknown component {end!r}")
            if edge.kind is EdgeKind.NR:
                raise ValidationError(f"asset {asset_id!r}: NR edges connect assets, not components")
            if edge.source == edge.target:
                raise ValidationError(f"asset {asset_id!r}: self-dependency on {edge.source!r}")
            edges.append(edge)

        assets.append(
            Asset(
                id=asset_id,
                name=str(raw.get("name", asset_id)),
                host_ref=str(raw.get("host", raw.get("host_ref", asset_id))),
                business_criticality_level=level,
                components=tuple(comps),
                intra_edges=tuple(edges),
                ip=str(raw.get("ip", "")),
                mac=str(raw.get("mac", "")),
                subnet=str(raw.get("subnet", "")),
            )
        )

    # hosts: declared explicitly, or implied one-per-host_ref
    by_host: dict[str, list[str]] = {}
    for a in assets:
        by_host.setdefault(a.host_ref, []).append(a.id)
    hosts = []
    declared = doc.get("hosts")
    if declared:
        owner: dict[str, str] = {}
        for rh in declared:
            hid = str(_require(rh, "id", "host"))
            members = tuple(str(x) for x in rh.get("assets") or [])
            for m in members:
                if m not in seen_assets:
                    raise ValidationError(f"host {hid!r}: references unknown asset {m!r}")
                if m in owner:
                    raise ValidationError(f"asset {m!r} belongs to both {owner[m]!r} and {hid!r}")
                owner[m] = hid
            hosts.append(Host(hid, members))
        for a in assets:
            if a.id not in owner:
                raise ValidationError(f"asset {a.id!r} is not assigned to any host")
            if a.host_ref != a.id and a.host_ref != owner[a.id]:
                raise ValidationError(f"asset {a.id!r}: host_ref {a.host_ref!r} disagrees with host list")
        assets = [replace(a, host_ref=owner[a.id]) for a in assets]
    else:
        hosts = [Host(hid, tuple(members)) for hid, members in by_host.items()]

    waypoints = tuple(str(w) for w in doc.get("waypoints") or [])
    for w in waypoints:
        if w in seen_assets:
            raise ValidationError(f"waypoint {w!r} collides with an asset id")
    nodes = seen_assets | set(waypoints)

    comm = []
    for rcomm in doc.get("communication_edges") or []:
        a, b = str(_require(rcomm, "a", "communication edge")), str(_require(rcomm, "b", "communication edge"))
        for end in (a, b):
            if end not in nodes:
                raise ValidationError(f"communication edge references unknown node {end!r}")
        if a == b:
            raise ValidationError(f"communication edge {a!r}-{b!r} is a self-loop")
        weight = _number(rcomm.get("weight", 1.0), f"communication edge {a}-{b} weight", 0, math.inf)
        if weight <= 0:
            raise ValidationError(f"communication edge {a}-{b}: weight must be positive")
        comm.append(CommunicationEdge(a, b, weight))

    comp_keys = {component_key(a.id, c.id) for a in assets for c in a.components}
    cross = []
    for rx in doc.get("cross_asset_edges") or []:
        edge = _parse_edge(rx, "cross-asset edge")
        universe = seen_assets if edge.kind is EdgeKind.NR else comp_keys
        for end in (edge.source, edge.target):
            if end not in universe:
                what = "asset" if edge.kind is EdgeKind.NR else "component"
                raise ValidationError(f"cross-asset edge references unknown {what} {end!r}")
        if edge.source == edge.target:
            raise ValidationError(f"cross-asset edge {edge.source!r} depends on itself")
        cross.append(edge)

    entry_points = tuple(str(e) for e in doc.get("entry_points") or [])
    for e in entry_points:
        if e not in nodes:
            raise ValidationError(f"entry point references unknown node {e!r}")

    params = RiskParams().with_overrides(doc.get("params") or {})
    validate_params(params)

    return SystemModel(
        hosts=tuple(hosts),
        assets=tuple(assets),
        entry_points=entry_points,
        communication_edges=tuple(comm),
        cross_asset_edges=tuple(cross),
        waypoints=waypoints,
        params=params,
        name=str(doc.get("name", "")),
    )


def load_system_model(path: str | Path) -> SystemModel:
    """Load and validate an inventory file (YAML or JSON)."""
    return build_model(read_inventory(path))


def _vuln_to_dict(v: VulnerabilityRecord) -> dict[str, Any]:
    return {
        "cve_id": v.cve_id,
        "cvss_base": v.cvss_base,
        "likelihood_subscore": v.likelihood_subscore,
        "impact_subscore": v.impact_subscore,
        "epss": v.epss,
        "exploit_exists": v.exploit_exists,
        "scope_change": v.scope_change,
        "ransomware": v.ransomware,
        "attack_vector": v.attack_vector.value,
    }


def _edge_to_dict(e: DependencyEdge) -> dict[str, Any]:
    return {"from": e.source, "to": e.target, "kind": e.kind.value, "weight": e.weight}


def model_to_document(model: SystemModel) -> dict[str, Any]:
    """Inverse of :func:`build_model` (field for field)."""
    doc: dict[str, Any] = {}
    if model.name:
        doc["name"] = model.name
    doc["hosts"] = [{"id": h.id, "assets": list(h.assets)} for h in model.hosts]
    doc["assets"] = []
    for a in model.assets:
        comps = []
        for c in a.components:
            rc: dict[str, Any] = {
                "id": c.id,
                "vendor": c.vendor,
                "product": c.product,
                "version": c.version,
                "part": c.part.value,
            }
            if c.cpe:
                rc["cpe"] = c.cpe
            rc["vulnerabilities"] = [_vuln_to_dict(v) for v in c.vulnerabilities]
            comps.append(rc)
        doc["assets"].append(
            {
                "id": a.id,
                "name": a.name,
                "host": a.host_ref,
                "ip": a.ip,
                "mac": a.mac,
                "subnet": a.subnet,
                "business_criticality_level": a.business_criticality_level,
                "components": comps,
                "intra_edges": [_edge_to_dict(e) for e in a.intra_edges],
            }
        )
    doc["waypoints"] = list(model.waypoints)
    doc["entry_points"] = list(model.entry_points)
    doc["communication_edges"] = [{"a": e.a, "b": e.b, "weight": e.weight} for e in model.communication_edges]
    doc["cross_asset_edges"] = [_edge_to_dict(e) for e in model.cross_asset_edges]
    defaults = RiskParams().to_dict()
    doc["params"] = {k: v for k, v in model.params.to_dict().items() if v != defaults[k]}
    return doc


def dump_inventory(model_or_doc: SystemModel | Mapping[str, Any], path: str | Path) -> None:
    doc = model_to_document(model_or_doc) if isinstance(model_or_doc, SystemModel) else dict(model_or_doc)
    path = Path(path)
    if path.suffix.lower() == ".json":
        path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n", encoding="utf-8")
    else:
        path.write_text(yaml.safe_dump(doc, sort_keys=False), encoding="utf-8")
