"""Patch prioritization by risk reduction, plus what-if analysis."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import fsum
from typing import Iterable

from graphrisk.errors import ScopeError
from graphrisk.graph import SYSTEM
from graphrisk.model import RiskParams, SystemModel, VulnerabilityRecord
from graphrisk.risk import Levels, Occurrence, RiskContext, exploit_likelihood, propagation_likelihood

SCOPE_KINDS = ("system", "host", "asset", "component")


@dataclass(frozen=True)
class Scope:
    kind: str
    target: str | None = None

    @classmethod
    def parse(cls, text: str) -> "Scope":
        """Accepts ``system``, ``host:<id>``, ``asset:<id>`` or ``component:<asset>/<component>``."""
        if text == SYSTEM:
            return cls("system")
        kind, sep, target = text.partition(":")
        if not sep or kind not in SCOPE_KINDS[1:] or not target:
            raise ScopeError(f"malformed scope {text!r}")
        return cls(kind, target)

    def __str__(self) -> str:
        return self.kind if self.target is None else f"{self.kind}:{self.target}"


def _coerce_scope(scope: Scope | str) -> Scope:
    return scope if isinstance(scope, Scope) else Scope.parse(scope)


def _check_scope(ctx: RiskContext, scope: Scope) -> None:
    model = ctx.model
    known = {
        "system": lambda t: True,
        "host": lambda t: any(h.id == t for h in model.hosts),
        "asset": lambda t: t in ctx.occurrences_by_asset,
        "component": lambda t: any(o[1] == t for occs in ctx.occurrences_by_asset.values() for o in occs)
        or _component_exists(model, t),
    }
    if not known[scope.kind](scope.target):
        raise ScopeError(f"unknown scope {scope}")


def _component_exists(model: SystemModel, key: str) -> bool:
    try:
        model.component(key)
    except KeyError:
        return False
    return True


def scope_members(ctx: RiskContext, scope: Scope) -> list[Occurrence]:
    """Vulnerability occurrences whose removal is ranked within ``scope``."""
    _check_scope(ctx, scope)
    everything = [o for a in ctx.model.assets for o in ctx.occurrences_by_asset[a.id]]
    if scope.kind == "system":
        return everything
    if scope.kind == "host":
        assets = set(ctx.model.host(scope.target).assets)
        return [o for o in everything if o[0] in assets]
    if scope.kind == "asset":
        return [o for o in everything if o[0] == scope.target]
    return [o for o in everything if o[1] == scope.target]


def scope_value(ctx: RiskContext, levels: Levels, scope: Scope, excluded: frozenset = frozenset()) -> float:
    """The aggregate that a patch in ``scope`` is meant to reduce."""
    if scope.kind == "system":
        return levels.system
    if scope.kind == "host":
        return levels.hosts[scope.target]
    if scope.kind == "asset":
        return levels.assets[scope.target]
    # component risk as the sum of its vulnerability totals
    return fsum(
        ctx.asset_breakdowns[o].total for o in ctx.occurrences_by_asset[scope.target.split("/", 1)[0]]
        if o[1] == scope.target and o not in excluded
    )


@dataclass(frozen=True)
class RankEntry:
    cve_id: str
    component: str
    asset: str
    risk_before: float
    risk_after: float
    reduction: float
    rank: int
    exploit_likelihood: float
    impact: float
    explanation: tuple[str, ...] = ()
    record: VulnerabilityRecord | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class PatchRanking:
    scope: str
    entries: tuple[RankEntry, ...]

    def top(self, n: int) -> "PatchRanking":
        return PatchRanking(self.scope, self.entries[: max(n, 0)])

    def rank_of(self, cve_id: str, asset: str | None = None) -> int:
        for e in self.entries:
            if e.cve_id == cve_id and (asset is None or e.asset == asset):
                return e.rank
        raise KeyError((asset, cve_id))

    def cve_order(self) -> list[str]:
        return [e.cve_id for e in self.entries]


def rank_patches(model: SystemModel, p: RiskParams | None = None, scope: Scope | str = SYSTEM,
                 *, context: RiskContext | None = None) -> PatchRanking:
    """Rank every vulnerability in ``scope`` by how much removing it lowers the scope's risk.

    Centralities, criticalities and attack paths stay at their pre-patch values.
    Ties fall back to higher exploit likelihood, then higher impact, then CVE id.
    """
    ctx = context or RiskContext(model, p, lateral_paths=False)
    p = ctx.params
    scope = _coerce_scope(scope)
    members = scope_members(ctx, scope)
    before = scope_value(ctx, ctx.baseline, scope)
    rows = []
    for occ in members:
        excluded = frozenset([occ])
        after = scope_value(ctx, ctx.aggregate(excluded), scope, excluded)
        b = ctx.asset_breakdowns[occ]
        v = model.component(occ[1]).vulnerability(occ[2])
        rows.append((occ, v, after, b))

    def order(row):
        occ, v, after, _ = row
        return (-(before - after), -exploit_likelihood(v, p), -v.impact_subscore, occ[2], occ[0], occ[1])

    rows.sort(key=order)
    entries = []
    for i, (occ, v, after, b) in enumerate(rows, start=1):
        entries.append(RankEntry(
            cve_id=occ[2], component=occ[1], asset=occ[0],
            risk_before=before, risk_after=after, reduction=before - after, rank=i,
            exploit_likelihood=b.exploit_likelihood, impact=v.impact_subscore,
            explanation=b.explanation, record=v,
        ))
    return PatchRanking(str(scope), tuple(entries))


@dataclass(frozen=True)
class WhatIfResult:
    patched: tuple[Occurrence, ...]
    before: Levels
    after: Levels

    @property
    def delta(self) -> float:
        return self.before.system - self.after.system

    def level_deltas(self) -> dict[str, float]:
        out = {"system": self.delta, "network": self.before.network - self.after.network}
        for hid, v in self.before.hosts.items():
            out[f"host:{hid}"] = v - self.after.hosts[hid]
        for aid, v in self.before.assets.items():
            out[f"asset:{aid}"] = v - self.after.assets[aid]
        return out


def what_if(model: SystemModel, p: RiskParams | None = None, patch_set: Iterable[tuple[str, str]] = (),
            *, context: RiskContext | None = None) -> WhatIfResult:
    """Recompute every level with a set of (asset id, CVE id) pairs removed."""
    ctx = context or RiskContext(model, p, lateral_paths=False)
    excluded = ctx.occurrences(patch_set)
    return WhatIfResult(tuple(sorted(excluded)), ctx.baseline, ctx.aggregate(excluded))


@dataclass(frozen=True)
class FactorEntry:
    cve_id: str
    exploit_likelihood: float
    impact: float
    propagation_likelihood: float
    rank: int

    @property
    def score(self) -> float:
        return self.exploit_likelihood * self.impact


def component_factor_rank(model: SystemModel, component: str, p: RiskParams | None = None) -> list[FactorEntry]:
    """Order one component's CVEs by EL x impact, then PL, then CVE id."""
    p = p or model.params
    try:
        comp = model.component(component)
    except KeyError:
        raise ScopeError(f"unknown component {component!r}") from None
    rows = [
        (exploit_likelihood(v, p), v.impact_subscore, propagation_likelihood(v, p), v.cve_id)
        for v in comp.vulnerabilities
    ]
    rows.sort(key=lambda r: (-(r[0] * r[1]), -r[2], r[3]))
    return [FactorEntry(cve, el, imp, pl, i) for i, (el, imp, pl, cve) in enumerate(rows, start=1)]
