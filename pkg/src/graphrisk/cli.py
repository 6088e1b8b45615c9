"""Command-line entry point: validate, risk, rank, whatif, enrich, export-graph."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import yaml

from graphrisk import report as render
from graphrisk.enrich import Client, EnrichConfig, enrich_document
from graphrisk.errors import (
    EnrichmentError, GraphRiskError, InvalidParameterError, InventoryError, NoEntryPointsError, ScopeError,
)
from graphrisk.graph import build_dependence_graph, build_host_graph
from graphrisk.model import RiskParams, SystemModel, build_model, dump_inventory, read_inventory, validate_params
from graphrisk.rank import Scope, rank_patches, what_if
from graphrisk.risk import RiskContext

EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2
FORMATS = ("table", "csv", "structured")


@dataclass
class RunConfig:
    inventory: Path
    params: RiskParams
    fmt: str = "table"
    scope: str = "system"


def _load_params_file(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InventoryError(f"cannot read params file {path}: {exc}") from None
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise InventoryError(f"cannot parse params file {path}: {exc}") from None
    if not isinstance(data, dict):
        raise InventoryError(f"params file {path} must hold a mapping")
    return data.get("params", data)


def _load(args) -> tuple[SystemModel, RunConfig]:
    model = build_model(read_inventory(args.inventory))
    params = model.params
    if getattr(args, "params", None):
        params = params.with_overrides(_load_params_file(args.params))
    if getattr(args, "dedup_paths", None) is not None:
        params = params.with_overrides({"dedup_paths": args.dedup_paths == "on"})
    for w in validate_params(params):
        print(f"warning: {w}", file=sys.stderr)
    cfg = RunConfig(Path(args.inventory), params, getattr(args, "format", "table"), getattr(args, "scope", "system"))
    return model, cfg


def cmd_validate(args) -> int:
    model, cfg = _load(args)
    n_vulns = sum(1 for _ in model.iter_vulnerabilities())
    print(f"ok: {len(model.assets)} assets, {len(model.hosts)} hosts, {n_vulns} vulnerabilities, "
          f"{len(model.entry_points)} entry points")
    return EXIT_OK


def cmd_risk(args) -> int:
    model, cfg = _load(args)
    scope = Scope.parse(cfg.scope)
    if scope.kind == "system" and not model.entry_points:
        raise NoEntryPointsError("network risk needs at least one entry point; none declared")
    ctx = RiskContext(model, cfg.params)
    rep = ctx.report()
    if scope.kind == "host" and scope.target not in rep.hosts:
        raise ScopeError(f"unknown host {scope.target!r}")
    if scope.kind == "asset" and scope.target not in rep.assets:
        raise ScopeError(f"unknown asset {scope.target!r}")
    if scope.kind == "component" and scope.target not in rep.components:
        raise ScopeError(f"unknown component {scope.target!r}")
    sys.stdout.write(render.render_report(rep, cfg.fmt, str(scope)))
    return EXIT_OK


def cmd_rank(args) -> int:
    model, cfg = _load(args)
    ranking = rank_patches(model, cfg.params, cfg.scope)
    if args.top is not None:
        ranking = ranking.top(args.top)
    sys.stdout.write(render.render_ranking(ranking, cfg.fmt))
    return EXIT_OK


def _parse_pair(text: str) -> tuple[str, str]:
    asset, sep, cve = text.rpartition(":")
    if not sep or not asset or not cve:
        raise argparse.ArgumentTypeError(f"expected ASSET:CVE, got {text!r}")
    return asset, cve


def cmd_whatif(args) -> int:
    model, cfg = _load(args)
    pairs = list(args.patch or [])
    if args.all:
        pairs = sorted({(a.id, v.cve_id) for a, _, v in model.iter_vulnerabilities()})
    result = what_if(model, cfg.params, pairs)
    sys.stdout.write(render.render_whatif(result, cfg.fmt))
    return EXIT_OK


def cmd_enrich(args) -> int:
    doc = read_inventory(args.inventory)
    fixtures = args.fixtures
    if fixtures is None and args.mode == "fixture":
        fixtures = Path(args.inventory).resolve().parent / "responses"
    config = EnrichConfig(mode=args.mode, fixture_dir=fixtures, record=args.record)
    client = Client(config)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        enriched, summary = enrich_document(doc, client, args.flags)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    build_model(enriched)  # the result must itself be a valid inventory
    dump_inventory(enriched, args.output)
    print(f"enriched {summary.components} components with {summary.cves} CVEs -> {args.output}", file=sys.stderr)
    return EXIT_OK


def cmd_export_graph(args) -> int:
    model = build_model(read_inventory(args.inventory))
    kind, _, target = args.scope.partition(":")
    if kind == "system":
        g = build_dependence_graph(model)
    elif kind == "asset" and target:
        g = build_dependence_graph(model, target)
    elif kind == "host" and target:
        g = build_host_graph(model, target)
    else:
        raise ScopeError(f"graphs can be exported for system, asset:<id> or host:<id>, not {args.scope!r}")
    if args.graph_format == "edges":
        sys.stdout.write(g.edge_list())
    elif args.graph_format == "matrix":
        sys.stdout.write(g.matrix_text())
    else:
        doc = {"scope": g.scope, "nodes": list(g.nodes),
               "edges": [{"from": e.source, "to": e.target, "weight": e.weight, "kind": e.kind.value}
                         for e in g.edges.values()]}
        sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="graphrisk", description="Graph-based vulnerability risk scoring and patch ranking.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, scoring=True):
        p.add_argument("--inventory", required=True, help="inventory YAML or JSON")
        if scoring:
            p.add_argument("--params", help="YAML/JSON file of parameter overrides")
            p.add_argument("--format", choices=FORMATS, default="table")
            p.add_argument("--dedup-paths", choices=("on", "off"), default=None,
                           help="count an asset once even when several attack paths cross it")

    p = sub.add_parser("validate", help="load and check an inventory")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("risk", help="compute risk at every level")
    common(p)
    p.add_argument("--scope", default="system", help="system | host:<id> | asset:<id> | component:<asset>/<id>")
    p.set_defaults(func=cmd_risk)

    p = sub.add_parser("rank", help="rank patches by risk reduction")
    common(p)
    p.add_argument("--scope", default="system")
    p.add_argument("--top", type=int, default=None)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("whatif", help="risk change after patching a set of vulnerabilities")
    common(p)
    p.add_argument("--patch", action="append", type=_parse_pair, metavar="ASSET:CVE")
    p.add_argument("--all", action="store_true", help="patch every vulnerability")
    p.set_defaults(func=cmd_whatif)

    p = sub.add_parser("enrich", help="fill in vulnerabilities from NVD and EPSS")
    common(p, scoring=False)
    p.add_argument("--mode", choices=("fixture", "live"), default="fixture")
    p.add_argument("--fixtures", type=Path, help="recorded responses directory")
    p.add_argument("--flags", type=Path, help="CSV of cve_id, exploit_exists, ransomware")
    p.add_argument("--record", action="store_true", help="save live responses into --fixtures")
    p.add_argument("--output", type=Path, required=True)
    p.set_defaults(func=cmd_enrich)

    p = sub.add_parser("export-graph", help="print a dependence graph")
    common(p, scoring=False)
    p.add_argument("--scope", default="system")
    p.add_argument("--graph-format", choices=("edges", "matrix", "json"), default="edges")
    p.set_defaults(func=cmd_export_graph)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (InventoryError, EnrichmentError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except InvalidParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except GraphRiskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
