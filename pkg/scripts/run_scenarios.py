"""Score and rank every bundled scenario and print a short summary of each.

    python3 scripts/run_scenarios.py [--top 5] [--dedup-paths]
"""

from __future__ import annotations

import argparse
import math

from graphrisk import SCENARIO_DIR, RiskContext, load_system_model, rank_patches

SCENARIOS = ("enterprise.yaml", "as1.yaml", "as2_np1.yaml", "as2_np2.yaml", "as3.yaml")


def summarize(name: str, top: int, dedup: bool) -> None:
    model = load_system_model(SCENARIO_DIR / name)
    p = model.params.with_overrides({"dedup_paths": dedup})
    report = RiskContext(model, p).report()
    print(f"== {name}: {len(model.assets)} assets, {sum(1 for _ in model.iter_vulnerabilities())} vulnerabilities")
    print(f"   system {report.system:.4f}  network {report.network:.4f}  "
          f"hosts {math.fsum(report.hosts.values()):.4f}  paths {len(report.paths)}")
    for e in rank_patches(model, p).entries[:top]:
        print(f"   {e.rank:>3}  {e.cve_id:<16} {e.asset:<18} -{e.reduction:.4f}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--top", type=int, default=5)
    ap.add_argument("--dedup-paths", action="store_true", help="count each asset once across attack paths")
    args = ap.parse_args()
    for name in SCENARIOS:
        summarize(name, args.top, args.dedup_paths)


if __name__ == "__main__":
    main()
