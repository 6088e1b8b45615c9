"""Time risk scoring and ranking on synthetic inventories of growing size.

Topology is fixed per asset count, so rows with the same ``--assets`` differ
only in vulnerability volume.

    python3 scripts/scale_benchmark.py --assets 1000 --vulns 5000 10000 20000
"""

from __future__ import annotations

import argparse
import time

from graphrisk import RiskContext, rank_patches
from graphrisk.model import build_model
from graphrisk.synthetic import SyntheticSpec, synthetic_document


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--assets", type=int, default=1000)
    ap.add_argument("--vulns", type=int, nargs="+", default=[5000, 10_000, 20_000])
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--repeats", type=int, default=3, help="repeats of the per-vulnerability pass")
    args = ap.parse_args()

    print(f"{'vulns':>7} {'centrality':>11} {'paths':>8} {'asset_risk':>11} {'ranking':>8} {'total':>8}")
    for n in args.vulns:
        model = build_model(synthetic_document(SyntheticSpec(n_assets=args.assets, n_vulns=n, seed=args.seed)))
        start = time.perf_counter()
        ctx = RiskContext(model, lateral_paths=False)
        t_rank = time.perf_counter()
        rank_patches(model, context=ctx)
        done = time.perf_counter()
        phase = min(ctx.score_vulnerabilities() for _ in range(args.repeats))
        print(f"{n:>7} {ctx.timings['centrality']:>11.3f} {ctx.timings['paths']:>8.3f} {phase:>11.3f} "
              f"{done - t_rank:>8.3f} {done - start:>8.3f}")


if __name__ == "__main__":
    main()
