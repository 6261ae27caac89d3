#!/usr/bin/env python3
"""Sweep recommender kind x exploration width x cache size on one synthetic
catalog and write the hit-rate grid to CSV.

Every cell replays the same per-session random draws, so differences between
cells are parameter effects, not sampling noise.
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from edgerec.catalog import CacheSet, generate_synthetic
from edgerec.demand import (
    InitialDemand,
    make_recommender,
    position_distribution,
    simulate_session,
)
from edgerec.explore import BfsSchedule
from edgerec.metrics import chr_sequential


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--items", type=int, default=1000)
    ap.add_argument("--alpha", type=float, default=1.0, help="popularity skew")
    ap.add_argument("--degree", type=float, default=10.0)
    ap.add_argument("--sessions", type=int, default=2000)
    ap.add_argument("--k", type=int, default=3, help="videos watched per session")
    ap.add_argument("--widths", type=int, nargs="+", default=[10, 20, 50])
    ap.add_argument("--capacities", type=int, nargs="+", default=[10, 30, 50])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/dominance_sweep.csv")
    args = ap.parse_args(argv)

    g = generate_synthetic(args.items, args.alpha, args.degree, rng_seed=args.seed)
    init = InitialDemand.front_page(g, 50)
    pdist = position_distribution("zipf", 5, 1.0)

    rows = []
    for cap in args.capacities:
        cache = CacheSet.top_popular(g, cap)
        for kind in ("baseline", "reorder_only", "cache_aware"):
            for w in args.widths:
                if kind != "cache_aware" and w != args.widths[0]:
                    continue  # only the exploring recommender reads the width
                rec = make_recommender(kind, 5, BfsSchedule.classic(w, 2))
                traces = [
                    simulate_session(g, rec, cache, init, pdist, args.k,
                                     np.random.default_rng([args.seed, i]))
                    for i in range(args.sessions)
                ]
                rep = chr_sequential(traces, k=args.k)
                rows.append({
                    "kind": kind,
                    "width": w if kind == "cache_aware" else 0,
                    "capacity": cap,
                    "chr": f"{rep.aggregate:.4f}",
                    "ci_halfwidth": f"{rep.ci_halfwidth:.4f}",
                })
                print(f"cap={cap:<3} {kind:<12} W={rows[-1]['width']:<3} "
                      f"hit rate {rep.aggregate:.4f} +/- {rep.ci_halfwidth:.4f}")

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
