"""Time grouping over a range of scene sizes.

    python3 scripts/bench_grouping.py --repeats 100
"""

import argparse
import json

from hoipoint.cli import machine_info, run_bench

SIZES = [(5, 5, 20), (10, 10, 50), (20, 20, 50), (40, 40, 100)]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeats", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(json.dumps(machine_info()))
    print(f"{'humans':>6} {'objects':>7} {'cands':>5} {'pairs':>7} {'median ms':>9} {'min ms':>7}")
    for h, o, c in SIZES:
        r = run_bench(h, o, c, args.repeats, args.seed)
        print(f"{h:6d} {o:7d} {c:5d} {r['pair_count']:7d} {r['median_ms']:9.3f} {r['min_ms']:7.3f}")


if __name__ == "__main__":
    main()
