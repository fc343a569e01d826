"""Encode, decode, group and evaluate synthetic scenes; report any imperfect one.

    python3 scripts/round_trip.py --scenes 100 --d-tau 1.0
"""

import argparse
import random
import time

from hoipoint.codec import decode_peaks
from hoipoint.evaluator import GroundTruthSet, evaluate
from hoipoint.grouping import GroupingConfig, group
from hoipoint.io_formats import decode_tensor, encode_tensor
from hoipoint.testkit import synth_scene


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--scenes", type=int, default=100)
    ap.add_argument("--d-tau", type=float, default=1.0)
    ap.add_argument("--max-distractors", type=int, default=3)
    args = ap.parse_args()

    cfg = GroupingConfig(0.0, 0.0, 0.0, args.d_tau)
    t0 = time.perf_counter()
    imperfect = 0
    for seed in range(args.scenes):
        rng = random.Random(seed)
        b = synth_scene(seed, rng.randint(1, 4), rng.randint(1, 4), rng.randint(1, 3), rng.randint(0, args.max_distractors))
        hm, vf = decode_tensor(encode_tensor(b.heatmap)), decode_tensor(encode_tensor(b.vectors))
        out = group(b.humans, b.objects, decode_peaks(hm, 100, 0.0, vf), cfg)
        m = evaluate({"img": out}, GroundTruthSet({"img": b.triplets})).map_role
        if m != 1.0:
            imperfect += 1
            print(f"seed {seed}: map_role {m}")
    print(f"{args.scenes - imperfect}/{args.scenes} scenes perfect in {time.perf_counter() - t0:.2f} s")


if __name__ == "__main__":
    main()
