"""Exceptional-interval search: times where the first n steps avoid the origin after m0 yet visit D h times."""
import argparse
import json

import numpy as np

from dynwalk import search, streams
from dynwalk.walk import WalkConfig


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=10_000)
    parser.add_argument("--m0", type=int, default=100)
    parser.add_argument("--h", type=int, default=3)
    parser.add_argument("--seeds", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    found, measure, all_valid = 0, 0.0, True
    for s in streams.trial_seeds(args.seed, np.arange(args.seeds)):
        res = search.exceptional_demo(WalkConfig(int(s)), args.n, args.m0, args.h)
        all_valid &= res.endpoints_valid()
        found += bool(res.intervals)
        measure += res.total_measure
        print(res.to_json())
    print(json.dumps({"seeds": args.seeds, "with_intervals": found, "mean_measure": measure / args.seeds,
                      "endpoints_valid": all_valid}))


if __name__ == "__main__":
    main()
