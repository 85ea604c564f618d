"""Seed fraction with a non-empty avoidance set Q_n, for several forbidden row patterns."""
import argparse

from dynwalk import search


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=2000)
    parser.add_argument("--ngrid", default="8:48:8")
    parser.add_argument("--seed", type=int, default=909)
    parser.add_argument("--sets", default="odd-rows,rows-2mod4")
    args = parser.parse_args()
    grid = search.parse_grid(args.ngrid)
    for name in args.sets.split(","):
        rep = search.run_avoidance(search.AvoidanceSpec(name, grid, args.seeds, args.seed))
        print(f"# forbidden={name} slope={rep.slope:.4f} r2={rep.r2:.4f} complete={rep.complete}")
        print(rep.to_csv(), end="")


if __name__ == "__main__":
    main()
