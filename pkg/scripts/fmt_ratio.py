"""Second-moment ratio P(E_M(0) & E_M(t)) / P(E_M(0))^2 over a grid of t on a desk schedule."""
import argparse

from dynwalk import estimators, schedule
from dynwalk.errors import EstimatorRefused


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=200_000)
    parser.add_argument("--M", type=int, default=2)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()
    desk = schedule.desk_schedule([2, 4, 7, 10, 14, 18, 22, 26, 31, 36, 41, 46, 51, 56, 61, 66, 71, 76])
    print("M,t,ratio,ci_low,ci_high,p_marginal")
    for M in range(1, args.M + 1):
        for t in (0.0, 0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0):
            try:
                r = estimators.estimate_fmt_ratio(desk, M, t, args.trials, args.seed)
            except EstimatorRefused as exc:
                print(f"# M={M} t={t}: {exc}")
                break
            print(f"{M},{t},{r.ratio!r},{r.ci_low!r},{r.ci_high!r},{r.marginal.estimate!r}")


if __name__ == "__main__":
    main()
