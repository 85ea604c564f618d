"""Fit 1/P(escape before returning) against ln n and report the band constant."""
import argparse
import math

from dynwalk import oracle


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--nmax", type=int, default=512)
    args = parser.parse_args()
    radii = [2**e for e in range(3, 11) if 2**e <= args.nmax]
    print("n,escape,inverse,band_C")
    for n in radii:
        esc = oracle.escape_probability(n)
        print(f"{n},{esc!r},{1 / esc!r},{oracle.lemma31_band_check(n).min_C!r}")
    fit = oracle.fit_escape(radii)
    print(f"# slope {fit.slope:.6f} vs 2/pi {2 / math.pi:.6f} (rel err {fit.slope_rel_error:.3%}), R^2 {fit.r_squared:.6f}")


if __name__ == "__main__":
    main()
