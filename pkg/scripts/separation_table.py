"""Table of dt_{1/3} against the corr tester cost on the two-equal-bits xor instance."""

import argparse
from fractions import Fraction

from qclab import exact


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-n", type=int, default=9)
    args = ap.parse_args()
    third = Fraction(1, 3)
    print(f"{'n':>3} {'dt_1/3':>7} {'corr cost':>10} {'samples':>8} {'corr error':>12}")
    for n in range(3, args.max_n + 1):
        f, d = exact.shaltiel_dist_intro(n)
        dt = exact.dt_eps(f, d, third)
        cost, samples, err = exact.shaltiel_corr_cost(n, third)
        print(f"{n:>3} {dt:>7} {cost:>10} {samples:>8} {float(err):>12.6f}")


if __name__ == "__main__":
    main()
