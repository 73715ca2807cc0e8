"""Indicator payoffs that separate volatility sets with the same hull.

Part 1: every step has rate 9/4, under {1, 9/4, 4} versus {1, 4}.
Part 2: <B>_K >= hi K dt, under the closed grid [1, 2] versus the half-open [1, 2).
"""
import argparse

from pathexp.gexp import example_51_scenario, example_52_scenario


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--max-steps", type=int, default=4)
    ap.add_argument("--dt", type=float, nargs="+", default=[1.0, 0.5, 0.3])
    args = ap.parse_args()
    print("rate in set vs bracketing pair")
    for dt in args.dt:
        for K in range(1, args.max_steps + 1):
            r = example_51_scenario(K, dt)
            print(f"  K={K} dt={dt:<4} grid={r['grid']:.0f} pair={r['pair']:.0f}")
    print("closed vs half-open grid")
    for dt in args.dt:
        for K in range(1, args.max_steps + 1):
            r = example_52_scenario(K, dt)
            print(f"  K={K} dt={dt:<4} closed={r['closed']:.0f} half_open={r['half_open']:.0f} "
                  f"E[B^2] closed={r['closed_B2']:.4f} half_open={r['half_open_B2']:.4f}")


if __name__ == "__main__":
    main()
