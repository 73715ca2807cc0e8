"""E_0[B_K^2] and E_0[-B_K^2] on volatility lattices against the closed forms."""
import argparse
import time

from pathexp.gexp import VolSpec, g_expectation

GRIDS = [(1.0, 2.0), (1.0, 1.5, 2.0), (1.0, 2.25, 4.0)]
HORIZONS = [(1, 1.0), (3, 0.5), (6, 0.25)]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--payoff", default=None, help="extra payoff column")
    args = ap.parse_args()
    print(f"{'grid':>18} {'K':>2} {'dt':>5} {'E[B^2]':>10} {'err':>9} {'E[-B^2]':>10} {'err':>9} {'ms':>7}")
    for grid in GRIDS:
        spec = VolSpec.finite(*grid)
        for K, dt in HORIZONS:
            t = time.perf_counter()
            up = g_expectation(spec, K, dt, "B^2")
            down = g_expectation(spec, K, dt, "-B^2")
            ms = (time.perf_counter() - t) * 1000
            line = (f"{str(grid):>18} {K:2d} {dt:5.2f} {up:10.6f} {abs(up - max(grid) * K * dt):9.1e} "
                    f"{down:10.6f} {abs(down + min(grid) * K * dt):9.1e} {ms:7.1f}")
            if args.payoff:
                line += f"  {g_expectation(spec, K, dt, args.payoff):10.6f}"
            print(line)


if __name__ == "__main__":
    main()
