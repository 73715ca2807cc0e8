"""Tower, esssup and optional-sampling checks over seeded random rectangular families."""
import argparse
import time

import numpy as np

from pathexp.ambiguity import check_invariance, check_pasting, random_rectangular_family
from pathexp.engine import verify_esssup_representation, verify_optional_sampling, verify_tower
from pathexp.pathspace import RandomVariable, StoppingRule, random_rule_pair


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--families", type=int, default=50)
    ap.add_argument("--pairs", type=int, default=20)
    ap.add_argument("--max-steps", type=int, default=3)
    ap.add_argument("--max-branch", type=int, default=2)
    ap.add_argument("--max-laws", type=int, default=3)
    ap.add_argument("--checks", action="store_true", help="also run invariance/pasting checkers")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    t0 = time.perf_counter()
    tower = esssup = 0.0
    sampling_fail = checks_fail = 0
    for _ in range(args.families):
        fam = random_rectangular_family(rng, args.max_steps, args.max_branch, args.max_laws)
        lat = fam.lattice
        xi = RandomVariable(lat, rng.normal(size=lat.shape))
        for _ in range(args.pairs):
            sigma, tau = random_rule_pair(lat, rng)
            rep = verify_tower(fam, sigma, tau, xi)
            tower = max(tower, rep.deviation, rep.dpp_deviation)
        hit = StoppingRule.hitting(lat, float(np.median(np.abs(lat.alphabet[0]))))
        esssup = max(esssup, verify_esssup_representation(fam, hit, xi).worst_deviation)
        sampling_fail += verify_optional_sampling(fam, hit, xi).status != "PASS"
        if args.checks:
            checks_fail += not check_invariance(fam).passed or not check_pasting(fam, max_tuples=2_000).passed
    print(f"families={args.families} pairs/family={args.pairs}")
    print(f"max tower deviation   {tower:.2e}")
    print(f"max esssup deviation  {esssup:.2e}")
    print(f"optional sampling failures {sampling_fail}")
    if args.checks:
        print(f"checker failures {checks_fail}")
    print(f"elapsed {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
