"""Exit criteria, one test per criterion, each printing a single pass/fail line."""
import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from pathexp.ambiguity import (
    check_invariance,
    check_pasting,
    engineered_invariance_violation,
    engineered_pasting_violation,
    random_rectangular_family,
)
from pathexp.engine import (
    oracle_values,
    sublinear_expectation_dpp,
    verify_esssup_representation,
    verify_optional_sampling,
    verify_tower,
)
from pathexp.gexp import VolSpec, example_51_scenario, example_52_scenario, g_expectation, sample_vol_path
from pathexp.measure import (
    is_martingale_measure,
    paste,
    qv_from_increments,
    random_martingale_measure,
    rcpd_shift,
    windowed_density,
)
from pathexp.pathspace import (
    Lattice,
    RandomVariable,
    StoppingRule,
    all_stopping_rules,
    random_rule_pair,
    random_stopping_rule,
)
from pathexp import payoff as pl

from payoff_cases import ERRORS, ROUND_TRIP

pytestmark = pytest.mark.acceptance

ROOT = Path(__file__).resolve().parent.parent
SEED = 20240601
N_FAMILIES = 50


@pytest.fixture(scope="module")
def families():
    """50 seeded rectangular families (K <= 3, b <= 2, <= 3 laws per node) with a payoff each."""
    rng = np.random.default_rng(SEED)
    out = []
    for _ in range(N_FAMILIES):
        fam = random_rectangular_family(rng, max_steps=3, max_branch=2, max_laws=3)
        xi = RandomVariable(fam.lattice, np.round(rng.normal(scale=2.0, size=fam.lattice.shape), 6))
        out.append((fam, xi))
    return out


def _hitting_rule(lat):
    # the level sits inside the range of |B_1| so that the rule is not constant
    level = float(np.median(np.abs(lat.alphabet[0])))
    return StoppingRule.hitting(lat, level)


def test_c01_oracle_dpp_equivalence(families, criterion):
    start = time.perf_counter()
    worst = 0.0
    for fam, xi in families:
        lat = fam.lattice
        for t in range(lat.num_steps + 1):
            rule = StoppingRule.constant(lat, t)
            gap = np.abs(sublinear_expectation_dpp(fam, rule, xi).values - oracle_values(fam, rule, xi).values)
            worst = max(worst, float(gap.max()))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed <= 60
    criterion(1, "oracle/DPP equivalence", ok, f"max gap {worst:.2e} over {len(families)} families, {elapsed:.1f}s")
    assert ok


def test_c02_tower_property(families, criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(SEED + 2)
    worst, count = 0.0, 0
    for fam, xi in families:
        for _ in range(20):
            sigma, tau = random_rule_pair(fam.lattice, rng)
            rep = verify_tower(fam, sigma, tau, xi)
            worst = max(worst, rep.deviation, rep.dpp_deviation)
            count += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed <= 120
    criterion(2, "tower property", ok, f"max deviation {worst:.2e} over {count} (sigma, tau) pairs, {elapsed:.1f}s")
    assert ok


def test_c03_esssup_representation(families, criterion):
    start = time.perf_counter()
    worst, failures = 0.0, 0
    for fam, xi in families:
        lat = fam.lattice
        for tau in (StoppingRule.constant(lat, 1), _hitting_rule(lat)):
            rep = verify_esssup_representation(fam, tau, xi, tol=1e-10)
            worst = max(worst, rep.worst_deviation)
            failures += rep.status != "PASS"
    elapsed = time.perf_counter() - start
    ok = failures == 0 and elapsed <= 120
    criterion(3, "esssup representation", ok, f"{failures} failures, max deviation {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_c04_assumption_checkers(families, criterion):
    rect_fail = []
    for i, (fam, _) in enumerate(families):
        if not (check_invariance(fam, max_tuples=20_000).passed and check_pasting(fam, max_tuples=2_000).passed):
            rect_fail.append(i)
    inv = check_invariance(engineered_invariance_violation())
    bad = engineered_pasting_violation()
    past = check_pasting(bad)
    lat = bad.lattice
    rules = list(all_stopping_rules(lat))
    payoffs = [RandomVariable.terminal_value(lat).map(np.square), RandomVariable.terminal_value(lat),
               pl.compile_payoff("MAXB", lat), pl.compile_payoff("ind(B > 0)", lat)]
    max_dev, one_sided = 0.0, True
    for sigma in rules:
        for tau in rules:
            if not sigma <= tau:
                continue
            for xi in payoffs:
                rep = verify_tower(bad, sigma, tau, xi)
                max_dev = max(max_dev, rep.deviation)
                one_sided &= rep.one_sided
    ok = (not rect_fail and inv.status == "FAIL" and inv.witness is not None
          and past.status == "FAIL" and past.witness is not None and max_dev > 1e-6 and one_sided)
    criterion(4, "assumption checker soundness", ok,
              f"rectangular failures {rect_fail}, invariance violation {inv.status}, "
              f"pasting violation {past.status}, tower deviation {max_dev:.3g}, one-sided {one_sided}")
    assert ok


def test_c05_g_expectation_values(criterion):
    start = time.perf_counter()
    worst = 0.0
    for K, dt in [(1, 1.0), (3, 0.5), (6, 0.25)]:
        for grid in [(1.0, 2.0), (1.0, 1.5, 2.0), (1.0, 9 / 4, 4.0)]:
            spec = VolSpec.finite(*grid)
            worst = max(worst,
                        abs(g_expectation(spec, K, dt, "B^2") - max(grid) * K * dt),
                        abs(g_expectation(spec, K, dt, "-B^2") + min(grid) * K * dt))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed <= 30
    criterion(5, "G-expectation exact values", ok, f"max error {worst:.2e}, {elapsed:.2f}s")
    assert ok


def test_c06_example_51(criterion):
    got = [(r["grid"], r["pair"]) for r in (example_51_scenario(K) for K in (1, 2, 3))]
    ok = all(g == (1.0, 0.0) for g in got)
    criterion(6, "rate-in-set versus bracketing-pair example", ok, f"(grid, pair) for K=1,2,3: {got}")
    assert ok


def test_c07_example_52(criterion):
    got = [(r["closed"], r["half_open"]) for r in (example_52_scenario(K) for K in (1, 2, 3))]
    ok = all(g == (1.0, 0.0) for g in got)
    criterion(7, "closed versus half-open grid example", ok, f"(closed, half_open) for K=1,2,3: {got}")
    assert ok


def test_c08_martingale_preservation(criterion):
    rng = np.random.default_rng(SEED + 8)
    checked, bad = 0, 0
    for _ in range(50):
        K = int(rng.integers(1, 4))
        alphabet = []
        for _ in range(K):
            neg = -rng.uniform(0.2, 2.0, size=int(rng.integers(1, 3)))
            pos = rng.uniform(0.2, 2.0, size=int(rng.integers(1, 3)))
            alphabet.append(tuple(np.unique(np.round(np.concatenate([neg, pos]), 4))))
        lat = Lattice(tuple(alphabet), 1.0)
        P = random_martingale_measure(lat, rng)
        tau = random_stopping_rule(lat, rng)
        for omega in lat.paths():
            checked += 1
            bad += not is_martingale_measure(rcpd_shift(P, tau, omega), tol=1e-12).ok
        nu = {n: random_martingale_measure(lat.sub(len(n)), rng) for n in tau.boundary}
        checked += 1
        bad += not is_martingale_measure(paste(P, tau, nu), tol=1e-12).ok
    ok = bad == 0
    criterion(8, "martingale preservation", ok, f"{checked} shifted/pasted measures, {bad} with drift")
    assert ok


def test_c09_volatility_estimation(criterion):
    K, dt, window, switch = 64, 1 / 64, 4, 32
    truth = np.where(np.arange(K) < switch, 1.0, 4.0)
    exact, far = True, []
    for seed in range(10):
        inc = sample_vol_path(truth, dt, np.random.default_rng(seed))
        qv = qv_from_increments(inc, dt)
        exact &= bool(np.all(qv.ahat == truth))
        dens = windowed_density(qv, window)
        steps = np.flatnonzero(dens != truth) + 1
        far.extend(int(s) for s in steps if not switch < s <= switch + window)
    ok = exact and not far
    criterion(9, "volatility estimation", ok, f"ahat exact {exact}, deviations away from the switch: {far}")
    assert ok


def test_c10_optional_sampling(families, criterion):
    failures = 0
    for fam, xi in families:
        lat = fam.lattice
        for level in sorted({float(abs(v)) for v in lat.alphabet[0]}):
            failures += verify_optional_sampling(fam, StoppingRule.hitting(lat, level), xi).status != "PASS"
    ok = failures == 0
    criterion(10, "optional sampling", ok, f"{failures} failures")
    assert ok


def test_c11_payoff_language(criterion):
    assert len(ROUND_TRIP) == 30
    round_trips = sum(pl.parse(pl.to_source(pl.parse(s))) == pl.parse(s) for s in ROUND_TRIP)
    errors_ok = 0
    for src, kind, offset in ERRORS:
        try:
            pl.parse(src)
        except pl.PayoffError as e:
            errors_ok += type(e).__name__ == kind and e.offset == offset
    ok = round_trips == 30 and errors_ok == len(ERRORS)
    criterion(11, "payoff language", ok, f"{round_trips}/30 round trips, {errors_ok}/{len(ERRORS)} error cases")
    assert ok


def _suite_reports(out: Path, seed: int) -> dict:
    subprocess.run([sys.executable, str(ROOT / "scripts" / "run_suite.py"), "--out", str(out),
                    "--seed", str(seed), "--format", "csv"], check=False, capture_output=True)
    reports = {}
    for path in sorted(out.rglob("*")):
        if path.is_file():
            text = path.read_text()
            if path.name == "report.json":
                rep = json.loads(text)
                rep.pop("elapsed_ms")
                text = json.dumps(rep, sort_keys=True)
            reports[str(path.relative_to(out))] = text
    return reports


def test_c12_reproducibility(tmp_path, criterion):
    a = _suite_reports(tmp_path / "a", 3)
    b = _suite_reports(tmp_path / "b", 3)
    differing = sorted(k for k in a.keys() | b.keys() if a.get(k) != b.get(k))
    ok = len(a) > 10 and not differing
    criterion(12, "reproducibility", ok, f"{len(a)} output files compared, differing: {differing}")
    assert ok
