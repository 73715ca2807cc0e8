"""Batch experiment runner: ``pathexp --config exp.json --out out/``.

Exit codes: 0 when the experiment computed (and every verifier passed),
1 when a verifier failed, 2 on configuration or size-limit errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .ambiguity import (
    SizeLimit,
    check_invariance,
    check_pasting,
    engineered_invariance_violation,
    engineered_pasting_violation,
    measurability_note,
)
from .engine import (
    dpp_value_function,
    verify_esssup_representation,
    verify_optional_sampling,
    verify_tower,
)
from .gexp import (
    InvalidSpec,
    VolSpec,
    build_vol_lattice,
    d_process_from_config,
    example_51_scenario,
    example_52_scenario,
    sample_vol_path,
)
from .measure import qv_from_increments, windowed_density
from .pathspace import StoppingRule, random_rule_pair
from .payoff import PayoffError, compile_payoff

log = logging.getLogger("pathexp")

EXPERIMENTS = [
    "tower", "esssup", "optional_sampling", "assumption_check", "gexp",
    "random_gexp", "example_5_1", "example_5_2", "vol_estimate",
]

_VOL_SPEC = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["finite_set", "interval_grid", "half_open_grid"]},
        "values": {"type": "array", "minItems": 1, "items": {"type": "number", "exclusiveMinimum": 0}},
        "lo": {"type": "number", "exclusiveMinimum": 0},
        "hi": {"type": "number", "exclusiveMinimum": 0},
        "num_points": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}

_RULE = {
    "oneOf": [
        {"type": "object", "properties": {"constant": {"type": "integer", "minimum": 0}},
         "required": ["constant"], "additionalProperties": False},
        {"type": "object", "properties": {"hitting": {"type": "number"}},
         "required": ["hitting"], "additionalProperties": False},
        {"type": "object", "properties": {"boundary": {"type": "array", "items": {
            "type": "array", "items": {"type": "integer", "minimum": 0}}}},
         "required": ["boundary"], "additionalProperties": False},
    ]
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["experiment"],
    "properties": {
        "experiment": {"enum": EXPERIMENTS},
        "lattice": {
            "type": "object",
            "properties": {"K": {"type": "integer", "minimum": 1}, "dt": {"type": "number", "exclusiveMinimum": 0}},
            "additionalProperties": False,
        },
        "vol_spec": _VOL_SPEC,
        "d_process": {
            "type": "object",
            "required": ["default"],
            "properties": {
                "default": _VOL_SPEC,
                "rules": {"type": "array", "items": {
                    "type": "object", "required": ["when", "vol_spec"],
                    "properties": {"when": {"type": "string"}, "vol_spec": _VOL_SPEC},
                    "additionalProperties": False}},
            },
            "additionalProperties": False,
        },
        "family": {"enum": ["vol", "invariance_violation", "pasting_violation"]},
        "payoff": {"type": "string"},
        "sigma": _RULE,
        "tau": _RULE,
        "random_pairs": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "max_enum": {"type": "integer", "minimum": 1},
        "max_rules": {"type": "integer", "minimum": 1},
        "max_tuples": {"type": "integer", "minimum": 1},
        "rates": {"type": "array", "minItems": 1, "items": {"type": "number", "exclusiveMinimum": 0}},
        "switch": {"type": "integer", "minimum": 0},
        "window": {"type": "integer", "minimum": 1},
        "output": {
            "type": "object",
            "properties": {"report": {"type": "string"}, "table": {"type": "string"}},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


class ConfigError(ValueError):
    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path)


def validate_config(cfg) -> dict:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        # report the deepest error: it names the offending field
        err = max(errors, key=lambda e: len(e.absolute_path))
        raise ConfigError(err.message, _pointer(err.absolute_path))
    return cfg


def load_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e}") from e
    return validate_config(cfg)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


# family / payoff builders --------------------------------------------------

def _lattice_params(cfg):
    lat = cfg.get("lattice", {})
    return lat.get("K", 2), float(lat.get("dt", 1.0))


def _family(cfg):
    kind = cfg.get("family", "vol")
    if kind == "invariance_violation":
        fam = engineered_invariance_violation()
        return fam.lattice, fam
    if kind == "pasting_violation":
        fam = engineered_pasting_violation()
        return fam.lattice, fam
    K, dt = _lattice_params(cfg)
    try:
        if "d_process" in cfg:
            spec = d_process_from_config(cfg["d_process"])
        else:
            spec = VolSpec.from_dict(cfg.get("vol_spec", {"values": [1.0, 4.0]}))
        return build_vol_lattice(spec, K, dt)
    except InvalidSpec as e:
        raise ConfigError(str(e), "/d_process" if "d_process" in cfg else "/vol_spec") from e
    except PayoffError as e:
        raise ConfigError(str(e), "/d_process/rules") from e


def _payoff(cfg, lattice):
    try:
        return compile_payoff(cfg.get("payoff", "B^2"), lattice)
    except PayoffError as e:
        raise ConfigError(str(e), "/payoff") from e


def _rule(spec, lattice, pointer):
    try:
        if "constant" in spec:
            return StoppingRule.constant(lattice, spec["constant"])
        if "hitting" in spec:
            return StoppingRule.hitting(lattice, spec["hitting"])
        return StoppingRule(lattice, frozenset(tuple(n) for n in spec["boundary"]))
    except ValueError as e:
        raise ConfigError(str(e), pointer) from e


def _rule_pairs(cfg, lattice, seed):
    pairs = []
    if "sigma" in cfg or "tau" in cfg or not cfg.get("random_pairs"):
        sigma = _rule(cfg.get("sigma", {"constant": 0}), lattice, "/sigma")
        tau = _rule(cfg.get("tau", {"constant": min(1, lattice.num_steps)}), lattice, "/tau")
        if not sigma <= tau:
            raise ConfigError("sigma must not exceed tau on any path", "/sigma")
        pairs.append((sigma, tau))
    rng = np.random.default_rng(seed)
    pairs.extend(random_rule_pair(lattice, rng) for _ in range(cfg.get("random_pairs", 0)))
    return pairs


def _boundary_rows(rule, values):
    return [
        {"node": " ".join(map(str, node)), "time": len(node), "value": float(np.ravel(values[node])[0])}
        for node in rule.sorted_boundary()
    ]


# experiments ---------------------------------------------------------------

def _run_tower(cfg, seed, max_enum):
    lattice, family = _family(cfg)
    xi = _payoff(cfg, lattice)
    runs = []
    for sigma, tau in _rule_pairs(cfg, lattice, seed):
        rep = verify_tower(family, sigma, tau, xi, max_enum)
        runs.append(rep)
    worst = max(runs, key=lambda r: r.deviation)
    passed = all(r.passed for r in runs)
    results = {
        "status": "PASS" if passed else "FAIL",
        "pairs_checked": len(runs),
        "one_sided": all(r.one_sided for r in runs),
        "runs": [r.to_dict() for r in runs],
    }
    top = {"deviation": worst.deviation,
           "witness": list(worst.witness) if worst.witness is not None else None}
    return results, top, [], passed


def _run_esssup(cfg, seed, max_enum):
    lattice, family = _family(cfg)
    xi = _payoff(cfg, lattice)
    tau = _rule(cfg.get("tau", {"constant": 1}), lattice, "/tau")
    rep = verify_esssup_representation(family, tau, xi, max_enum)
    return rep.to_dict(), {"deviation": rep.worst_deviation, "witness": rep.witness}, [], rep.status == "PASS"


def _run_optional_sampling(cfg, seed, max_enum):
    lattice, family = _family(cfg)
    xi = _payoff(cfg, lattice)
    tau = _rule(cfg.get("tau", {"hitting": 1.0}), lattice, "/tau")
    rep = verify_optional_sampling(family, tau, xi, max_enum)
    return rep.to_dict(), {"witness": rep.to_dict()["witness"]}, [], rep.status == "PASS"


def _run_assumption_check(cfg, seed, max_enum):
    lattice, family = _family(cfg)
    max_rules = cfg.get("max_rules", 100)
    reports = [
        measurability_note(family),
        check_invariance(family, max_rules, seed, cfg.get("max_tuples", 200_000)),
        check_pasting(family, max_rules, seed, cfg.get("max_tuples", 20_000)),
    ]
    passed = all(r.passed for r in reports)
    failed = next((r for r in reports if not r.passed), None)
    results = {"status": "PASS" if passed else "FAIL", "checks": [r.to_dict() for r in reports]}
    return results, {"witness": failed.witness if failed else None}, [], passed


def _run_gexp(cfg, seed, max_enum):
    lattice, family = _family(cfg)
    xi = _payoff(cfg, lattice)
    V = dpp_value_function(family, xi)
    rows = []
    for k in range(lattice.num_steps + 1):
        for node in lattice.nodes(k):
            rows.append({"node": " ".join(map(str, node)), "time": k, "value": float(V[k][node])})
    results = {"value": float(V[0]), "num_paths": lattice.num_paths,
               "alphabet": list(lattice.alphabet[0])}
    return results, {"witness": None}, rows, True


def _run_example_51(cfg, seed, max_enum):
    K, dt = _lattice_params(cfg)
    rep = example_51_scenario(K, dt)
    return rep, {"witness": None}, [], True


def _run_example_52(cfg, seed, max_enum):
    K, dt = _lattice_params(cfg)
    rep = example_52_scenario(K, dt)
    return rep, {"witness": None}, [], True


def _run_vol_estimate(cfg, seed, max_enum):
    K, dt = _lattice_params(cfg)
    rates = cfg.get("rates", [1.0, 4.0])
    switch = cfg.get("switch", K // 2)
    window = cfg.get("window", 4)
    truth = np.where(np.arange(K) < switch, rates[0], rates[-1])
    inc = sample_vol_path(truth, dt, np.random.default_rng(seed))
    qv = qv_from_increments(inc, dt)
    dens = windowed_density(qv, window)
    off = np.flatnonzero(dens != truth) + 1  # 1-based steps
    results = {
        "ahat_exact": bool(np.all(qv.ahat == truth)),
        "ahat_max_error": float(np.max(np.abs(qv.ahat - truth))),
        "window": window,
        "switch_step": switch,
        "deviating_steps": off.tolist(),
        "max_distance_from_switch": int(np.max(off - switch)) if off.size else 0,
    }
    rows = [{"step": k + 1, "ahat": float(qv.ahat[k]), "windowed": float(dens[k]), "truth": float(truth[k])}
            for k in range(K)]
    return results, {"witness": None}, rows, True


RUNNERS = {
    "tower": _run_tower,
    "esssup": _run_esssup,
    "optional_sampling": _run_optional_sampling,
    "assumption_check": _run_assumption_check,
    "gexp": _run_gexp,
    "random_gexp": _run_gexp,
    "example_5_1": _run_example_51,
    "example_5_2": _run_example_52,
    "vol_estimate": _run_vol_estimate,
}

TABLE_COLUMNS = {"vol_estimate": ["step", "ahat", "windowed", "truth"]}


def run_experiment(cfg: dict, seed: int = 0, max_enum: int = 10**7):
    """Returns (report dict, table rows, passed)."""
    start = time.perf_counter()
    results, top, rows, passed = RUNNERS[cfg["experiment"]](cfg, seed, max_enum)
    report = {
        "experiment": cfg["experiment"],
        "config": {**cfg, "seed": seed, "max_enum": max_enum},
        "results": results,
        **top,
        "versions": {"pathexp": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "elapsed_ms": round((time.perf_counter() - start) * 1000, 3),
    }
    return _jsonable(report), rows, passed


def emit_report(report: dict, rows: list, out_dir, report_name="report.json", table_name=None, columns=None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / report_name).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if table_name:
        columns = columns or (list(rows[0]) if rows else ["node", "time", "value"])
        with open(out / table_name, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pathexp", description=__doc__.splitlines()[0])
    parser.add_argument("--config", required=True, help="experiment config (JSON)")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="overrides the config seed (default 0)")
    parser.add_argument("--max-enum", type=int, default=None, help="enumeration cap (default 10^7)")
    parser.add_argument("--format", choices=["json", "csv"], default="json",
                        help="csv additionally writes node-wise values as a table")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        max_enum = args.max_enum if args.max_enum is not None else cfg.get("max_enum", 10**7)
        report, rows, passed = run_experiment(cfg, seed, max_enum)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except SizeLimit as e:
        print(f"size limit: {e} (cardinality {e.cardinality})", file=sys.stderr)
        return 2

    output = cfg.get("output", {})
    table = output.get("table", "values.csv") if args.format == "csv" else None
    emit_report(report, rows, args.out, output.get("report", "report.json"), table,
                TABLE_COLUMNS.get(cfg["experiment"]))
    log.info("%s: %s", cfg["experiment"], "PASS" if passed else "FAIL")
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
