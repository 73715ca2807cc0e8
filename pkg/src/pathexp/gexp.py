"""G-expectations and random G-expectations on volatility lattices.

A volatility level s (a variance rate) becomes the one-step law putting 1/2
on +sqrt(s dt) and 1/2 on -sqrt(s dt): mean zero and conditional variance
exactly s dt, so d<B>/dt lies in the chosen set on every charged path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .ambiguity import RectangularFamily
from .engine import dpp_value_function
from .pathspace import Lattice, RandomVariable

QV_RTOL = 1e-9

KINDS = ("finite_set", "interval_grid", "half_open_grid")


class InvalidSpec(ValueError):
    pass


@dataclass(frozen=True)
class VolSpec:
    """A finite set of variance rates: explicit, or a grid on [lo, hi] / [lo, hi)."""

    kind: str = "finite_set"
    values: tuple = ()
    lo: float | None = None
    hi: float | None = None
    num_points: int | None = None
    include_hi: bool | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown kind {self.kind!r}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.include_hi is None:
            object.__setattr__(self, "include_hi", self.kind == "interval_grid")
        if self.kind == "half_open_grid" and self.include_hi:
            raise InvalidSpec("a half-open grid excludes its upper end")
        if self.kind == "interval_grid" and not self.include_hi:
            raise InvalidSpec("an interval grid includes its upper end")
        lv = self.levels()
        if lv.size == 0:
            raise InvalidSpec("empty volatility set")
        if np.any(~(lv > 0)) or not np.all(np.isfinite(lv)):
            raise InvalidSpec("variance rates must be positive and finite")

    @classmethod
    def finite(cls, *values) -> VolSpec:
        return cls("finite_set", tuple(values))

    @classmethod
    def interval(cls, lo, hi, num_points) -> VolSpec:
        return cls("interval_grid", lo=lo, hi=hi, num_points=num_points)

    @classmethod
    def half_open(cls, lo, hi, num_points) -> VolSpec:
        return cls("half_open_grid", lo=lo, hi=hi, num_points=num_points)

    def levels(self) -> np.ndarray:
        if self.kind == "finite_set":
            return np.unique(np.asarray(self.values, dtype=float))
        if self.lo is None or self.hi is None or not self.num_points or self.num_points < 1:
            raise InvalidSpec("grids need lo, hi and num_points >= 1")
        if not self.lo < self.hi and not (self.num_points == 1 and self.include_hi and self.lo == self.hi):
            raise InvalidSpec("grid needs lo < hi")
        if self.include_hi:
            return np.linspace(self.lo, self.hi, self.num_points)
        return self.lo + (self.hi - self.lo) * np.arange(self.num_points) / self.num_points

    def to_dict(self) -> dict:
        if self.kind == "finite_set":
            return {"kind": self.kind, "values": list(self.values)}
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi, "num_points": self.num_points}

    @classmethod
    def from_dict(cls, d: Mapping) -> VolSpec:
        if d.get("kind", "finite_set") == "finite_set":
            return cls("finite_set", tuple(d["values"]))
        return cls(d["kind"], lo=d["lo"], hi=d["hi"], num_points=d["num_points"])


@dataclass(frozen=True)
class DProcess:
    """Adapted volatility set: ``rule(k, increments_so_far, dt) -> VolSpec``.

    The rule only ever sees the prefix, which is what makes the process adapted.
    """

    rule: Callable
    name: str = ""

    def spec_at(self, k: int, increments: tuple, dt: float) -> VolSpec:
        return self.rule(k, tuple(increments), dt)


def _increments_for(levels, dt: float) -> set:
    out = set()
    for s in levels:
        a = math.sqrt(s * dt)
        out.update((a, -a))
    return out


def _two_point_laws(levels, alphabet: tuple, dt: float) -> np.ndarray:
    pos = {x: i for i, x in enumerate(alphabet)}
    laws = np.zeros((len(levels), len(alphabet)))
    for r, s in enumerate(levels):
        a = math.sqrt(s * dt)
        laws[r, pos[a]] += 0.5
        laws[r, pos[-a]] += 0.5
    return laws


def build_vol_lattice(spec, K: int, dt: float, max_rounds: int = 16):
    """(Lattice, RectangularFamily) for a constant VolSpec or a DProcess."""
    if K < 1 or not dt > 0:
        raise InvalidSpec("need K >= 1 and dt > 0")
    if isinstance(spec, VolSpec):
        levels = spec.levels()
        alphabet = tuple(sorted(_increments_for(levels, dt)))
        lattice = Lattice.homogeneous(alphabet, K, dt)
        return lattice, RectangularFamily.constant(lattice, _two_point_laws(levels, alphabet, dt))
    if not isinstance(spec, DProcess):
        raise InvalidSpec(f"expected VolSpec or DProcess, got {type(spec).__name__}")
    # grow the alphabet until every node's set is representable on it
    incs = _increments_for(spec.spec_at(0, (), dt).levels(), dt)
    for _ in range(max_rounds):
        lattice = Lattice.homogeneous(sorted(incs), K, dt)
        table = {
            node: spec.spec_at(len(node), lattice.increments(node), dt).levels()
            for k in range(K) for node in lattice.nodes(k)
        }
        new = set().union(*(_increments_for(lv, dt) for lv in table.values()))
        if new <= incs:
            alphabet = lattice.alphabet[0]
            family = RectangularFamily.from_node_laws(
                lattice, {n: _two_point_laws(lv, alphabet, dt) for n, lv in table.items()}
            )
            return lattice, family
        incs |= new
    raise InvalidSpec(f"increment alphabet did not stabilise within {max_rounds} rounds")


def g_function(gamma: float, spec: VolSpec) -> float:
    """G(gamma) = 1/2 max over levels s of gamma * s (d = 1)."""
    return 0.5 * float(np.max(gamma * spec.levels()))


def _payoff(xi, lattice: Lattice) -> RandomVariable:
    if isinstance(xi, RandomVariable):
        return xi
    if isinstance(xi, str):
        from .payoff import compile_payoff

        return compile_payoff(xi, lattice)
    return xi(lattice)


def g_expectation(spec, K: int, dt: float, xi) -> float:
    """E_0(xi) = sup over the volatility family of E^P[xi].

    ``xi`` is a payoff source string, a RandomVariable on the matching lattice,
    or a callable ``lattice -> RandomVariable``.
    """
    lattice, family = build_vol_lattice(spec, K, dt)
    return float(dpp_value_function(family, _payoff(xi, lattice))[0])


def _constant_rate_indicator(lattice: Lattice, rate: float) -> RandomVariable:
    ahat = lattice.increment_matrix() ** 2 / lattice.dt
    hit = np.all(np.isclose(ahat, rate, rtol=QV_RTOL, atol=0.0), axis=1)
    return RandomVariable(lattice, hit.reshape(lattice.shape).astype(float))


def example_51_scenario(K: int, dt: float = 1.0, pair=(1.0, 4.0), grid=(1.0, 2.25, 4.0), rate: float = 2.25) -> dict:
    """Indicator of 'every step has rate ``rate``' under a set that contains the
    rate versus one that only brackets it."""
    out = {"K": K, "dt": dt, "rate": rate}
    for name, levels in (("grid", grid), ("pair", pair)):
        spec = VolSpec.finite(*levels)
        lattice, family = build_vol_lattice(spec, K, dt)
        xi = _constant_rate_indicator(lattice, rate)
        out[name] = float(dpp_value_function(family, xi)[0])
    return out


def qv_at_least(lattice: Lattice, threshold: float) -> RandomVariable:
    qv = np.sum(lattice.increment_matrix() ** 2, axis=1)
    hit = qv >= threshold * (1 - QV_RTOL)
    return RandomVariable(lattice, hit.reshape(lattice.shape).astype(float))


def example_52_scenario(K: int, dt: float = 1.0, lo: float = 1.0, hi: float = 2.0, num_points: int = 4) -> dict:
    """P(<B>_K >= hi K dt) under the closed grid [lo, hi] versus the half-open [lo, hi)."""
    out = {"K": K, "dt": dt}
    for name, spec in (
        ("closed", VolSpec.interval(lo, hi, num_points + 1)),
        ("half_open", VolSpec.half_open(lo, hi, num_points)),
    ):
        lattice, family = build_vol_lattice(spec, K, dt)
        out[name] = float(dpp_value_function(family, qv_at_least(lattice, hi * K * dt))[0])
        b2 = RandomVariable(lattice, lattice.value_array(K) ** 2)
        out[f"{name}_B2"] = float(dpp_value_function(family, b2)[0])
        out[f"{name}_top_level"] = float(spec.levels().max())
    return out


def check_d_adaptedness(d_process, lattice: Lattice) -> dict:
    """Structural PASS for a DProcess; for a table ``{(k, path): levels}`` every
    step-k entry must agree across paths sharing their first k increments."""
    if isinstance(d_process, (DProcess, VolSpec)):
        return {"status": "PASS", "witness": None, "structural": True}
    seen = {}
    for (k, path), levels in sorted(d_process.items()):
        path = lattice.check_path(path)
        key = (k, path[:k])
        entry = tuple(sorted(float(x) for x in np.atleast_1d(levels)))
        if key in seen and seen[key][1] != entry:
            return {"status": "FAIL", "witness": {"step": k, "paths": [list(seen[key][0]), list(path)]},
                    "structural": False}
        seen.setdefault(key, (path, entry))
    return {"status": "PASS", "witness": None, "structural": False}


def sample_vol_path(rates, dt: float, rng: np.random.Generator) -> np.ndarray:
    """Increments +-sqrt(rate_k dt) with independent fair signs."""
    rates = np.asarray(rates, dtype=float)
    signs = rng.choice([-1.0, 1.0], size=rates.shape)
    return signs * np.sqrt(rates * dt)


def d_process_from_config(cfg: Mapping) -> DProcess:
    """``{"default": vol_spec, "rules": [{"when": payoff-expr, "vol_spec": ...}]}``.

    Conditions are payoff expressions evaluated on the prefix (so ``B`` and
    ``QV`` are the current value and realized QV, ``STEPS`` the prefix
    length); the first nonzero condition wins.
    """
    from .payoff import evaluate_increments, parse

    default = VolSpec.from_dict(cfg["default"])
    rules = [(parse(r["when"]), VolSpec.from_dict(r["vol_spec"])) for r in cfg.get("rules", [])]

    def rule(k, increments, dt):
        inc = np.asarray(increments, dtype=float).reshape(1, k)
        for cond, spec in rules:
            if evaluate_increments(cond, inc, dt)[0] != 0:
                return spec
        return default

    return DProcess(rule, name="config")
