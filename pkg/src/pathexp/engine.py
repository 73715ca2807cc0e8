"""Conditional sublinear expectations E_tau(xi) and checks of their structure.

Two independent routes compute E_tau(xi)(omega) = sup over P(tau, omega) of
E^P[xi^{tau, omega}]:

* the oracle enumerates every measure of the scenario set at the node and
  takes the maximum of exact expectations;
* the dynamic program (rectangular families only) runs backward induction,
  maximising one-step expectations over the node's local laws.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ambiguity import DEFAULT_MAX_ENUM, RectangularFamily
from .extreal import NINF, abs_gap, ext_expect, ext_max
from .pathspace import PathId, RandomVariable, StoppingRule


class PrecedenceViolation(ValueError):
    pass


def _node_oracle(family, node, xi: RandomVariable, max_enum: int) -> float:
    probs = family.path_prob_matrix(node, max_enum)
    if probs.shape[0] == 0:
        return NINF
    return ext_max(ext_expect(probs, xi.values[tuple(node)].ravel()[None, :]))


def sublinear_expectation_oracle(family, tau: StoppingRule, xi: RandomVariable, omega: PathId,
                                 max_enum: int = DEFAULT_MAX_ENUM) -> float:
    """Max over the enumerated scenario set at prefix(omega, tau(omega))."""
    return _node_oracle(family, tau.node(omega), xi, max_enum)


def oracle_values(family, tau: StoppingRule, xi: RandomVariable, max_enum: int = DEFAULT_MAX_ENUM) -> RandomVariable:
    """E_tau(xi) on every path via the oracle (an F_tau-measurable variable)."""
    out = np.empty(xi.lattice.shape)
    for node in tau.boundary:
        out[node] = _node_oracle(family, node, xi, max_enum)
    return RandomVariable(xi.lattice, out)


def dpp_value_function(family: RectangularFamily, xi: RandomVariable) -> list:
    """Backward induction: ``V[k][node]`` = E_k(xi) at every node of length k."""
    if not isinstance(family, RectangularFamily):
        raise TypeError("the dynamic program needs a rectangular family")
    lat = family.lattice
    V = [None] * (lat.num_steps + 1)
    V[-1] = xi.values
    for k in range(lat.num_steps - 1, -1, -1):
        laws = family.laws[k]
        per_law = np.asarray(ext_expect(laws, V[k + 1][..., None, :]))
        live = np.arange(laws.shape[-2]) < family.counts[k][..., None]
        V[k] = np.max(np.where(live, per_law, NINF), axis=-1)
    return V


def sublinear_expectation_dpp(family: RectangularFamily, tau: StoppingRule, xi: RandomVariable) -> RandomVariable:
    """E_tau(xi) by dynamic programming, read off at the tau-boundary."""
    V = dpp_value_function(family, xi)
    out = np.empty(xi.lattice.shape)
    for node in tau.boundary:
        out[node] = V[len(node)][node]
    return RandomVariable(xi.lattice, out)


def _worst(gap: np.ndarray):
    flat = int(np.argmax(gap))
    path = tuple(int(i) for i in np.unravel_index(flat, gap.shape))
    return float(gap.ravel()[flat]), path


@dataclass
class TowerReport:
    deviation: float
    witness: PathId | None
    one_sided: bool  # E_sigma(xi) <= E_sigma(E_tau(xi)) everywhere
    dpp_deviation: float | None = None
    tol: float = 1e-10

    @property
    def passed(self) -> bool:
        ok = self.deviation <= self.tol
        return ok and (self.dpp_deviation is None or self.dpp_deviation <= self.tol)

    def to_dict(self) -> dict:
        return {
            "status": "PASS" if self.passed else "FAIL",
            "deviation": self.deviation,
            "witness": list(self.witness) if self.witness is not None else None,
            "one_sided": self.one_sided,
            "dpp_deviation": self.dpp_deviation,
        }


def verify_tower(family, sigma: StoppingRule, tau: StoppingRule, xi: RandomVariable,
                 max_enum: int = DEFAULT_MAX_ENUM, tol: float = 1e-10) -> TowerReport:
    """max over omega of |E_sigma(xi) - E_sigma(E_tau(xi))|, by the oracle.

    For rectangular families the dynamic program is run too and its
    deviation from the oracle's E_sigma(xi) is reported.
    """
    if not sigma <= tau:
        bad = tuple(int(i) for i in np.argwhere(sigma.times > tau.times)[0])
        raise PrecedenceViolation(f"sigma > tau on path {bad}")
    direct = oracle_values(family, sigma, xi, max_enum)
    inner = oracle_values(family, tau, xi, max_enum)
    nested = oracle_values(family, sigma, inner, max_enum)
    dev, path = _worst(abs_gap(direct.values, nested.values))
    one_sided = bool(np.all(direct.values <= nested.values))
    dpp_dev = None
    if isinstance(family, RectangularFamily):
        dpp = sublinear_expectation_dpp(family, sigma, xi)
        dpp_dev = float(np.max(abs_gap(direct.values, dpp.values)))
    return TowerReport(dev, path if dev > tol else None, one_sided, dpp_dev, tol)


@dataclass
class EssSupReport:
    status: str
    worst_deviation: float
    per_measure: list = field(default_factory=list)
    witness: dict | None = None

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "worst_deviation": self.worst_deviation,
            "measures_checked": len(self.per_measure),
            "witness": self.witness,
        }


def verify_esssup_representation(family, tau: StoppingRule, xi: RandomVariable,
                                 max_enum: int = DEFAULT_MAX_ENUM, tol: float = 1e-10,
                                 mass_decimals: int = 12) -> EssSupReport:
    """For every P in the root set: E_tau(xi) = max over P' = P on F_tau of
    E^{P'}[xi | F_tau], at every boundary node charged by P.

    Measures are grouped by their boundary masses rounded to ``mass_decimals``.
    """
    e_tau = oracle_values(family, tau, xi, max_enum)
    boundary = tau.sorted_boundary()
    probs = family.path_prob_matrix((), max_enum)
    M = probs.shape[0]
    if M == 0:
        return EssSupReport("PASS", 0.0)
    probs = probs.reshape((M,) + xi.lattice.shape)
    masses = np.empty((M, len(boundary)))
    cond = np.empty((M, len(boundary)))
    for b, node in enumerate(boundary):
        block = probs[(slice(None),) + node].reshape(M, -1)
        m = block.sum(axis=1)
        masses[:, b] = m
        with np.errstate(invalid="ignore", divide="ignore"):
            w = np.where(m[:, None] > 0, block / np.where(m > 0, m, 1.0)[:, None], 0.0)
        cond[:, b] = np.where(m > 0, ext_expect(w, xi.values[node].ravel()[None, :]), NINF)
    target = np.array([np.ravel(e_tau.values[node])[0] for node in boundary])
    _, group = np.unique(np.round(masses, mass_decimals), axis=0, return_inverse=True)
    group = group.ravel()
    esssup = np.full((group.max() + 1, len(boundary)), NINF)
    np.maximum.at(esssup, group, cond)
    gap = np.where(masses > 0, abs_gap(target[None, :], esssup[group]), 0.0)
    per = gap.max(axis=1) if gap.size else np.zeros(M)
    worst = float(per.max())
    witness = None
    if worst > 0:
        r = int(np.argmax(per))
        b = int(np.argmax(gap[r]))
        witness = {"measure_index": r, "node": list(boundary[b]),
                   "E_tau": float(target[b]), "esssup": float(esssup[group[r], b])}
    return EssSupReport("PASS" if worst <= tol else "FAIL", worst, per.tolist(), witness)


@dataclass
class SamplingReport:
    status: str
    mismatches: int
    witness: PathId | None = None

    def to_dict(self) -> dict:
        return {"status": self.status, "mismatches": self.mismatches,
                "witness": list(self.witness) if self.witness is not None else None}


def verify_optional_sampling(family, tau: StoppingRule, xi: RandomVariable,
                             max_enum: int = DEFAULT_MAX_ENUM) -> SamplingReport:
    """E_tau(xi) equals the process t -> E_t(xi) sampled at t = tau, exactly."""
    lat = xi.lattice
    process = np.stack([
        oracle_values(family, StoppingRule.constant(lat, t), xi, max_enum).values
        for t in range(lat.num_steps + 1)
    ])
    sampled = np.take_along_axis(process, tau.times[None, ...], axis=0)[0]
    direct = oracle_values(family, tau, xi, max_enum).values
    bad = ~(sampled == direct)
    witness = tuple(int(i) for i in np.argwhere(bad)[0]) if bad.any() else None
    return SamplingReport("PASS" if not bad.any() else "FAIL", int(bad.sum()), witness)


def epsilon_optimal_selector(family, tau: StoppingRule, xi: RandomVariable,
                             max_enum: int = DEFAULT_MAX_ENUM) -> dict:
    """An exact maximiser in P(tau, node) for every tau-boundary node.

    Ties go to the first measure in enumeration order. Nodes with an empty
    scenario set map to None.
    """
    kernel = {}
    for node in tau.sorted_boundary():
        probs = family.path_prob_matrix(node, max_enum)
        if probs.shape[0] == 0:
            kernel[node] = None
            continue
        vals = np.atleast_1d(ext_expect(probs, xi.values[node].ravel()[None, :]))
        kernel[node] = family.measure_at(node, int(np.argmax(vals)))
    return kernel
