"""Scenario families {P(j, omega)} and checks of their invariance and pasting stability.

A family assigns to every node ``n`` (time ``len(n)``) a set of measures on the
sub-lattice below ``n``. Keying by node makes adaptedness structural.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .measure import PROB_TOL, TreeMeasure, paste
from .pathspace import Lattice, NodeId, stopping_rules_for_check

DEFAULT_MAX_ENUM = 10**7


class SizeLimit(RuntimeError):
    def __init__(self, cardinality: int, cap: int):
        super().__init__(f"enumeration of {cardinality} items exceeds the cap {cap}")
        self.cardinality = cardinality
        self.cap = cap


def _check_size(count: int, cap: int):
    if count > cap:
        raise SizeLimit(count, cap)


class RectangularFamily:
    """Per-node finite sets of one-step laws; P(j, n) is every selection below n.

    ``laws[k]`` has shape ``shape[:k] + (Lmax_k, b_k)`` (rows past a node's
    count are padding) and ``counts[k]`` has shape ``shape[:k]``.
    """

    def __init__(self, lattice: Lattice, laws: Sequence, counts: Sequence):
        self.lattice = lattice
        self.laws = tuple(np.asarray(a, dtype=float) for a in laws)
        self.counts = tuple(np.asarray(c, dtype=np.int64) for c in counts)
        for k in range(lattice.num_steps):
            a, c = self.laws[k], self.counts[k]
            if a.shape[:k] != lattice.shape[:k] or a.shape[-1] != lattice.shape[k] or c.shape != lattice.shape[:k]:
                raise ValueError(f"law array for step {k} does not fit the lattice")
            if np.any(c < 1):
                raise ValueError("every node needs a nonempty set of one-step laws")
            if np.any(a < 0) or np.any(np.abs(a.sum(axis=-1) - 1.0) > PROB_TOL):
                raise ValueError(f"one-step laws at step {k} are not probability vectors")
            a.setflags(write=False)

    @classmethod
    def from_node_laws(cls, lattice: Lattice, laws) -> RectangularFamily:
        """``laws`` is a callable or mapping: node -> sequence of one-step vectors."""
        get = laws if callable(laws) else laws.__getitem__
        per_level = []
        for k in range(lattice.num_steps):
            table = {node: np.atleast_2d(np.asarray(get(node), dtype=float)) for node in lattice.nodes(k)}
            per_level.append(table)
        arrays, counts = [], []
        for k, table in enumerate(per_level):
            lmax = max(t.shape[0] for t in table.values())
            a = np.empty(lattice.shape[:k] + (lmax, lattice.shape[k]))
            c = np.empty(lattice.shape[:k], dtype=np.int64)
            for node, t in table.items():
                if t.shape[1] != lattice.shape[k]:
                    raise ValueError(f"laws at {node} have length {t.shape[1]}, expected {lattice.shape[k]}")
                # padding repeats the first law, which never changes a maximum
                a[node] = np.concatenate([t, np.repeat(t[:1], lmax - t.shape[0], axis=0)])
                c[node] = t.shape[0]
            arrays.append(a)
            counts.append(c)
        return cls(lattice, arrays, counts)

    @classmethod
    def constant(cls, lattice: Lattice, laws) -> RectangularFamily:
        """The same set of one-step laws at every node."""
        laws = np.atleast_2d(np.asarray(laws, dtype=float))
        arrays = [np.broadcast_to(laws, lattice.shape[:k] + laws.shape) for k in range(lattice.num_steps)]
        counts = [np.full(lattice.shape[:k], laws.shape[0]) for k in range(lattice.num_steps)]
        return cls(lattice, arrays, counts)

    def laws_at(self, node: NodeId) -> np.ndarray:
        node = tuple(node)
        k = len(node)
        return self.laws[k][node][: self.counts[k][node]]

    def size(self, node: NodeId) -> int:
        node = tuple(node)
        j = len(node)
        return math.prod(int(c) for k in range(j, self.lattice.num_steps) for c in self.counts[k][node].ravel())

    def _selections(self, node: NodeId, index: np.ndarray) -> list:
        """Transition arrays of the selections with the given enumeration indices."""
        node = tuple(node)
        j, lat = len(node), self.lattice
        radices, blocks = [], []
        for k in range(j, lat.num_steps):
            c = self.counts[k][node].ravel()
            blocks.append(len(c))
            radices.extend(int(x) for x in c)
        digits = np.unravel_index(index, radices) if radices else ()
        out, offset = [], 0
        m = len(index)
        for k, n_k in zip(range(j, lat.num_steps), blocks):
            sub_shape = lat.shape[j:k]
            a = self.laws[k][node].reshape(n_k, -1, lat.shape[k])
            choice = np.stack(digits[offset : offset + n_k], axis=1)
            gathered = a[np.arange(n_k)[None, :], choice]
            out.append(gathered.reshape((m,) + sub_shape + (lat.shape[k],)))
            offset += n_k
        return out

    def measure_at(self, node: NodeId, index: int) -> TreeMeasure:
        sel = self._selections(node, np.array([index]))
        return TreeMeasure(self.lattice.sub(len(node)), tuple(g[0] for g in sel))

    def measures(self, node: NodeId, max_enum: int = DEFAULT_MAX_ENUM) -> list:
        count = self.size(node)
        _check_size(count, max_enum)
        sel = self._selections(node, np.arange(count))
        sub = self.lattice.sub(len(tuple(node)))
        return [TreeMeasure(sub, tuple(g[i] for g in sel)) for i in range(count)]

    def path_prob_matrix(self, node: NodeId, max_enum: int = DEFAULT_MAX_ENUM, chunk: int = 1 << 15) -> np.ndarray:
        """Path probabilities of every selection below ``node``: shape (M, paths)."""
        count = self.size(node)
        _check_size(count, max_enum)
        rows = []
        for start in range(0, count, chunk):
            idx = np.arange(start, min(start + chunk, count))
            probs = np.ones((len(idx),))
            for g in self._selections(node, idx):
                probs = probs[..., None] * g
            rows.append(probs.reshape(len(idx), -1))
        return np.concatenate(rows)

    def contains(self, node: NodeId, Q: TreeMeasure, tol: float = PROB_TOL) -> bool:
        """Q (as a measure) is a selection below ``node``: its transitions at
        charged nodes are all among the local laws."""
        node = tuple(node)
        j = len(node)
        if Q.lattice != self.lattice.sub(j):
            return False
        masses = Q.node_masses()
        for i, t in enumerate(Q.transitions):
            k = j + i
            laws = self.laws[k][node]
            counts = self.counts[k][node]
            close = np.all(np.abs(laws - t[..., None, :]) <= tol, axis=-1)
            close &= np.arange(laws.shape[-2]) < counts[..., None]
            if np.any((masses[i] > 0) & ~np.any(close, axis=-1)):
                return False
        return True


class ExplicitFamily:
    """Explicit finite lists of measures per node.

    Missing non-terminal nodes carry the empty set; terminal nodes default to
    the single trivial measure on the empty sub-lattice.
    """

    def __init__(self, lattice: Lattice, sets: Mapping):
        self.lattice = lattice
        self.sets = {}
        for node, measures in sets.items():
            node = lattice.check_node(node)
            sub = lattice.sub(len(node))
            measures = tuple(measures)
            if any(Q.lattice != sub for Q in measures):
                raise ValueError(f"measures at {node} must live on the sub-lattice below it")
            self.sets[node] = measures
        if not self.sets.get(()):
            raise ValueError("the family must be nonempty at the root")
        self._empty_leaf = TreeMeasure(lattice.sub(lattice.num_steps), ())

    def measures(self, node: NodeId, max_enum: int = DEFAULT_MAX_ENUM) -> list:
        node = tuple(node)
        if node in self.sets:
            out = list(self.sets[node])
        elif len(node) == self.lattice.num_steps:
            out = [self._empty_leaf]
        else:
            out = []
        _check_size(len(out), max_enum)
        return out

    def size(self, node: NodeId) -> int:
        return len(self.measures(node))

    def measure_at(self, node: NodeId, index: int) -> TreeMeasure:
        return self.measures(node)[index]

    def path_prob_matrix(self, node: NodeId, max_enum: int = DEFAULT_MAX_ENUM) -> np.ndarray:
        ms = self.measures(node, max_enum)
        n = self.lattice.sub(len(tuple(node))).num_paths
        if not ms:
            return np.zeros((0, n))
        return np.stack([Q.path_probs().ravel() for Q in ms])

    def contains(self, node: NodeId, Q: TreeMeasure, tol: float = PROB_TOL) -> bool:
        return any(Q.same_law(R, tol) for R in self.measures(node))

    def empty_nodes(self) -> list:
        return [n for n in self.lattice.all_nodes() if not self.measures(n)]


def enumerate_measures(family, j: int, node: NodeId, max_enum: int = DEFAULT_MAX_ENUM) -> list:
    """P(j, omega) for a node of length j, in deterministic order."""
    node = tuple(node)
    if len(node) != j:
        raise ValueError(f"node {node} does not have length {j}")
    return family.measures(node, max_enum)


@dataclass
class CheckReport:
    check: str
    status: str
    witness: dict | None = None
    checked: int = 0
    exhaustive: bool = True
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.status == "PASS"

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "status": self.status,
            "witness": self.witness,
            "checked": self.checked,
            "exhaustive": self.exhaustive,
            "notes": list(self.notes),
        }


def _cells(family, max_rules: int, seed: int):
    """(node, number of measures, stopping rules on the sub-lattice) for every node."""
    lat = family.lattice
    for node in lat.all_nodes():
        size = family.size(node)
        if size:
            yield node, size, stopping_rules_for_check(lat.sub(len(node)), max_rules, seed)


def _pick(cells, max_tuples: int, seed: int, weight):
    """Yield (node, measure index, rule) triples; all of them if the estimated
    tuple count fits ``max_tuples``, otherwise a seeded uniform sample."""
    cells = list(cells)
    total = sum(size * sum(weight(node, r) for r in rules) for node, size, rules in cells)
    if total <= max_tuples:
        for node, size, rules in cells:
            for i in range(size):
                for rule in rules:
                    yield node, i, rule, None
        return
    rng = np.random.default_rng(seed)
    sizes = [size * len(rules) for _, size, rules in cells]
    cum = np.cumsum(sizes)
    for flat in np.sort(rng.integers(0, cum[-1], size=max_tuples)):
        b = int(np.searchsorted(cum, flat, side="right"))
        node, size, rules = cells[b]
        local = int(flat - (cum[b - 1] if b else 0))
        yield node, local // len(rules), rules[local % len(rules)], rng


def _witness(node, index, rule, **extra) -> dict:
    out = {
        "s": len(node),
        "omega_bar": list(node),
        "measure_index": index,
        "theta_boundary": [list(m) for m in rule.sorted_boundary()],
    }
    out.update(extra)
    return out


def check_invariance(family, max_rules: int = 100, seed: int = 0, max_tuples: int = 200_000) -> CheckReport:
    """Conditionals of members are members: P^{theta,omega} in P(tau, omega_bar (x) omega)."""
    report = CheckReport("invariance", "PASS")
    cache = {}
    for node, i, rule, rng in _pick(
        _cells(family, max_rules, seed), max_tuples, seed, lambda n, r: len(r.boundary)
    ):
        report.exhaustive &= rng is None
        P = family.measure_at(node, i)
        masses = P.node_masses()
        for m in rule.sorted_boundary():
            if masses[len(m)][m] <= 0:
                continue
            report.checked += 1
            key = (node, i, m)
            if key not in cache:
                cache[key] = family.contains(node + m, P.restrict(m))
            if not cache[key]:
                report.status = "FAIL"
                report.witness = _witness(node, i, rule, omega=list(m))
                return report
    return report


def check_pasting(family, max_rules: int = 100, seed: int = 0, max_tuples: int = 20_000) -> CheckReport:
    """paste(P, theta, nu) stays in P(s, omega_bar) for admissible kernels nu."""
    report = CheckReport("pasting", "PASS")

    def weight(node, rule):
        return math.prod(max(family.size(node + m), 1) for m in rule.boundary)

    for node, i, rule, rng in _pick(_cells(family, max_rules, seed), max_tuples, seed, weight):
        report.exhaustive &= rng is None
        P = family.measure_at(node, i)
        masses = P.node_masses()
        charged = [m for m in rule.sorted_boundary() if masses[len(m)][m] > 0]
        sizes = [family.size(node + m) for m in charged]
        if 0 in sizes:
            continue  # no admissible kernel
        if rng is None:
            choices = np.ndindex(*sizes)
        else:
            choices = [tuple(int(rng.integers(s)) for s in sizes)]
        for choice in choices:
            nu = {m: family.measure_at(node + m, c) for m, c in zip(charged, choice)}
            report.checked += 1
            if not family.contains(node, paste(P, rule, nu)):
                report.status = "FAIL"
                report.witness = _witness(
                    node, i, rule, kernel={str(list(m)): c for m, c in zip(charged, choice)}
                )
                return report
    return report


def measurability_note(family) -> CheckReport:
    """The analytic-graph measurability requirement is vacuous on a finite space."""
    report = CheckReport("measurability", "PASS", exhaustive=True)
    report.notes.append(
        "measurability assumption (analytic graph of omega -> P(tau, omega)): "
        "every subset of a finite path space is Borel, so it holds trivially"
    )
    empty = family.empty_nodes() if hasattr(family, "empty_nodes") else []
    if empty:
        report.notes.append(
            f"warning: {len(empty)} node(s) carry an empty scenario set (first: {list(empty[0])}); "
            "these must be null under every member of the root set, and sup over them is -inf"
        )
    return report


def check_conditional_closure(family, max_enum: int = DEFAULT_MAX_ENUM) -> CheckReport:
    """Diagnostic: on reachable nodes, P(j, n) equals the set of conditionals of root members."""
    report = CheckReport("conditional_closure", "PASS")
    roots = family.measures((), max_enum)
    lat = family.lattice
    for node in lat.all_nodes():
        conds = [P.restrict(node) for P in roots if P.prob(node) > 0]
        if not conds:
            continue
        local = family.measures(node, max_enum)
        report.checked += 1
        missing = [i for i, Q in enumerate(local) if not any(Q.same_law(C) for C in conds)]
        extra = [C for C in conds if not family.contains(node, C)]
        if missing or extra:
            report.status = "FAIL"
            report.witness = {"node": list(node), "unreached_members": missing[:5], "outside": len(extra)}
            return report
    return report


def _sign_lattice(K: int = 2) -> Lattice:
    return Lattice.homogeneous([-1.0, 1.0], K)


def engineered_invariance_violation() -> ExplicitFamily:
    """Root set {uniform}, but every depth-1 node only allows the up-move:
    the conditional of the root member is excluded."""
    lat = _sign_lattice()
    sub = lat.sub(1)
    up = TreeMeasure(sub, (np.array([0.0, 1.0]),))
    return ExplicitFamily(lat, {(): [TreeMeasure.uniform(lat)], (0,): [up], (1,): [up]})


def engineered_pasting_violation() -> ExplicitFamily:
    """Root set {uniform}; depth-1 nodes allow uniform and both point masses.
    Invariance holds, but pasting a point mass leaves the root set."""
    lat = _sign_lattice()
    sub = lat.sub(1)
    local = [
        TreeMeasure.uniform(sub),
        TreeMeasure(sub, (np.array([1.0, 0.0]),)),
        TreeMeasure(sub, (np.array([0.0, 1.0]),)),
    ]
    return ExplicitFamily(lat, {(): [TreeMeasure.uniform(lat)], (0,): local, (1,): local})


def random_rectangular_family(rng: np.random.Generator, max_steps: int = 3, max_branch: int = 2,
                              max_laws: int = 3) -> RectangularFamily:
    """Random lattice (1..max_steps steps, 2..max_branch moves) with random
    Dirichlet one-step laws, 1..max_laws of them at every node."""
    K = int(rng.integers(1, max_steps + 1))
    alphabet = []
    for _ in range(K):
        b = int(rng.integers(2, max_branch + 1))
        alphabet.append(tuple(np.sort(np.round(rng.uniform(-2.0, 2.0, size=b), 3)) + np.arange(b) * 1e-3))
    lat = Lattice(tuple(alphabet), float(rng.choice([0.25, 0.5, 1.0])))

    def laws(node):
        n = int(rng.integers(1, max_laws + 1))
        return rng.dirichlet(np.ones(lat.shape[len(node)]), size=n)

    return RectangularFamily.from_node_laws(lat, laws)
