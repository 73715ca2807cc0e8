"""Finite path space: lattices, random variables, stopping rules.

Paths and nodes are tuples of alphabet indices. A node of length ``j`` is the
prefix of a path up to time ``j``; the root is ``()``. Everything that lives on
paths is stored as a numpy array of shape ``lattice.shape`` so that indexing
with a node tuple returns the sub-array of its extensions, which is exactly
the object living on the remaining sub-lattice.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterator, NamedTuple, Sequence

import numpy as np

PathId = tuple
NodeId = tuple


class AlphabetMismatch(ValueError):
    """A spliced increment is not in the target step's alphabet."""


class InvalidStoppingRule(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Lattice:
    """K-step path space started at 0 with a finite increment alphabet per step."""

    alphabet: tuple
    dt: float = 1.0

    def __post_init__(self):
        alph = tuple(tuple(float(x) for x in step) for step in self.alphabet)
        if any(len(step) == 0 for step in alph):
            raise ValueError("every step needs at least one increment")
        if any(len(set(step)) != len(step) for step in alph):
            raise ValueError("increments within a step must be distinct")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "alphabet", alph)

    @classmethod
    def homogeneous(cls, increments: Sequence[float], num_steps: int, dt: float = 1.0) -> Lattice:
        if num_steps < 1:
            raise ValueError("num_steps must be >= 1")
        return cls((tuple(increments),) * num_steps, dt)

    @property
    def num_steps(self) -> int:
        return len(self.alphabet)

    @property
    def shape(self) -> tuple:
        return tuple(len(step) for step in self.alphabet)

    @property
    def num_paths(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    @property
    def is_homogeneous(self) -> bool:
        return len(set(self.alphabet)) <= 1

    def __eq__(self, other):
        return (
            isinstance(other, Lattice)
            and self.alphabet == other.alphabet
            and self.dt == other.dt
        )

    def __hash__(self):
        return hash((self.alphabet, self.dt))

    def sub(self, j: int) -> Lattice:
        """The lattice of increments remaining after time ``j``."""
        return Lattice(self.alphabet[j:], self.dt)

    def paths(self) -> Iterator[PathId]:
        """All paths in lexicographic order (the order of ``np.ndindex``)."""
        return itertools.product(*(range(b) for b in self.shape))

    def nodes(self, level: int) -> Iterator[NodeId]:
        return itertools.product(*(range(b) for b in self.shape[:level]))

    def all_nodes(self) -> Iterator[NodeId]:
        for level in range(self.num_steps + 1):
            yield from self.nodes(level)

    def check_node(self, node: NodeId) -> NodeId:
        node = tuple(int(i) for i in node)
        if len(node) > self.num_steps or any(
            not 0 <= i < b for i, b in zip(node, self.shape)
        ):
            raise ValueError(f"node {node} does not belong to the lattice")
        return node

    def check_path(self, path: PathId) -> PathId:
        path = self.check_node(path)
        if len(path) != self.num_steps:
            raise ValueError(f"path {path} must have {self.num_steps} steps")
        return path

    def increments(self, node: NodeId) -> tuple:
        return tuple(self.alphabet[k][i] for k, i in enumerate(node))

    def values(self, node: NodeId) -> np.ndarray:
        """Path values B_0 = 0, B_1, ..., B_len(node)."""
        return np.concatenate([[0.0], np.cumsum(self.increments(node))])

    def increment_matrix(self) -> np.ndarray:
        """Increments of all paths, shape ``(num_paths, K)``, lexicographic rows."""
        grids = np.meshgrid(*(np.asarray(a) for a in self.alphabet), indexing="ij")
        if not grids:
            return np.zeros((1, 0))
        return np.stack([g.ravel() for g in grids], axis=1)

    def value_array(self, k: int) -> np.ndarray:
        """B_k for every path, as an array of shape ``self.shape``."""
        out = np.zeros(self.shape)
        for j in range(k):
            ax = [1] * self.num_steps
            ax[j] = self.shape[j]
            out = out + np.asarray(self.alphabet[j]).reshape(ax)
        return out


@dataclass(frozen=True, eq=False)
class RandomVariable:
    """Extended-real function on the full paths of a lattice."""

    lattice: Lattice
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.lattice.shape:
            raise ValueError(f"values shape {vals.shape} != lattice shape {self.lattice.shape}")
        if np.isnan(vals).any():
            raise ValueError("random variables take values in [-inf, inf], not nan")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, lattice: Lattice, fn: Callable[[PathId], float]) -> RandomVariable:
        vals = np.empty(lattice.shape)
        for path in lattice.paths():
            vals[path] = fn(path)
        return cls(lattice, vals)

    @classmethod
    def constant(cls, lattice: Lattice, c: float) -> RandomVariable:
        return cls(lattice, np.full(lattice.shape, float(c)))

    @classmethod
    def terminal_value(cls, lattice: Lattice) -> RandomVariable:
        return cls(lattice, lattice.value_array(lattice.num_steps))

    def __call__(self, path: PathId) -> float:
        return float(self.values[tuple(path)])

    def on(self, node: NodeId) -> RandomVariable:
        """Restriction to the extensions of ``node``, re-based on the sub-lattice."""
        node = tuple(node)
        return RandomVariable(self.lattice.sub(len(node)), self.values[node])

    def map(self, fn) -> RandomVariable:
        return RandomVariable(self.lattice, fn(self.values))


@dataclass(frozen=True, eq=False)
class StoppingRule:
    """A stopping time given by its boundary: an antichain of nodes covering all paths."""

    lattice: Lattice
    boundary: frozenset
    times: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        lat = self.lattice
        nodes = frozenset(lat.check_node(n) for n in self.boundary)
        times = np.full(lat.shape, -1, dtype=np.int64)
        for node in sorted(nodes, key=lambda n: (len(n), n)):
            block = times[node]
            if np.any(block >= 0):
                raise InvalidStoppingRule(f"boundary node {node} extends another boundary node")
            times[node] = len(node)
        if np.any(times < 0):
            uncovered = tuple(int(i) for i in np.argwhere(times < 0)[0])
            raise InvalidStoppingRule(f"path {uncovered} has no prefix in the boundary")
        times.setflags(write=False)
        object.__setattr__(self, "boundary", nodes)
        object.__setattr__(self, "times", times)

    @classmethod
    def constant(cls, lattice: Lattice, j: int) -> StoppingRule:
        if not 0 <= j <= lattice.num_steps:
            raise ValueError(f"time {j} outside 0..{lattice.num_steps}")
        return cls(lattice, frozenset(lattice.nodes(j)))

    @classmethod
    def hitting(cls, lattice: Lattice, level: float) -> StoppingRule:
        """First time with |B_j| >= level, or K if that never happens."""
        K = lattice.num_steps
        times = np.full(lattice.shape, K, dtype=np.int64)
        for j in range(K, -1, -1):
            hit = np.abs(lattice.value_array(j)) >= level
            times = np.where(hit, j, times)
        return cls.from_times(lattice, times)

    @classmethod
    def from_times(cls, lattice: Lattice, times) -> StoppingRule:
        """Build from a path -> time map; raises if the Galmarino test fails."""
        result = is_stopping_rule(lattice, times)
        if not result.ok:
            raise InvalidStoppingRule(f"not a stopping time; witness paths {result.witness}")
        arr = _times_array(lattice, times)
        boundary = {tuple(p[: arr[p]]) for p in lattice.paths()}
        return cls(lattice, frozenset(boundary))

    def __call__(self, path: PathId) -> int:
        return int(self.times[tuple(path)])

    def node(self, path: PathId) -> NodeId:
        path = tuple(path)
        return path[: self(path)]

    def sorted_boundary(self) -> list:
        return sorted(self.boundary)

    def __le__(self, other: StoppingRule) -> bool:
        return bool(np.all(self.times <= other.times))

    def __eq__(self, other):
        return isinstance(other, StoppingRule) and self.lattice == other.lattice and self.boundary == other.boundary

    def __hash__(self):
        return hash(self.boundary)


class GalmarinoResult(NamedTuple):
    ok: bool
    witness: tuple | None  # two paths agreeing up to tau(first) with different tau


def _times_array(lattice: Lattice, times) -> np.ndarray:
    if callable(times):
        arr = np.empty(lattice.shape, dtype=np.int64)
        for p in lattice.paths():
            arr[p] = times(p)
        return arr
    arr = np.asarray(times, dtype=np.int64)
    if arr.shape != lattice.shape:
        raise ValueError("time array shape does not match the lattice")
    return arr


def is_stopping_rule(lattice: Lattice, times) -> GalmarinoResult:
    """Galmarino's test for a path -> {0..K} map (callable or array)."""
    arr = _times_array(lattice, times)
    K = lattice.num_steps
    if np.any((arr < 0) | (arr > K)):
        bad = tuple(int(i) for i in np.argwhere((arr < 0) | (arr > K))[0])
        return GalmarinoResult(False, (bad, bad))
    for p in lattice.paths():
        j = int(arr[p])
        block = arr[p[:j]]
        if np.any(block != j):
            q = p[:j] + tuple(int(i) for i in np.argwhere(block != j)[0])
            return GalmarinoResult(False, (p, q))
    return GalmarinoResult(True, None)


def is_F_tau_measurable(xi: RandomVariable, tau: StoppingRule) -> bool:
    """True iff xi is constant on the extensions of every boundary node of tau."""
    for node in tau.boundary:
        block = xi.values[node]
        if np.any(block != block.flat[0]):
            return False
    return True


def concat(lattice: Lattice, omega: PathId, tau: StoppingRule, omega2: PathId) -> PathId:
    """omega up to tau(omega), then the increments of omega2.

    ``omega2`` is either a path of ``lattice.sub(tau(omega))`` (as returned by
    ``shift_path``) or a full path whose first K - tau(omega) increments are
    matched by value against the remaining steps.
    """
    omega = lattice.check_path(omega)
    j = tau(omega)
    omega2 = tuple(int(i) for i in omega2)
    if len(omega2) == lattice.num_steps - j:
        return omega[:j] + lattice.sub(j).check_path(omega2)
    omega2 = lattice.check_path(omega2)
    tail = []
    for i, idx in enumerate(omega2[: lattice.num_steps - j]):
        value = lattice.alphabet[i][idx]
        target = lattice.alphabet[j + i]
        if value not in target:
            raise AlphabetMismatch(f"increment {value} is not available at step {j + i}")
        tail.append(target.index(value))
    return omega[:j] + tuple(tail)


def shift_path(lattice: Lattice, omega: PathId, tau: StoppingRule) -> PathId:
    """The post-tau part of omega, as a path of ``lattice.sub(tau(omega))``."""
    omega = lattice.check_path(omega)
    return omega[tau(omega):]


def shift_rv(lattice: Lattice, xi: RandomVariable, tau: StoppingRule, omega: PathId) -> RandomVariable:
    """xi^{tau,omega}: the map w -> xi(omega (x)_tau w) on the remaining sub-lattice."""
    omega = lattice.check_path(omega)
    return xi.on(tau.node(omega))


def shifted_stopping_rule(sigma: StoppingRule, tau: StoppingRule, omega: PathId) -> StoppingRule:
    """theta(w) = tau(omega (x)_sigma w) - sigma(omega), a rule on the sub-lattice."""
    node = sigma.node(omega)
    if not sigma <= tau:
        raise ValueError("shifted stopping rule needs sigma <= tau")
    sub = sigma.lattice.sub(len(node))
    return StoppingRule.from_times(sub, tau.times[node] - len(node))


def all_stopping_rules(lattice: Lattice) -> Iterator[StoppingRule]:
    """Every stopping rule of the lattice, in a deterministic order."""
    for boundary in _antichains(lattice, ()):
        yield StoppingRule(lattice, frozenset(boundary))


def _antichains(lattice: Lattice, node: NodeId) -> Iterator[list]:
    yield [node]
    if len(node) == lattice.num_steps:
        return
    children = [node + (i,) for i in range(lattice.shape[len(node)])]
    for combo in itertools.product(*(list(_antichains(lattice, c)) for c in children)):
        yield [n for part in combo for n in part]


def count_stopping_rules(lattice: Lattice) -> int:
    count = 1
    for b in reversed(lattice.shape):
        count = 1 + count**b
    return count


def random_stopping_rule(lattice: Lattice, rng: np.random.Generator, p_stop: float = 0.4) -> StoppingRule:
    boundary = []

    def grow(node):
        if len(node) == lattice.num_steps or rng.random() < p_stop:
            boundary.append(node)
            return
        for i in range(lattice.shape[len(node)]):
            grow(node + (i,))

    grow(())
    return StoppingRule(lattice, frozenset(boundary))


def stopping_rules_for_check(lattice: Lattice, max_rules: int = 100, seed: int = 0) -> list:
    """All rules when there are at most ``max_rules`` of them, else a seeded sample."""
    K, shape = lattice.num_steps, lattice.shape
    small = K <= 3 and max(shape, default=1) <= 2
    if small or count_stopping_rules(lattice) <= max_rules:
        return list(all_stopping_rules(lattice))
    rng = np.random.default_rng(seed)
    seen, rules = set(), []
    for _ in range(50 * max_rules):
        rule = random_stopping_rule(lattice, rng)
        if rule.boundary not in seen:
            seen.add(rule.boundary)
            rules.append(rule)
        if len(rules) == max_rules:
            break
    return rules


def random_rule_pair(lattice: Lattice, rng: np.random.Generator) -> tuple:
    """A random pair sigma <= tau: tau refines sigma below some boundary nodes."""
    sigma = random_stopping_rule(lattice, rng)
    boundary = []
    for node in sigma.sorted_boundary():
        sub = lattice.sub(len(node))
        theta = random_stopping_rule(sub, rng) if sub.num_steps else StoppingRule(sub, frozenset({()}))
        boundary.extend(node + m for m in theta.boundary)
    return sigma, StoppingRule(lattice, frozenset(boundary))

