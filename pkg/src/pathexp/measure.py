"""Tree measures on a lattice: expectations, conditioning, pasting, realized QV."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, NamedTuple

import numpy as np

from .extreal import NINF, ext_expect
from .pathspace import Lattice, NodeId, PathId, RandomVariable, StoppingRule

PROB_TOL = 1e-12


class NullPrefix(ValueError):
    """Conditioning on a node of probability zero."""


class MissingKernel(KeyError):
    pass


@dataclass(frozen=True, eq=False)
class TreeMeasure:
    """Probability measure given by one-step transition vectors at every node.

    ``transitions[k]`` has shape ``lattice.shape[:k] + (b_k,)``: indexing it
    with a node of length k gives that node's transition vector.
    """

    lattice: Lattice
    transitions: tuple

    def __post_init__(self):
        lat = self.lattice
        trans = tuple(np.array(t, dtype=float) for t in self.transitions)
        if len(trans) != lat.num_steps:
            raise ValueError("need one transition array per step")
        for k, t in enumerate(trans):
            if t.shape != lat.shape[: k + 1]:
                raise ValueError(f"transition array {k} has shape {t.shape}, expected {lat.shape[: k + 1]}")
            if np.any(t < 0) or np.any(np.abs(t.sum(axis=-1) - 1.0) > PROB_TOL):
                raise ValueError(f"transition vectors at step {k} are not probability vectors")
            t.setflags(write=False)
        object.__setattr__(self, "transitions", trans)

    @classmethod
    def from_function(cls, lattice: Lattice, fn: Callable[[NodeId], "np.ndarray"]) -> TreeMeasure:
        trans = []
        for k in range(lattice.num_steps):
            t = np.empty(lattice.shape[: k + 1])
            for node in lattice.nodes(k):
                t[node] = fn(node)
            trans.append(t)
        return cls(lattice, tuple(trans))

    @classmethod
    def uniform(cls, lattice: Lattice) -> TreeMeasure:
        return cls(lattice, tuple(
            np.full(lattice.shape[: k + 1], 1.0 / lattice.shape[k]) for k in range(lattice.num_steps)
        ))

    @classmethod
    def constant_law(cls, lattice: Lattice, law) -> TreeMeasure:
        """The same one-step law at every node (step-homogeneous lattices)."""
        law = np.asarray(law, dtype=float)
        return cls(lattice, tuple(
            np.broadcast_to(law, lattice.shape[: k + 1]) for k in range(lattice.num_steps)
        ))

    def transition(self, node: NodeId) -> np.ndarray:
        return self.transitions[len(node)][tuple(node)]

    def node_masses(self) -> list:
        """``masses[k][node]`` is the probability of reaching ``node`` (length k)."""
        masses = [np.ones(())]
        for t in self.transitions:
            masses.append(masses[-1][..., None] * t)
        return masses

    def path_probs(self) -> np.ndarray:
        return self.node_masses()[-1]

    def prob(self, node: NodeId) -> float:
        return float(self.node_masses()[len(node)][tuple(node)])

    def restrict(self, node: NodeId) -> TreeMeasure:
        """Transitions below ``node`` as a measure on the sub-lattice (no conditioning check)."""
        node = tuple(node)
        j = len(node)
        return TreeMeasure(self.lattice.sub(j), tuple(t[node] for t in self.transitions[j:]))

    def same_law(self, other: TreeMeasure, tol: float = PROB_TOL) -> bool:
        """Equality as measures: identical path probabilities up to ``tol``."""
        return self.lattice == other.lattice and bool(
            np.all(np.abs(self.path_probs() - other.path_probs()) <= tol)
        )


Kernel = Mapping  # boundary NodeId -> TreeMeasure on the remaining sub-lattice


def expectation(P: TreeMeasure, xi: RandomVariable) -> float:
    """E^P[xi] with the conventions of ``extreal``; null paths are never read."""
    if P.lattice != xi.lattice:
        raise ValueError("measure and random variable live on different lattices")
    return ext_expect(P.path_probs().ravel(), xi.values.ravel())


def backward_values(P: TreeMeasure, xi: RandomVariable) -> list:
    """E^P[xi | node] for every node, by backward induction; ``vals[k][node]``."""
    vals = [None] * (P.lattice.num_steps + 1)
    vals[-1] = xi.values
    for k in range(P.lattice.num_steps - 1, -1, -1):
        vals[k] = np.asarray(ext_expect(P.transitions[k], vals[k + 1]))
    return vals


class CondExp(NamedTuple):
    value: RandomVariable
    null_nodes: frozenset  # boundary nodes with P-probability 0 (value set to -inf)


def conditional_expectation(P: TreeMeasure, xi: RandomVariable, tau: StoppingRule) -> CondExp:
    """omega -> E^P[xi | F_tau](omega), node by node; -inf on null boundary nodes."""
    vals = backward_values(P, xi)
    masses = P.node_masses()
    out = np.empty(P.lattice.shape)
    null = []
    for node in tau.boundary:
        j = len(node)
        if masses[j][node] > 0:
            out[node] = vals[j][node]
        else:
            out[node] = NINF
            null.append(node)
    return CondExp(RandomVariable(P.lattice, out), frozenset(null))


def rcpd_shift(P: TreeMeasure, tau: StoppingRule, omega: PathId) -> TreeMeasure:
    """P^{tau,omega}: P conditioned on prefix(omega, tau(omega)), re-based at 0."""
    node = tau.node(omega)
    if P.prob(node) <= 0:
        raise NullPrefix(f"node {node} has probability zero")
    return P.restrict(node)


def paste(P: TreeMeasure, theta: StoppingRule, nu: Kernel) -> TreeMeasure:
    """P before the theta-boundary, nu(node) after it.

    Null boundary nodes may be absent from ``nu``; P's own transitions are
    kept there.
    """
    lat = P.lattice
    trans = [np.array(t) for t in P.transitions]
    masses = P.node_masses()
    for node in theta.sorted_boundary():
        j = len(node)
        Q = nu.get(node)
        if Q is None:
            if masses[j][node] > 0:
                raise MissingKernel(node)
            continue
        if Q.lattice != lat.sub(j):
            raise ValueError(f"kernel at {node} lives on the wrong sub-lattice")
        for k in range(j, lat.num_steps):
            trans[k][node] = Q.transitions[k - j]
    return TreeMeasure(lat, tuple(trans))


class MartingaleCheck(NamedTuple):
    ok: bool
    witness: NodeId | None
    drift: float


def is_martingale_measure(P: TreeMeasure, tol: float = PROB_TOL) -> MartingaleCheck:
    """Zero one-step drift at every non-terminal node of positive probability."""
    masses = P.node_masses()
    for k, t in enumerate(P.transitions):
        drift = t @ np.asarray(P.lattice.alphabet[k])
        bad = (masses[k] > 0) & (np.abs(drift) > tol)
        if np.any(bad):
            node = tuple(int(i) for i in np.argwhere(bad)[0]) if bad.ndim else ()
            return MartingaleCheck(False, node, float(drift[node]))
    return MartingaleCheck(True, None, 0.0)


class RealizedQV(NamedTuple):
    qv: np.ndarray  # qv[k-1] = sum_{j<=k} (dB_j)^2, k = 1..K
    ahat: np.ndarray  # ahat[k-1] = (dB_k)^2 / dt, k = 1..K


def realized_qv(lattice: Lattice, omega: PathId) -> RealizedQV:
    return qv_from_increments(lattice.increments(lattice.check_path(omega)), lattice.dt)


def qv_from_increments(increments, dt: float) -> RealizedQV:
    sq = np.asarray(increments, dtype=float) ** 2
    return RealizedQV(np.cumsum(sq), sq / dt)


def windowed_density(qv_series, window: int) -> np.ndarray:
    """Trailing average of the per-step rate over min(window, k) steps."""
    if window < 1:
        raise ValueError("window must be >= 1")
    ahat = np.asarray(qv_series.ahat if isinstance(qv_series, RealizedQV) else qv_series, dtype=float)
    return np.array([ahat[max(k - window, 0):k].mean() for k in range(1, len(ahat) + 1)])


def random_martingale_measure(lattice: Lattice, rng: np.random.Generator) -> TreeMeasure:
    """Random zero-drift transitions: Dirichlet mixtures of the two-point
    zero-mean laws on (negative, positive) increment pairs, plus the point
    mass at 0 when 0 is a move. Every step needs moves of both signs or 0."""
    def law(node):
        a = np.asarray(lattice.alphabet[len(node)], dtype=float)
        extremes = []
        for i in np.flatnonzero(a < 0):
            for j in np.flatnonzero(a > 0):
                e = np.zeros(len(a))
                e[i], e[j] = a[j] / (a[j] - a[i]), -a[i] / (a[j] - a[i])
                extremes.append(e)
        for z in np.flatnonzero(a == 0):
            e = np.zeros(len(a))
            e[z] = 1.0
            extremes.append(e)
        if not extremes:
            raise ValueError(f"step {len(node)} admits no zero-mean law")
        w = rng.dirichlet(np.ones(len(extremes)))
        return w @ np.array(extremes)

    return TreeMeasure.from_function(lattice, law)
