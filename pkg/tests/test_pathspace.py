import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathexp.pathspace import (
    AlphabetMismatch,
    InvalidStoppingRule,
    Lattice,
    RandomVariable,
    StoppingRule,
    all_stopping_rules,
    concat,
    count_stopping_rules,
    is_F_tau_measurable,
    is_stopping_rule,
    random_rule_pair,
    random_stopping_rule,
    shift_path,
    shift_rv,
    shifted_stopping_rule,
)


def test_lattice_basics(sign3):
    assert sign3.shape == (2, 2, 2)
    assert sign3.num_paths == 8
    assert len(list(sign3.paths())) == 8
    assert list(sign3.nodes(0)) == [()]
    assert len(list(sign3.all_nodes())) == 1 + 2 + 4 + 8
    assert sign3.increments((1, 0, 1)) == (1.0, -1.0, 1.0)
    np.testing.assert_allclose(sign3.values((1, 0, 1)), [0, 1, 0, 1])


def test_increment_matrix_matches_paths(sign3):
    m = sign3.increment_matrix()
    for row, path in zip(m, sign3.paths()):
        assert tuple(row) == sign3.increments(path)


def test_value_array(sign2):
    v = sign2.value_array(2)
    assert v[1, 1] == 2.0 and v[0, 1] == 0.0 and v[0, 0] == -2.0


def test_bad_nodes_rejected(sign2):
    with pytest.raises(ValueError):
        sign2.check_node((2,))
    with pytest.raises(ValueError):
        sign2.check_path((0,))


def test_random_variable_rejects_nan(sign2):
    with pytest.raises(ValueError):
        RandomVariable(sign2, np.full(sign2.shape, np.nan))


def test_random_variable_on_node(sign2):
    xi = RandomVariable.terminal_value(sign2)
    sub = xi.on((1,))
    assert sub.lattice == sign2.sub(1)
    np.testing.assert_allclose(sub.values, [0.0, 2.0])


def test_stopping_rule_validation(sign2):
    with pytest.raises(InvalidStoppingRule):
        StoppingRule(sign2, frozenset({(0,)}))  # does not cover paths through (1,)
    with pytest.raises(InvalidStoppingRule):
        StoppingRule(sign2, frozenset({(0,), (0, 1), (1,)}))  # not an antichain


def test_hitting_rule(sign3):
    tau = StoppingRule.hitting(sign3, 2.0)  # first |B_j| >= 2
    assert tau((1, 1, 0)) == 2
    assert tau((1, 0, 1)) == 3
    assert tau((0, 0, 1)) == 2


def test_galmarino_rejects_lookahead(sign2):
    # stop at 0 iff the first move is up: peeks at the future
    times = np.array([[0, 0], [2, 2]])
    res = is_stopping_rule(sign2, times)
    assert not res.ok
    assert res.witness is not None
    with pytest.raises(InvalidStoppingRule):
        StoppingRule.from_times(sign2, times)


def test_galmarino_accepts_hitting(sign3):
    tau = StoppingRule.hitting(sign3, 1.0)
    assert is_stopping_rule(sign3, tau.times).ok
    assert is_stopping_rule(sign3, tau).ok


def test_count_stopping_rules():
    # binary tree of depth K: c_0 = 1, c_{k+1} = 1 + c_k^2
    for K, expected in [(1, 2), (2, 5), (3, 26)]:
        lat = Lattice.homogeneous([-1.0, 1.0], K)
        assert count_stopping_rules(lat) == expected
        assert len(list(all_stopping_rules(lat))) == expected


def test_f_tau_measurability(sign2):
    tau = StoppingRule.constant(sign2, 1)
    first = RandomVariable.from_function(sign2, lambda p: float(p[0]))
    assert is_F_tau_measurable(first, tau)
    assert not is_F_tau_measurable(RandomVariable.terminal_value(sign2), tau)


def test_concat_rejects_foreign_values():
    lat = Lattice(((-1.0, 1.0), (-3.0, 3.0)), 1.0)
    tau = StoppingRule.constant(lat, 1)
    # a full-length omega2 starting with -1, which is not a move at step 1
    with pytest.raises(AlphabetMismatch):
        concat(lat, (0, 0), tau, (0, 0))


def test_concat_follows_second_path(sign3):
    tau = StoppingRule.constant(sign3, 1)
    assert concat(sign3, (1, 1, 1), tau, (0, 0, 1)) == (1, 0, 0)


def test_shift_rv_matches_definition(sign3):
    xi = RandomVariable.from_function(sign3, lambda p: float(p[0] + 2 * p[1] + 4 * p[2]))
    tau = StoppingRule.hitting(sign3, 1.0)
    for omega in sign3.paths():
        node = tau.node(omega)
        shifted = shift_rv(sign3, xi, tau, omega)
        sub = sign3.sub(len(node))
        for rest in sub.paths():
            assert shifted(rest) == xi(node + rest)


def test_shifted_stopping_rule(sign3):
    rng = np.random.default_rng(3)
    for _ in range(20):
        sigma, tau = random_rule_pair(sign3, rng)
        assert all(sigma(w) <= tau(w) for w in sign3.paths())
        omega = (1, 0, 1)
        sh = shifted_stopping_rule(sigma, tau, omega)
        node = sigma.node(omega)
        assert sh(omega[len(node):]) == tau(omega) - len(node)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.integers(2, 3), st.integers(0, 2**31 - 1))
def test_concat_shift_round_trip(K, b, seed):
    lat = Lattice.homogeneous(list(np.arange(b) - (b - 1) / 2), K)
    rng = np.random.default_rng(seed)
    tau = random_stopping_rule(lat, rng)
    for omega in lat.paths():
        assert concat(lat, omega, tau, shift_path(lat, omega, tau)) == omega


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_random_rules_pass_galmarino(K, seed):
    lat = Lattice.homogeneous([-1.0, 0.0, 1.0], K)
    tau = random_stopping_rule(lat, np.random.default_rng(seed))
    assert is_stopping_rule(lat, tau.times).ok
