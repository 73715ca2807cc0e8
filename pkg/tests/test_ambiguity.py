import numpy as np
import pytest

from pathexp.ambiguity import (
    ExplicitFamily,
    RectangularFamily,
    SizeLimit,
    check_conditional_closure,
    check_invariance,
    check_pasting,
    engineered_invariance_violation,
    engineered_pasting_violation,
    enumerate_measures,
    measurability_note,
    random_rectangular_family,
)
from pathexp.measure import TreeMeasure
from pathexp.pathspace import Lattice

DOWN, UP = [1.0, 0.0], [0.0, 1.0]


def test_rectangular_counts(sign2):
    fam = RectangularFamily.constant(sign2, [DOWN, UP])
    assert fam.size(()) == 2**3
    assert fam.size((0,)) == 2
    assert fam.size((0, 1)) == 1
    ms = fam.measures(())
    assert len(ms) == 8
    assert len({b"".join(t.tobytes() for t in m.transitions) for m in ms}) == 8
    # point masses leave one depth-1 node unreached, so only 4 path laws differ
    assert len({m.path_probs().tobytes() for m in ms}) == 4


def test_rectangular_needs_nonempty_sets(sign2):
    with pytest.raises(ValueError):
        RectangularFamily.from_node_laws(sign2, lambda n: np.zeros((0, 2)))


def test_from_node_laws_mixed_counts(sign2):
    table = {(): [[0.5, 0.5]], (0,): [DOWN, UP, [0.5, 0.5]], (1,): [UP]}
    fam = RectangularFamily.from_node_laws(sign2, table)
    assert fam.size(()) == 3
    np.testing.assert_array_equal(fam.laws_at((1,)), [UP])
    assert len(fam.laws_at((0,))) == 3


def test_enumeration_order_is_mixed_radix(sign2):
    fam = RectangularFamily.constant(sign2, [DOWN, UP])
    # the root choice is the most significant digit
    first, last = fam.measure_at((), 0), fam.measure_at((), 7)
    assert first.prob((0, 0)) == 1.0
    assert last.prob((1, 1)) == 1.0
    assert fam.measure_at((), 4).transition(())[1] == 1.0


def test_size_limit(sign3):
    fam = RectangularFamily.constant(sign3, [DOWN, UP, [0.5, 0.5]])
    with pytest.raises(SizeLimit) as exc:
        fam.measures((), max_enum=100)
    assert exc.value.cardinality == 3**7


def test_enumerate_measures_at_node(sign2):
    fam = RectangularFamily.constant(sign2, [DOWN, UP])
    ms = enumerate_measures(fam, 1, (1,))
    assert len(ms) == 2 and all(m.lattice == sign2.sub(1) for m in ms)
    with pytest.raises(ValueError):
        enumerate_measures(fam, 2, (1,))


def test_contains(sign2):
    fam = RectangularFamily.constant(sign2, [DOWN, UP])
    assert fam.contains((), TreeMeasure.constant_law(sign2, UP))
    assert not fam.contains((), TreeMeasure.uniform(sign2))


def test_explicit_family_defaults(sign2):
    fam = ExplicitFamily(sign2, {(): [TreeMeasure.uniform(sign2)]})
    assert fam.size(()) == 1
    assert fam.size((0,)) == 0
    assert fam.size((0, 1)) == 1  # leaves carry the trivial measure
    assert fam.empty_nodes() == [(0,), (1,)]
    with pytest.raises(ValueError):
        ExplicitFamily(sign2, {})


def test_rectangular_families_pass_checks():
    rng = np.random.default_rng(11)
    for _ in range(5):
        fam = random_rectangular_family(rng)
        assert check_invariance(fam).passed
        rep = check_pasting(fam, max_tuples=5_000)
        assert rep.passed and rep.checked > 0
        assert check_conditional_closure(fam).passed


def test_invariance_violation_detected():
    fam = engineered_invariance_violation()
    rep = check_invariance(fam)
    assert rep.status == "FAIL"
    assert rep.witness["s"] == 0 and rep.witness["omega"]


def test_pasting_violation_detected():
    fam = engineered_pasting_violation()
    assert check_invariance(fam).passed
    rep = check_pasting(fam)
    assert rep.status == "FAIL"
    assert rep.witness["kernel"]
    assert not check_conditional_closure(fam).passed


def test_sampled_checks_are_flagged(vol_family):
    rep = check_pasting(vol_family, max_tuples=50)
    assert rep.passed and not rep.exhaustive
    again = check_pasting(vol_family, max_tuples=50)
    assert again.to_dict() == rep.to_dict()


def test_measurability_note(sign2):
    fam = ExplicitFamily(sign2, {(): [TreeMeasure.uniform(sign2)]})
    rep = measurability_note(fam)
    assert rep.passed
    assert any("empty" in n for n in rep.notes)
    assert len(measurability_note(RectangularFamily.constant(sign2, [UP])).notes) == 1
