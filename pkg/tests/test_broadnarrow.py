import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hyp_st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose

from hypdec.broadnarrow import (
    BroadCollection,
    BroadInstance,
    broad_field,
    broad_narrow_decompose,
    broad_value,
    broad_values,
    cell_squares,
    enumerate_broad,
    gmo_case,
    pigeonhole_select,
    separated_pairs,
)
from hypdec.classes.base import InvariantViolation, PreconditionError
from hypdec.classes.enums import BroadMethod, BroadNarrowTerm, GmoCase
from hypdec.field import FreqDensity, SpatialField, restrict_freq


@hyp_st.composite
def instances(draw):
    K = draw(hyp_st.sampled_from([2, 4]))
    A = draw(hyp_st.integers(1, K))
    values = draw(arrays(np.float64, (K, K), elements=hyp_st.integers(0, 9).map(float)))
    return BroadInstance(K, values, A)


@settings(max_examples=60, deadline=None)
@given(inst=instances())
def test_exact_matches_enumeration(inst):
    value, witness = broad_value(inst)
    assert value == enumerate_broad(inst.values, inst.A)
    if witness.cells:
        assert len(witness.cells) == inst.A
        assert min(inst.values[c] for c in witness.cells) == value


@settings(max_examples=60, deadline=None)
@given(inst=instances())
def test_greedy_never_exceeds_exact(inst):
    greedy, _ = broad_value(inst, BroadMethod.GREEDY)
    exact, _ = broad_value(inst, BroadMethod.EXACT)
    assert greedy <= exact


def test_from_centers():
    inst = BroadInstance.from_centers(2, {(-0.5, -0.5): 3.0, (0.5, 0.5): 2.0}, 2)
    value, witness = broad_value(inst)
    assert value == 2.0
    assert witness.cells == ((0, 0), (1, 1))
    assert witness.centers() == [(-0.5, -0.5), (0.5, 0.5)]


def test_infeasible_size_gives_zero():
    inst = BroadInstance(2, np.ones((2, 2)), 3)
    assert broad_value(inst) == (0.0, BroadCollection(2, ()))


def test_instance_validation():
    with pytest.raises(ValueError):
        BroadInstance(3, np.ones((3, 3)), 1)
    with pytest.raises(ValueError):
        BroadInstance(2, np.ones((2, 2)), 0)
    with pytest.raises(ValueError):
        BroadInstance(2, np.ones((4, 4)), 1)
    with pytest.raises(ValueError):
        BroadInstance(2, -np.ones((2, 2)), 1)
    with pytest.raises(ValueError):
        BroadCollection(4, ((0, 0), (0, 1)))


def test_separated_pairs(rng):
    values = rng.random((20, 4, 4))
    br2, bilinear = separated_pairs(values)
    assert_allclose(br2, enumerate_broad(values, 2))
    assert np.all(bilinear >= br2)
    assert_allclose(broad_values(values, 1), values.max(axis=(-2, -1)))
    assert_allclose(broad_values(values, 3), enumerate_broad(values, 3))


def test_broad_field():
    fields = {
        (0, 0): SpatialField(np.full((2, 2, 2), 3.0), 0.5),
        (1, 1): SpatialField(np.full((2, 2, 2), -2.0), 0.5),
    }
    result = broad_field(fields, 2)
    assert_allclose(result.samples, 2.0)
    with pytest.raises(ValueError):
        broad_field(fields | {(0, 1): SpatialField(np.ones((3, 3, 3)), 0.5)}, 2)


def test_cell_squares_tile_domain():
    squares = cell_squares(4)
    assert len(squares) == 16
    assert squares[5].center == (-0.25, -0.25)


def test_broad_narrow_square_term_dominates(random_density, rng):
    points = rng.uniform(-3, 3, (6, 3))
    result = broad_narrow_decompose(random_density, 2, 0.5, points)
    assert result.terms.shape == (6, 3)
    assert result.dominating == [BroadNarrowTerm.SQUARE] * 6
    assert np.all(result.constant <= 1)
    assert len(result.witnesses) == 6


def test_broad_narrow_constant_check(random_density, rng):
    with pytest.raises(InvariantViolation):
        broad_narrow_decompose(random_density, 2, 0.5, rng.uniform(-3, 3, (4, 3)), c_check=1e-9)
    with pytest.raises(ValueError):
        broad_narrow_decompose(random_density, 3, 0.5, np.zeros((1, 3)))


def test_gmo_dominant_cell():
    f = restrict_freq(FreqDensity.ones(16), cell_squares(4)[5])
    result = gmo_case(f, (0.3, -0.2, 0.1), 4)
    assert result.case == GmoCase.DOMINANT
    assert result.constant == pytest.approx(1.0)
    assert result.witness == ((1, 1),)
    assert gmo_case(FreqDensity.zeros(16), (0, 0, 0), 4).constant == 0.0


def test_pigeonhole_select():
    I = {"q1": 1.0, "q2": 1.5}
    table = {("q1", "x"): 1.0, ("q1", "y"): 0.2, ("q2", "x"): 1.2, ("q2", "y"): 0.1}
    result = pigeonhole_select(I, table, 2.0)
    assert result.lam == "x"
    assert result.level == 1.0
    assert result.selected == ["q2"]
    assert result.levels == 5


@pytest.mark.parametrize(
    ("I", "table", "C"),
    [
        ({}, {}, 1.0),
        ({"q1": 1.0, "q2": 3.0}, {("q1", "x"): 1.0, ("q2", "x"): 3.0}, 1.0),
        ({"q1": 1.0}, {("q1", "x"): 0.1}, 1.0),
    ],
)
def test_pigeonhole_preconditions(I, table, C):
    with pytest.raises(PreconditionError):
        pigeonhole_select(I, table, C)
