import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hypdec.classes.base import ConjectureViolation, PreconditionError
from hypdec.incidence import (
    LineFamily,
    Shading,
    brush_family,
    bush_family,
    chord,
    full_shading,
    furstenberg_ratio,
    line_multiplicity,
    max_directions_per_ball,
    parallel_family,
    prune_multiplicity,
    pruning_mu,
    random_family,
    random_shading,
    segment_shading,
    shading_density,
    two_ends_check,
    two_ends_oracle,
    union_volume,
)


def _axis_line(delta):
    return LineFamily([[0, 0, 0]], [[0, 0, 1]], delta)


def test_line_family_validation():
    with pytest.raises(ValueError):
        _axis_line(0.0)
    with pytest.raises(ValueError):
        LineFamily([[0, 0, 0], [0.1, 0, 0]], [[0, 0, 1], [0, 0, -1]], 0.1)
    with pytest.raises(ValueError):
        LineFamily([[0, 0, 0]], [[0, 0, 0]], 0.1)
    assert len(brush_family(1 / 8, 8)) == 8


def test_chord():
    assert chord((0, 0, 0), (1, 0, 0)) == (-1.0, 1.0)
    assert chord((0, 2, 0), (1, 0, 0)) is None


def test_full_shading_spacing():
    shading = full_shading(_axis_line(0.25))
    assert_allclose(shading.parameters[0], np.arange(-0.875, 0.9, 0.25))
    assert_allclose(shading_density(shading), [1.0])
    assert shading.total_volume() == pytest.approx(8 * math.pi * 0.25**3)


def test_shading_validation():
    family = _axis_line(0.1)
    with pytest.raises(ValueError):
        Shading(family, (np.array([2.0]),))
    with pytest.raises(ValueError):
        Shading.from_centers(family, [np.array([[0.5, 0, 0]])])
    shading = Shading.from_centers(family, [np.array([[0.05, 0, 0.3], [0, 0, -0.2]])])
    assert_allclose(shading.parameters[0], [-0.2, 0.3])


def test_two_ends_full_shading():
    family = _axis_line(1 / 16)
    shading = full_shading(family)
    result = two_ends_check(family, shading, 0.5, 0.25)
    assert result.passed
    assert result.worst[2] <= 5 / 32
    assert two_ends_oracle(family, shading, 0.5) == result.worst[2]
    with pytest.raises(ValueError):
        two_ends_check(family, shading, 0.25, 0.5)


def test_two_ends_concentrated_shading():
    family = bush_family(1 / 16, 4)
    shading = segment_shading(family, 0.0, 0.25)
    result = two_ends_check(family, shading, 0.5, 0.25)
    assert not result.passed
    assert result.worst[2] == 1.0
    with pytest.raises(PreconditionError):
        furstenberg_ratio(family, shading, 0.1)


def test_two_ends_reports_empty_lines():
    family = bush_family(1 / 8, 2)
    full = full_shading(family)
    shading = Shading(family, (full.parameters[0], np.zeros(0)))
    result = two_ends_check(family, shading, 0.5, 0.25)
    assert result.empty_lines == [1]
    assert result.density == 0.0
    assert pruning_mu(family, shading, 0.5) == math.inf


def test_furstenberg_on_a_bush():
    family = bush_family(1 / 8, 8)
    shading = full_shading(family)
    result = furstenberg_ratio(family, shading, 0.1)
    assert result.passed
    assert result.constant > 0
    assert result.union <= result.total * 8
    with pytest.raises(ConjectureViolation) as info:
        furstenberg_ratio(family, shading, 0.1, c_min=1e9, strict=True)
    assert info.value.bundle["delta"] == 1 / 8
    assert len(info.value.bundle["points"]) == 8


def test_bush_multiplicity_and_pruning():
    family = bush_family(1 / 8, 8)
    shading = full_shading(family)
    assert line_multiplicity(shading).max() == 8
    assert prune_multiplicity(family, shading, 8).removed_fraction == 0.0
    pruned = prune_multiplicity(family, shading, 1)
    assert 0 < pruned.removed_fraction < 1
    assert pruned.covered == line_multiplicity(shading).size
    with pytest.raises(ValueError):
        prune_multiplicity(family, shading, 0)


def test_union_volume_grows_with_shading():
    family = bush_family(1 / 8, 8)
    full = full_shading(family)
    half = random_shading(family, 0.5, np.random.default_rng(3))
    assert 0 < union_volume(family, half) <= union_volume(family, full)


def test_parallel_family_directions():
    family = parallel_family(1 / 32, 4)
    assert len(family) == 16
    assert max_directions_per_ball(family) == 1
    assert pruning_mu(family, full_shading(family), 0.5) > 0


def test_random_family_is_reproducible():
    a = random_family(1 / 16, 12, np.random.default_rng(5))
    b = random_family(1 / 16, 12, np.random.default_rng(5))
    assert_allclose(a.points, b.points)
    assert_allclose(a.directions, b.directions)
    assert np.all(np.linalg.norm(a.points, axis=1) <= 0.3)
