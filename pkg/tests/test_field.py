import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hypdec.classes.base import InvariantViolation
from hypdec.classes.enums import RestrictMode, Surface
from hypdec.field import (
    BallUnion,
    ExtensionGrid,
    FreqDensity,
    SpatialField,
    WholeBox,
    bernstein_ratio,
    cap_avg_l2,
    combine,
    extend,
    extend_at,
    extend_direct,
    extend_slice,
    grid_size,
    lp_norm,
    plancherel_ratio,
    rescale_density,
    rescaled_points,
    restrict_freq,
)
from hypdec.geom import Square, tile


@pytest.mark.parametrize(("R", "fine", "expected"), [(4, False, 8), (16, False, 16), (16, True, 32), (64, False, 46)])
def test_grid_size(R, fine, expected):
    assert grid_size(R, fine) == expected


def test_resolves():
    assert FreqDensity.ones(16).resolves(16)
    assert not FreqDensity.ones(8).resolves(16)


def test_density_validation():
    with pytest.raises(ValueError):
        FreqDensity(np.zeros((4, 3)))
    with pytest.raises(ValueError):
        FreqDensity(np.full((4, 4), np.nan))
    with pytest.raises(ValueError):
        FreqDensity(np.ones((4, 4)), thickness=0.0)


def test_extend_slice_matches_direct_sum(random_density):
    x3, counts, start = 1.3, (20, 20), (0.7, -0.4)
    values = extend_slice(random_density, x3, counts, start)
    step = random_density.period / np.array(counts)
    m1, m2 = np.meshgrid(np.arange(counts[0]), np.arange(counts[1]), indexing="ij")
    points = np.stack([start[0] + m1 * step[0], start[1] + m2 * step[1], np.full(m1.shape, x3)], axis=-1)
    assert_allclose(values, extend_direct(random_density, points.reshape(-1, 3)).reshape(counts), atol=1e-10)


def test_extend_matches_direct_sum(random_density):
    F = extend(random_density, 16, ExtensionGrid(half_width=2))
    assert F.spacing <= 0.5
    assert F.samples.shape == (9, 9, 9)
    points = np.stack(F.coordinates(), axis=-1).reshape(-1, 3)
    assert_allclose(F.samples.ravel(), extend_direct(random_density, points), atol=1e-10)


def test_extend_requires_resolution():
    with pytest.raises(InvariantViolation):
        extend(FreqDensity.ones(8), 16)


def test_extend_rejects_box_beyond_period(random_density):
    with pytest.raises(InvariantViolation):
        extend(random_density, 16, ExtensionGrid(half_width=30))


def test_labelled_pieces_sum_to_whole(random_density, rng):
    tiles = tile(Square((0, 0), 2), 0.5)
    xi, eta = random_density.mesh()
    labels = np.full(xi.shape, -1)
    for k, t in enumerate(tiles):
        labels[t.contains(xi, eta)] = k
    points = rng.uniform(-5, 5, (30, 3))
    pieces = extend_at(random_density, points, labels, len(tiles))
    assert pieces.shape == (16, 30)
    assert_allclose(pieces.sum(axis=0), extend_at(random_density, points), atol=1e-10)


def test_plancherel_is_exact_on_torus(random_density):
    assert plancherel_ratio(random_density, 4) == pytest.approx(8 * math.pi**2, rel=1e-9)
    assert plancherel_ratio(FreqDensity.zeros(16), 4) == 0.0


def test_bernstein_ratio_requires_even_exponent(random_density):
    with pytest.raises(ValueError):
        bernstein_ratio(random_density, 4, p=3)


def test_lp_norm_whole_box(random_density):
    F = extend(random_density, 16, ExtensionGrid(half_width=2))
    expected = math.sqrt(np.sum(np.abs(F.samples) ** 2) * F.spacing**3)
    assert lp_norm(F, 2, WholeBox()) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(ValueError):
        lp_norm(F, 0.5, WholeBox())


def test_lp_norm_rejects_escaping_ball(random_density):
    F = extend(random_density, 16, ExtensionGrid(half_width=2))
    with pytest.raises(InvariantViolation):
        lp_norm(F, 2, BallUnion(np.zeros(3), 5.0))
    assert lp_norm(F, 2, BallUnion(np.zeros((0, 3)), 1.0)) == 0.0


def test_spatial_field_spacing():
    with pytest.raises(InvariantViolation):
        SpatialField(np.zeros((2, 2, 2)), 0.75)


def test_ball_union():
    balls = BallUnion([[0, 0, 0], [3, 0, 0]], 1.0)
    assert balls.is_disjoint()
    assert not BallUnion([[0, 0, 0], [1, 0, 0]], 1.0).is_disjoint()
    assert balls.contains(np.array([[0.5, 0, 0], [2, 0, 0]])).tolist() == [True, True]
    assert balls.contains(np.array([[1.5, 0, 0]])).tolist() == [False]
    points = balls.grid_points(0.5)
    assert np.all(balls.contains(points))
    with pytest.raises(ValueError):
        BallUnion(np.zeros(3), 0.0)


@pytest.mark.parametrize("mode", list(RestrictMode))
def test_restrictions_over_a_tiling(random_density, mode):
    pieces = [restrict_freq(random_density, t, mode) for t in tile(Square((0, 0), 2), 0.5)]
    if mode == RestrictMode.SHARP:
        assert math.fsum(p.mass() for p in pieces) == pytest.approx(random_density.mass(), rel=1e-12)
    assert_allclose(combine(pieces).samples, random_density.samples, atol=1e-12)


def test_cap_avg_l2():
    assert cap_avg_l2(FreqDensity.ones(16), Square((0, 0), 0.5)) == pytest.approx(1.0)
    assert cap_avg_l2(FreqDensity.zeros(16), Square((0, 0), 0.5)) == 0.0


def test_trim_and_embed(random_density):
    part = restrict_freq(random_density, Square((0.5, -0.5), 0.5))
    trimmed = part.trimmed()
    assert trimmed.samples.shape == (4, 4)
    assert trimmed.offset == (10, 2)
    assert_allclose(trimmed.embedded().samples, part.samples)
    assert FreqDensity.zeros(8).trimmed().samples.shape == (1, 1)


def test_combine_on_windows(random_density):
    a = restrict_freq(random_density, Square((0.5, 0.5), 1)).trimmed()
    b = restrict_freq(random_density, Square((-0.5, -0.5), 1)).trimmed()
    total = (a + b).embedded()
    expected = restrict_freq(random_density, Square((0.5, 0.5), 1)).samples + restrict_freq(random_density, Square((-0.5, -0.5), 1)).samples
    assert_allclose(total.samples, expected)
    with pytest.raises(ValueError):
        combine([FreqDensity.ones(8), FreqDensity.ones(16)])


def test_rescaled_extension_identity(random_density, rng):
    tau = Square((0.5, 0.5), 1)
    g = rescale_density(random_density, tau)
    assert g.samples.shape == (8, 8)
    points = rng.uniform(-3, 3, (12, 3))
    mapped, factor = rescaled_points(points, tau)
    lhs = extend_direct(restrict_freq(random_density, tau), points)
    assert_allclose(lhs, factor * extend_direct(g, mapped), atol=1e-10)


def test_rescale_rejects_off_grid_square(random_density):
    with pytest.raises(ValueError):
        rescale_density(random_density, Square((0.3, 0.3), 0.5))
    with pytest.raises(ValueError):
        rescale_density(FreqDensity.ones(16, Surface.ELLIPTIC), Square((0.5, 0.5), 1))
