import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hyp_st
from numpy.testing import assert_allclose

from hypdec.classes.enums import DilationAxis
from hypdec.geom import (
    DyadicRect,
    PlaneRect,
    Square,
    canonical_rect_axis,
    dyadic_cover,
    hyperbolic_rescale,
    is_general_position,
    is_transverse,
    nonisotropic_dilate,
    partition,
    smooth_step,
    split_long,
    strips,
    tangent_intersection_direction,
    tangent_normal,
    tile,
)

centers = hyp_st.floats(-0.75, 0.75)
radii = hyp_st.floats(0.25, 1.0)


def _surface_points(rng, count=200):
    xi, eta = rng.uniform(-1, 1, (2, count))
    return np.column_stack([xi, eta, xi * eta])


@settings(max_examples=50, deadline=None)
@given(c1=centers, c2=centers, d=radii)
def test_rescale_preserves_surface(c1, c2, d):
    points = _surface_points(np.random.default_rng(0))
    image = hyperbolic_rescale(c1, c2, d)(points)
    assert_allclose(image[:, 2], image[:, 0] * image[:, 1], atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(c1=centers, c2=centers, d=radii)
def test_rescale_inverse_is_identity(c1, c2, d):
    m = hyperbolic_rescale(c1, c2, d)
    points = _surface_points(np.random.default_rng(1))
    assert_allclose(m.inverse()(m(points)), points, atol=1e-12)
    assert_allclose(m.compose(m.inverse()).matrix, np.eye(3), atol=1e-12)


def test_rescale_sends_square_to_domain():
    m = hyperbolic_rescale(0.5, -0.25, 0.25)
    corners = np.array([[0.25, -0.5, 0.25 * -0.5], [0.75, 0.0, 0.0]])
    assert_allclose(m(corners)[:, :2], [[-1, -1], [1, 1]])


@pytest.mark.parametrize("axis", list(DilationAxis))
def test_dilation_preserves_surface(axis, rng):
    image = nonisotropic_dilate(axis, 4.0)(_surface_points(rng))
    assert_allclose(image[:, 2], image[:, 0] * image[:, 1], atol=1e-12)


def test_dilation_rejects_small_k():
    with pytest.raises(ValueError):
        nonisotropic_dilate(DilationAxis.VERTICAL, 0.5)


def test_square_validation():
    with pytest.raises(ValueError):
        Square((0, 0), 0)
    with pytest.raises(ValueError):
        Square((1.5, 0), 2)
    sq = Square((0.25, -0.25), 0.5)
    assert sq.lo == (0.0, -0.5)
    assert sq.contains(np.array([0.0, 0.5]), np.array([-0.5, -0.25])).tolist() == [True, False]


def test_transverse():
    a, b = Square((-0.5, -0.5), 0.25), Square((0.5, 0.5), 0.25)
    assert is_transverse(a, b)
    assert not is_transverse(a, Square((-0.5, 0.5), 0.25))
    assert not is_transverse(a, b, band=(2, 4))


def test_general_position():
    assert is_general_position(Square((0, 0), 0.5), Square((0.5, 0.5), 0.5))
    assert not is_general_position(Square((0, 0), 0.5), Square((0, 0.5), 0.5))
    assert is_general_position(PlaneRect((0, 0), (0.1, 0.5), (1, -1)))
    with pytest.raises(ValueError):
        is_general_position(Square((0, 0), 0.5))


@pytest.mark.parametrize("delta", [0.5, 0.3, 0.125])
def test_tile_is_exact(delta):
    tau = Square((0.25, 0.0), 1.0)
    tiles = tile(tau, delta)
    count = math.ceil(1.0 / delta - 1e-12)
    assert len(tiles) == count**2
    assert all(t.side <= delta + 1e-12 for t in tiles)
    assert math.fsum(t.area for t in tiles) == pytest.approx(tau.area)


def test_partition_count():
    assert len(partition(Square((0, 0), 1.0), 0.25)) == 16
    with pytest.raises(ValueError):
        partition(Square((0, 0), 0.5), 1.0)


def test_tile_bumps_sum_to_one():
    xi, eta = np.meshgrid(np.linspace(-1, 1, 41), np.linspace(-1, 1, 41))
    total = sum(t.bump(xi, eta) for t in tile(Square((0, 0), 2.0), 0.5))
    assert_allclose(total, 1.0, atol=1e-12)


def test_smooth_step_symmetry():
    u = np.linspace(-1, 1, 101)
    assert_allclose(smooth_step(u) + smooth_step(-u), 1.0)
    assert smooth_step(np.array(-0.5)) == 0.0


def test_strips_partition_square(rng):
    alpha = Square((0.2, -0.1), 0.5)
    rects = strips(alpha, (1.0, -1.0), 0.05)
    xi, eta = rng.uniform(alpha.lo[0], alpha.hi[0], 500), rng.uniform(alpha.lo[1], alpha.hi[1], 500)
    hits = sum(r.contains(xi, eta).astype(int) for r in rects)
    assert np.all(hits == 1)


def test_split_long():
    rect = PlaneRect((0, 0), (0.05, 0.5), (1, 0))
    pieces = split_long(rect, 4)
    assert len(pieces) == 4
    assert math.fsum(2 * max(p.half_lengths) for p in pieces) == pytest.approx(1.0)
    thin = split_long(rect, 20)
    assert thin[0].axis == pytest.approx((0.0, 1.0))


@pytest.mark.parametrize("R", [4, 16, 64])
def test_dyadic_cover(R):
    cover = dyadic_cover(R)
    shapes = round(math.log2(R)) + 1
    assert len(cover) == shapes * 4 * R
    xi, eta = np.meshgrid(np.linspace(-1, 1, 9), np.linspace(-1, 1, 9))
    hits = sum(r.contains(xi, eta).astype(int) for r in cover)
    assert np.all(hits == shapes)
    assert all(max(r.sides) <= 2 and r.sides[0] * r.sides[1] == pytest.approx(1 / R) for r in cover)


def test_dyadic_validation():
    with pytest.raises(ValueError):
        dyadic_cover(3)
    with pytest.raises(ValueError):
        DyadicRect(-1, -1, (0, 0), 8)
    with pytest.raises(ValueError):
        DyadicRect(0, 0, (2, 0))


@settings(max_examples=100, deadline=None)
@given(p=hyp_st.tuples(centers, centers), q=hyp_st.tuples(centers, centers))
def test_tangent_intersection_lies_in_both_planes(p, q):
    if p == q:
        return
    d = tangent_intersection_direction(p, q)
    assert abs(np.dot(d, tangent_normal(*p))) <= 1e-12
    assert abs(np.dot(d, tangent_normal(*q))) <= 1e-12


def test_canonical_axis_slope():
    ax, ay = canonical_rect_axis((-0.5, -0.25), (0.5, 0.25))
    assert math.hypot(ax, ay) == pytest.approx(1.0)
    assert ay / ax == pytest.approx(-0.5)
    with pytest.raises(ValueError):
        tangent_intersection_direction((0.1, 0.1), (0.1, 0.1))


def test_records_are_checked_on_construction_and_replace():
    square = Square([np.float32(0.25), 0], np.int64(1))
    assert square.center == (0.25, 0.0)
    assert type(square.side) is float
    with pytest.raises(ValueError):
        replace(square, side=-0.5)
    with pytest.raises(ValueError):
        replace(square, center=(1.9, 0.0))
