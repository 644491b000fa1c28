import numpy as np
import pytest

from hypdec.classes.base import PreconditionError
from hypdec.classes.enums import EnsembleKind, NarrowBroadLabel, SquareFunctionMode
from hypdec.decouple import (
    Ensemble,
    additive_quadruples,
    bilinear_l2_ratio,
    bilinear_restriction_2d,
    classify_narrow_broad,
    dirichlet_ratio,
    g_function,
    generate,
    linear_dyadic_ratio,
    refined_ratio,
    segment_density,
    square_function_ratio,
)
from hypdec.field import BallUnion, FreqDensity, extend, restrict_freq
from hypdec.geom import PlaneRect, Square, split_long, strips
from hypdec.wavepacket import PacketKernel, WavePacketDecomp

FULL = Square((0, 0), 2)


@pytest.mark.parametrize("N", range(1, 7))
def test_additive_quadruples(N):
    assert additive_quadruples(N) == (2 * N**3 + N) // 3


def test_dirichlet_ratio():
    assert additive_quadruples(0) == 0
    assert dirichlet_ratio(1, 5) == 1.0
    assert dirichlet_ratio(2, 1) == pytest.approx(additive_quadruples(2) / 4)


def test_bilinear_single_tile_is_bounded(random_density):
    tau1, tau2 = Square((-0.5, -0.5), 0.5), Square((0.5, 0.5), 0.5)
    f1 = restrict_freq(random_density, tau1)
    f2 = restrict_freq(random_density, tau2)
    report = bilinear_l2_ratio(f1, f2, tau1, tau2, 4)
    assert not report.degenerate
    assert 0 < report.ratio <= 1 + 1e-12


def test_bilinear_preconditions(random_density):
    tau1, tau2 = Square((-0.5, -0.5), 0.5), Square((0.5, 0.5), 0.5)
    with pytest.raises(PreconditionError):
        bilinear_l2_ratio(random_density, restrict_freq(random_density, tau2), tau1, tau2, 4)
    with pytest.raises(PreconditionError):
        bilinear_l2_ratio(FreqDensity.zeros(16), FreqDensity.zeros(16), tau1, Square((-0.5, 0.5), 0.5), 4)
    report = bilinear_l2_ratio(FreqDensity.zeros(16), FreqDensity.zeros(16), tau1, tau2, 4)
    assert report.degenerate and report.ratio == 0.0


def test_line_concentrated_matches_dirichlet():
    (f,) = generate(Ensemble(EnsembleKind.LINE_CONCENTRATED), 16, FULL, n=32)
    report = linear_dyadic_ratio(f, 16)
    squares = report.companion
    assert squares.parameters["lhs4"] / squares.parameters["rhs4"] == pytest.approx(dirichlet_ratio(8, 4), rel=1e-9)
    assert squares.ratio == pytest.approx(dirichlet_ratio(8, 4) ** 0.25, rel=1e-9)
    assert report.ratio > 0


def test_linear_dyadic_reports_norms():
    (f,) = generate(Ensemble(EnsembleKind.RANDOM_PHASE), 16, FULL, rng=np.random.default_rng(3), n=32)
    report = linear_dyadic_ratio(f, 16)
    assert report.lhs == pytest.approx(report.parameters["lhs4"] ** 0.25)
    assert report.rhs == pytest.approx(report.parameters["rhs4"] ** 0.25)
    assert report.ratio > 0


def test_refined_degenerate_cases():
    empty = WavePacketDecomp([], FreqDensity.zeros(8), 4)
    with pytest.raises(PreconditionError):
        refined_ratio(empty, empty, BallUnion([[0, 0, 0], [1, 0, 0]], 2.0), 4)
    report = refined_ratio(empty, empty, BallUnion(np.zeros((0, 3)), 2.0), 4)
    assert report.degenerate
    assert report.parameters["M1"] == 1


def test_bilinear_restriction_single_square():
    c1 = segment_density((0, 0), (1, 0), 1.0, 2.0, 8)
    c2 = segment_density((0, 0), (0, 1), 1.0, 2.0, 8)
    report = bilinear_restriction_2d(c1, c2)
    assert report.parameters["squares"] == 1
    assert report.ratio == pytest.approx(1.0, rel=1e-9)


def test_bilinear_restriction_rejects_parallel_normals():
    c1 = segment_density((0, -0.5), (1, 0), 1.0, 0.25, 16)
    c2 = segment_density((0, 0.5), (1, 0), 1.0, 0.25, 16)
    with pytest.raises(PreconditionError):
        bilinear_restriction_2d(c1, c2)


def test_segment_density_support(rng):
    curve = segment_density((0, 0), (1, 1), 1.0, 0.25, 16, rng)
    xi, eta = curve.density.mesh()
    support = curve.density.samples != 0
    assert support.any()
    assert np.all(np.abs(xi[support] - eta[support]) / np.sqrt(2) <= 0.25)
    assert np.allclose(np.abs(curve.density.samples[support]), 1.0)


def test_square_function_regime():
    alpha1, alpha2 = Square((-0.25, -0.25), 0.25), Square((0.25, 0.25), 0.25)
    f = FreqDensity.ones(16)
    f1, f2 = restrict_freq(f, alpha1), restrict_freq(f, alpha2)
    Q = BallUnion([0, 0, 0], 1.0)
    with pytest.raises(PreconditionError):
        square_function_ratio(f1, f2, alpha1, alpha2, Q, 4, SquareFunctionMode.CAPS, K2=2)
    result = classify_narrow_broad(f1, f2, alpha1, alpha2, Q, 4, 2, 4)
    assert result.label == NarrowBroadLabel.UNLABELED
    assert result.narrow_term is None


def test_square_function_planes():
    alpha1, alpha2 = Square((-0.25, -0.25), 0.25), Square((0.25, 0.25), 0.25)
    f = FreqDensity.ones(16)
    report = square_function_ratio(restrict_freq(f, alpha1), restrict_freq(f, alpha2), alpha1, alpha2, BallUnion([0, 0, 0], 1.0), 16, SquareFunctionMode.PLANES)
    assert report.parameters["width"] == 0.25
    assert report.lhs > 0 and report.rhs > 0


@pytest.mark.parametrize("kind", list(EnsembleKind))
def test_generate_is_deterministic_and_supported(kind):
    target = Square((0.5, 0.5), 1)
    first = generate(Ensemble(kind, seed=3, count=2), 4, target)
    second = generate(Ensemble(kind, seed=3, count=2), 4, target)
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a.samples, b.samples)
        xi, eta = a.mesh()
        assert not np.any(a.samples[~target.contains(xi, eta)])
        assert not a.is_zero()


def test_generate_sizes():
    (cap,) = generate(Ensemble(EnsembleKind.SINGLE_CAP), 4, FULL)
    assert cap.n == 8
    assert np.count_nonzero(cap.samples) == 4
    (line,) = generate(Ensemble(EnsembleKind.LINE_CONCENTRATED), 4, FULL)
    assert np.count_nonzero(line.samples) == line.n


class _CountingGenerator:
    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)
        self.sizes = []

    def random(self, size=None):
        self.sizes.append(size)
        return self.rng.random(size)


def test_random_phase_draws_only_occupied_cells():
    counter = _CountingGenerator(5)
    (f,) = generate(Ensemble(EnsembleKind.RANDOM_PHASE), 4096, Square((0.5, 0.5), 0.5), rng=counter, n=16)
    assert counter.sizes == [np.count_nonzero(f.samples)]
    np.testing.assert_allclose(np.abs(f.samples[f.samples != 0]), 1.0)

    counter = _CountingGenerator(5)
    (coarse,) = generate(Ensemble(EnsembleKind.RANDOM_PHASE), 2, FULL, rng=counter, n=16)
    (drawn,) = counter.sizes
    assert drawn < coarse.n**2
    assert np.unique(coarse.samples).size == drawn


def test_ensemble_validation():
    with pytest.raises(ValueError):
        Ensemble(EnsembleKind.BUSH, count=-1)
    with pytest.raises(ValueError):
        Ensemble(EnsembleKind.BUSH, seed=-1)


PAIR = (Square((-0.25, -0.25), 0.25), Square((0.25, 0.25), 0.25))
OMEGA = PlaneRect((0, 0), (0.1, 0.6), (1, 0))


def _spikes(points, n=16):
    """Density with unit samples at the given grid nodes."""
    f = FreqDensity.zeros(n)
    samples = np.zeros((n, n), dtype=np.complex128)
    for xi, eta in points:
        samples[np.argmin(np.abs(f.xi_axis - xi)), np.argmin(np.abs(f.eta_axis - eta))] = 1.0
    return f.with_samples(samples)


def test_g_function_vanishes_on_one_piece():
    middle = split_long(OMEGA, 3)[1]
    f = restrict_freq(FreqDensity.ones(16), middle)
    g = g_function(f, OMEGA, 3, 4)
    assert not f.is_zero()
    np.testing.assert_array_equal(g.samples, 0.0)


@pytest.mark.parametrize("K1", [3, 4, 5])
def test_g_function_sums_almost_adjacent_pairs(K1):
    f = restrict_freq(FreqDensity.ones(16), OMEGA)
    fields = [extend(restrict_freq(f, s), 4).samples for s in split_long(OMEGA, K1)]
    expected = sum(np.abs(fields[i] * fields[i + 2]) for i in range(K1 - 2))
    g = g_function(f, OMEGA, K1, 4)
    np.testing.assert_allclose(g.samples**2, expected, rtol=1e-10, atol=1e-12)
    with pytest.raises(ValueError):
        g_function(f, OMEGA, 2, 4)


def test_classify_narrow_when_each_side_is_one_spike():
    alpha1, alpha2 = PAIR
    f1 = _spikes([(-0.3125, -0.1875)])
    f2 = _spikes([(0.1875, 0.3125)])
    result = classify_narrow_broad(f1, f2, alpha1, alpha2, BallUnion([0, 0, 0], 1.0), 3, 1, 64)
    assert result.label == NarrowBroadLabel.NARROW
    assert result.broad_term == 0.0
    assert result.narrow_term > 0


def test_classify_broad_when_spikes_sit_at_both_ends():
    alpha1, alpha2 = PAIR
    f1 = _spikes([(-0.3125, -0.1875), (-0.1875, -0.3125)])
    f2 = _spikes([(0.1875, 0.3125), (0.3125, 0.1875)])
    result = classify_narrow_broad(f1, f2, alpha1, alpha2, BallUnion([0, 0, 0], 1.0), 3, 1, 64)
    assert result.label == NarrowBroadLabel.BROAD
    # |Ef| of a spike is constant, so the terms compare as 9 : 4
    assert result.broad_term / result.narrow_term == pytest.approx(9 / 4)


def test_square_function_caps_regime_is_two_sided():
    alpha1, alpha2 = PAIR
    f = FreqDensity.ones(16)
    f1, f2 = restrict_freq(f, alpha1), restrict_freq(f, alpha2)
    Q = BallUnion([0, 0, 0], 1.0)
    report = square_function_ratio(f1, f2, alpha1, alpha2, Q, 64, SquareFunctionMode.CAPS, K2=2)
    assert report.parameters["omegas"] == 4
    assert 0 < report.ratio <= 4
    assert report.reverse_ratio <= 4


def test_square_function_single_omega_is_exact():
    alpha1, alpha2 = PAIR
    f = FreqDensity.ones(16)
    f1, f2 = restrict_freq(f, alpha1), restrict_freq(f, alpha2)
    report = square_function_ratio(f1, f2, alpha1, alpha2, BallUnion([0, 0, 0], 1.0), 64, SquareFunctionMode.CAPS, K2=1)
    assert report.parameters["omegas"] == 2
    assert report.ratio == pytest.approx(1.0)
    assert report.reverse_ratio == pytest.approx(1.0)


@pytest.mark.parametrize("axis", [(1.0, 0.0), (1.0, -1.0), (2.0, 1.0)])
def test_strip_count_follows_the_side(axis):
    alpha = Square((0.2, -0.1), 0.5)
    assert len(strips(alpha, axis, 0.5)) == 1
    assert len(strips(alpha, axis, 0.125)) == 4


def test_refined_single_tube_is_bounded():
    R = 16
    kernel = PacketKernel(FreqDensity.ones(16), R)
    cell = kernel.cell_count // 2
    decomps = []
    for theta_index in ((2, 2), (5, 5)):
        packets, _ = kernel.cap_packets(theta_index, cells=[(cell, cell)])
        decomps.append(WavePacketDecomp.from_packets(packets[:1], None, R))
    report = refined_ratio(*decomps, BallUnion([0, 0, 0], 4.0), R)
    assert (report.parameters["M1"], report.parameters["M2"]) == (1, 1)
    assert 0 < report.ratio <= 10
