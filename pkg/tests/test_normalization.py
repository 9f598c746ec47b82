import numpy as np
import pytest

from irisbind.errors import DegenerateInputError, DimensionError, ParameterError, UnwrapError
from irisbind.geometry import Circle
from irisbind.normalization import (PolarIris, cross_power_spectrum, phase_correlate, polar_shift,
                                    register_similarity, sample_grid, unwrap, warp_similarity)
from irisbind.segmentation import SegmentationResult, annulus_mask
from irisbind.synth import rerender_variant, variant_spec

from helpers import SIZE, eye_image, eye_spec, textured_field


def truth(spec, shape=(SIZE, SIZE)):
    mask = annulus_mask(shape, spec.pupil, spec.iris)
    ys, xs = np.indices(shape, dtype=np.float64)
    for lid in spec.eyelids():
        if lid is not None:
            mask &= ~lid.occludes(xs, ys)
    return SegmentationResult(spec.pupil, spec.iris, *spec.eyelids(), noise_mask=mask)


# -- cross-power spectrum --------------------------------------------------

def test_cross_power_self_is_one():
    a = textured_field(0)
    c = cross_power_spectrum(a, a)
    assert np.max(np.abs(c - 1.0)) < 1e-6


def test_cross_power_shift_phase_ramp():
    a = textured_field(1)
    b = np.roll(a, (3, 5), axis=(0, 1))
    c = cross_power_spectrum(a, b)
    h, w = a.shape
    f1 = np.arange(h)[:, None]
    f2 = np.arange(w)[None, :]
    ramp = np.exp(-2j * np.pi * (f1 * 3 / h + f2 * 5 / w))
    assert np.max(np.abs(np.angle(c * np.conj(ramp)))) < 1e-6
    assert np.all(np.abs(c) <= 1.0 + 1e-12)


@pytest.mark.parametrize("alpha, beta", [(0.5, 0.0), (0.5, 0.1), (2.0, 0.0), (2.0, 0.1)])
def test_cross_power_luminance_invariance(alpha, beta):
    a = textured_field(2)
    b = np.roll(textured_field(2), (2, -1), axis=(0, 1))
    ref = cross_power_spectrum(a, b)
    out = cross_power_spectrum(alpha * a + beta, b)
    non_dc = np.ones(a.shape, dtype=bool)
    non_dc[0, 0] = False
    assert np.max(np.abs(out - ref)[non_dc]) < 1e-6


def test_cross_power_zero_guard():
    c = cross_power_spectrum(np.zeros((8, 8)), np.zeros((8, 8)))
    assert np.all(np.isfinite(c)) and np.all(c == 0)


def test_cross_power_shape_mismatch():
    with pytest.raises(DimensionError):
        cross_power_spectrum(np.zeros((8, 8)), np.zeros((8, 9)))


# -- phase correlation -----------------------------------------------------

def test_phase_correlate_identity():
    a = textured_field(3)
    pc = phase_correlate(a, a)
    assert (pc.d1, pc.d2) == (0, 0) and pc.peak == pytest.approx(1.0)


def test_phase_correlate_exact_shift():
    a = textured_field(4)
    pc = phase_correlate(a, np.roll(a, (3, 5), axis=(0, 1)))
    assert (pc.d1, pc.d2) == (3, 5) and pc.peak > 0.99
    assert pc.sub_pixel == pytest.approx((3.0, 5.0), abs=1e-6)


def test_phase_correlate_noisy_shift():
    a = textured_field(5)
    b = np.roll(a, (3, 5), axis=(0, 1)) + np.random.default_rng(5).normal(0, 0.05, a.shape)
    pc = phase_correlate(a, b)
    assert (pc.d1, pc.d2) == (3, 5) and pc.peak > 0.3


def test_phase_correlate_negative_shift():
    a = textured_field(6)
    pc = phase_correlate(a, np.roll(a, (-7, 12), axis=(0, 1)))
    assert (pc.d1, pc.d2) == (-7, 12)


def test_phase_correlate_antisymmetric():
    a = textured_field(7)
    b = np.roll(a, (4, -9), axis=(0, 1)) + np.random.default_rng(7).normal(0, 0.02, a.shape)
    ab, ba = phase_correlate(a, b), phase_correlate(b, a)
    assert (ab.d1, ab.d2) == (-ba.d1, -ba.d2)


def test_phase_correlate_hundred_fields():
    rng = np.random.default_rng(8)
    for seed in range(100):
        a = textured_field(1000 + seed)
        d = tuple(int(v) for v in rng.integers(-15, 16, size=2))
        pc = phase_correlate(a, np.roll(a, d, axis=(0, 1)))
        assert (pc.d1, pc.d2) == d


def test_phase_correlate_sub_pixel():
    # a band-limited field shifted by half a sample
    a = textured_field(9)
    h, w = a.shape
    f1 = np.fft.fftfreq(h)[:, None]
    f2 = np.fft.fftfreq(w)[None, :]
    b = np.fft.ifft2(np.fft.fft2(a) * np.exp(-2j * np.pi * (f1 * 2.0 + f2 * 3.4))).real
    pc = phase_correlate(a, b)
    assert (pc.d1, pc.d2) == (2, 3)
    assert pc.sub_pixel[1] == pytest.approx(3.4, abs=0.15)


def test_phase_correlate_degenerate():
    with pytest.raises(DegenerateInputError):
        phase_correlate(np.full((16, 16), 0.3), textured_field(10, (16, 16)))
    with pytest.raises(DimensionError):
        phase_correlate(np.zeros((8, 8)), np.zeros((9, 8)))


def test_phase_correlate_window_flags():
    a = textured_field(11)
    b = np.roll(a, (0, 6), axis=(0, 1))
    for window in (True, (True, False), (False, True)):
        pc = phase_correlate(a, b, window=window)
        assert pc.d2 == 6


# -- similarity registration ------------------------------------------------

def test_register_identity():
    a = textured_field(12)
    p = register_similarity(a, a)
    assert p.s == pytest.approx(1.0) and p.phi == pytest.approx(0.0)
    assert (p.dx, p.dy) == pytest.approx((0.0, 0.0), abs=1e-6) and p.residual < 1e-12


def test_register_rotation_and_scale():
    a = textured_field(13, (80, 80))
    mask = np.ones(a.shape, dtype=bool)
    d, _ = warp_similarity(a, mask, 1.04, np.deg2rad(5.0))
    p = register_similarity(a, d)
    assert abs(np.rad2deg(p.phi) - 5.0) <= 0.5
    assert abs(p.s - 1.04) <= 0.01


def test_register_polar_rotation_is_translation():
    spec = eye_spec(21)
    a = unwrap(eye_image(21), truth(spec))
    b = unwrap(rerender_variant(spec, SIZE, SIZE, 10.0), truth(variant_spec(spec, 10.0)))
    p = register_similarity(a, b)
    assert abs(p.dx - 10.0 / 1.5) <= 1.0
    assert abs(p.dy) <= 1.0  # radial axis is tapered, so sub-sample only
    assert p.s == pytest.approx(1.0, abs=0.02)
    assert abs(np.rad2deg(p.phi)) <= 1.0


def test_polar_shift_on_rotation():
    spec = eye_spec(22)
    a = unwrap(eye_image(22), truth(spec))
    b = unwrap(rerender_variant(spec, SIZE, SIZE, 10.0), truth(variant_spec(spec, 10.0)))
    assert abs(polar_shift(a, b).d2 - 7) <= 1


def test_register_shape_mismatch():
    with pytest.raises(DimensionError):
        register_similarity(np.zeros((8, 8)), np.zeros((8, 9)))


# -- unwrap -----------------------------------------------------------------

def test_unwrap_first_ray_reads_positive_x_axis():
    n = 120
    yy, xx = np.indices((n, n), dtype=np.float64)
    img = np.clip(xx / (n - 1), 0, 1)  # luminance = x coordinate, linear
    pupil, iris = Circle(60, 60, 10), Circle(60, 60, 40)
    seg = SegmentationResult(pupil, iris, noise_mask=annulus_mask(img.shape, pupil, iris))
    polar = unwrap(img, seg, 8, 64)
    radius = 10 + (np.arange(8) + 0.5) / 8 * 30
    assert np.allclose(polar.samples[:, 0], (60 + radius) / (n - 1), atol=1e-12)
    assert polar.mask[:, 0].all()


def test_unwrap_grid_geometry_non_concentric():
    pupil, iris = Circle(62, 57, 15), Circle(60, 60, 45)
    seg = SegmentationResult(pupil, iris)
    ys, xs = sample_grid(seg, 16, 90)
    # outermost cell sits just inside the iris, innermost just outside the pupil
    d_out = np.hypot(xs[-1] - iris.cx, ys[-1] - iris.cy)
    d_in = np.hypot(xs[0] - pupil.cx, ys[0] - pupil.cy)
    assert np.all(d_out < iris.r) and np.all(d_out > iris.r - 30 / 16)
    assert np.all(d_in > pupil.r) and np.all(d_in < pupil.r + 30 / 16 + 1)


def test_unwrap_mask_traces_back_to_source():
    spec = eye_spec(23, 0.3)
    img = eye_image(23, 0.3)
    seg = truth(spec)
    polar = unwrap(img, seg)
    ys, xs = sample_grid(seg, 24, 240)
    ry, rx = np.rint(ys).astype(int), np.rint(xs).astype(int)
    src = seg.noise_mask[ry, rx]
    assert np.array_equal(polar.mask, src)
    assert 0.5 < polar.mask.mean() < 0.9


def test_unwrap_mask_zero_outside_frame():
    img = np.full((60, 60), 0.5)
    pupil, iris = Circle(10, 30, 5), Circle(14, 30, 25)  # iris leaves the frame
    seg = SegmentationResult(pupil, iris, noise_mask=np.ones((60, 60), dtype=bool))
    polar = unwrap(img, seg, 8, 64)
    ys, xs = sample_grid(seg, 8, 64)
    outside = (xs < 0) | (xs > 59) | (ys < 0) | (ys > 59)
    assert outside.any()
    assert not polar.mask[outside].any()
    assert polar.mask[~outside].mean() > 0.9


def test_unwrap_errors():
    img = np.full((60, 60), 0.5)
    seg = SegmentationResult(Circle(30, 30, 5), Circle(30, 30, 20))
    with pytest.raises(ParameterError):
        unwrap(img, seg, 4, 64)
    with pytest.raises(ParameterError):
        unwrap(img, seg, 8, 32)
    bad = SegmentationResult(Circle(30, 30, 20), Circle(30, 30, 10))
    with pytest.raises(UnwrapError):
        unwrap(img, bad, 8, 64)


def test_polar_iris_shape_check_and_shift():
    with pytest.raises(DimensionError):
        PolarIris(np.zeros((4, 8)), np.zeros((4, 9), dtype=bool))
    p = PolarIris(np.arange(16.0).reshape(2, 8), np.eye(2, 8, dtype=bool))
    s = p.shifted(3)
    assert np.array_equal(s.samples, np.roll(p.samples, 3, axis=1))
    assert np.array_equal(s.mask, np.roll(p.mask, 3, axis=1))


def test_phase_correlate_band_limit():
    a = textured_field(14)
    b = np.roll(a, (2, -5), axis=(0, 1))
    pc = phase_correlate(a, b, band_limit=0.25)
    assert (pc.d1, pc.d2) == (2, -5)
    # a quarter of the bins survive the cut, so the peak drops to about 1/4
    assert pc.peak == pytest.approx(np.mean(np.abs(np.fft.fftfreq(64)) <= 0.25) ** 2, abs=1e-9)
    with pytest.raises(ParameterError):
        phase_correlate(a, b, band_limit=0.6)
