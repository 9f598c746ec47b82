import numpy as np
import pytest

from irisbind.errors import GeometryError, ParameterError
from irisbind.geometry import Circle
from irisbind.normalization import polar_shift, unwrap
from irisbind.segmentation import SegmentationResult, annulus_mask
from irisbind.synth import (EYELID_LUMA, PUPIL_LUMA, SCLERA_LUMA, EyeSpec, random_eye_spec, render,
                            rerender_variant, variant_spec)

SIZE = 160


def truth(spec, shape=(SIZE, SIZE)):
    """Segmentation built from the generator's own geometry."""
    mask = annulus_mask(shape, spec.pupil, spec.iris)
    for lid in spec.eyelids():
        if lid is not None:
            ys, xs = np.indices(shape, dtype=np.float64)
            mask &= ~lid.occludes(xs, ys)
    return SegmentationResult(spec.pupil, spec.iris, *spec.eyelids(), noise_mask=mask)


def annulus_values(img, spec):
    return img[annulus_mask(img.shape, spec.pupil, spec.iris)]


def test_render_deterministic():
    spec = random_eye_spec(3)
    assert np.array_equal(render(spec, SIZE, SIZE), render(spec, SIZE, SIZE))


def test_render_luminance_levels():
    spec = random_eye_spec(4)
    img = render(spec, SIZE, SIZE)
    p = spec.pupil
    assert img[int(round(p.cy)), int(round(p.cx))] == pytest.approx(PUPIL_LUMA)
    assert img[2, 2] == pytest.approx(SCLERA_LUMA)
    ring = annulus_values(img, spec)
    assert 0.35 < ring.mean() < 0.55 and ring.std() > 0.03


def test_different_seeds_are_uncorrelated():
    # same geometry, different textures, so the same pixels are compared
    base = random_eye_spec(10)
    a = render(base, SIZE, SIZE)
    worst = 0.0
    for seed in range(11, 21):
        other = EyeSpec(base.pupil, base.iris, seed)
        b = render(other, SIZE, SIZE)
        r = np.corrcoef(annulus_values(a, base), annulus_values(b, base))[0, 1]
        worst = max(worst, abs(r))
    assert worst < 0.2


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_eyelid_coverage_fraction(seed):
    spec = random_eye_spec(seed, eyelid_coverage=0.3)
    img = render(spec, SIZE, SIZE)
    ring = annulus_mask(img.shape, spec.pupil, spec.iris)
    ys, xs = np.indices(img.shape, dtype=np.float64)
    covered = np.zeros(img.shape, dtype=bool)
    clear = np.ones(img.shape, dtype=bool)
    for lid in spec.eyelids():
        covered |= lid.occludes(xs, ys)
        clear &= np.abs(lid.residual(xs, ys)) > 2
    assert abs(covered[ring].mean() - 0.3) <= 0.05
    # the rendered lid colour sits where the arcs say
    assert np.allclose(img[covered & ring & clear], EYELID_LUMA)


def test_no_coverage_no_lids():
    assert random_eye_spec(5).eyelids() == (None, None)


def test_variant_identity():
    spec = random_eye_spec(6, eyelid_coverage=0.2)
    assert np.array_equal(rerender_variant(spec, SIZE, SIZE, 0.0, 1.0, noise_sigma=0.0),
                          render(spec, SIZE, SIZE))


def test_variant_noise_seed_zero_matches_render():
    spec = random_eye_spec(7, noise_sigma=0.03)
    assert np.array_equal(rerender_variant(spec, SIZE, SIZE, noise_seed=0), render(spec, SIZE, SIZE))
    assert not np.array_equal(rerender_variant(spec, SIZE, SIZE, noise_seed=1),
                              render(spec, SIZE, SIZE))


def test_noise_is_clamped():
    img = render(random_eye_spec(8, noise_sigma=0.2), SIZE, SIZE)
    assert img.min() >= 0.0 and img.max() <= 1.0


@pytest.mark.parametrize("seed", [11, 12, 13])
def test_rotation_is_column_shift(seed):
    spec = random_eye_spec(seed)
    moved = variant_spec(spec, 10.0)
    a = unwrap(render(spec, SIZE, SIZE), truth(spec))
    b = unwrap(rerender_variant(spec, SIZE, SIZE, 10.0), truth(moved))
    expected = round(10.0 / 360.0 * 240)
    assert abs(polar_shift(a, b).d2 - expected) <= 1
    shifted = a.shifted(expected)
    both = shifted.mask & b.mask
    assert np.mean(np.abs(shifted.samples - b.samples)[both]) < 0.05


@pytest.mark.parametrize("seed", [14, 15])
def test_dilation_preserves_unwrapped_grid(seed):
    spec = random_eye_spec(seed)
    moved = variant_spec(spec, 0.0, 1.3)
    a = unwrap(render(spec, SIZE, SIZE), truth(spec))
    b = unwrap(rerender_variant(spec, SIZE, SIZE, 0.0, 1.3), truth(moved))
    both = a.mask & b.mask
    assert np.mean(np.abs(a.samples - b.samples)[both]) < 0.05


def test_variant_geometry():
    spec = random_eye_spec(16)
    moved = variant_spec(spec, 90.0, 1.1)
    assert moved.iris == spec.iris
    assert moved.pupil.r == pytest.approx(spec.pupil.r * 1.1)
    # pupil offset rotated a quarter turn about the iris center
    ex, ey = spec.pupil.cx - spec.iris.cx, spec.pupil.cy - spec.iris.cy
    assert moved.pupil.cx - spec.iris.cx == pytest.approx(-ey)
    assert moved.pupil.cy - spec.iris.cy == pytest.approx(ex)


def test_errors():
    spec = random_eye_spec(17)
    with pytest.raises(GeometryError):
        variant_spec(spec, 0.0, 4.0)
    with pytest.raises(ParameterError):
        variant_spec(spec, 0.0, 0.0)
    with pytest.raises(GeometryError):
        render(spec, 64, 64)
    bad = EyeSpec(Circle(80, 80, 30), Circle(80, 80, 25), 1)
    with pytest.raises(GeometryError):
        render(bad, SIZE, SIZE)
    with pytest.raises(GeometryError):
        render(EyeSpec(spec.pupil, spec.iris, 1, eyelid_coverage=0.5), SIZE, SIZE)


def test_spec_dict_round_trip():
    spec = random_eye_spec(18, eyelid_coverage=0.1, noise_sigma=0.02)
    assert EyeSpec.from_dict(spec.to_dict()) == spec


def test_random_specs_are_valid():
    for seed in range(50):
        random_eye_spec(seed, SIZE, SIZE, 0.3, 0.05).validate(SIZE, SIZE)
