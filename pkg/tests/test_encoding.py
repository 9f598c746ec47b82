import numpy as np
import pytest

from irisbind.encoding import (DEFAULT_BANK, GaborParams, IrisTemplate, encode, filter_responses,
                               gabor_kernel, histogram, read_template, write_template,
                               zero_mean_kernel)
from irisbind.errors import DimensionError, FormatError, ParameterError
from irisbind.normalization import PolarIris

from helpers import eye_template, textured_field


def full_polar(samples):
    return PolarIris(samples, np.ones(samples.shape, dtype=bool))


def layout(t):
    """Code as a (Theta, R, F, 2) array."""
    r, theta, f = t.shape
    return t.code.reshape(theta, r, f, 2)


# -- kernel ----------------------------------------------------------------

def test_kernel_center_tap():
    real, imag = gabor_kernel(GaborParams(), 19)
    assert real[9, 9] == 1.0 and imag[9, 9] == 0.0


@pytest.mark.parametrize("p", [GaborParams(), GaborParams(alpha=2, beta=4, u0=0.1, v0=0.05)])
def test_kernel_parity(p):
    real, imag = gabor_kernel(p, 15)
    assert np.allclose(real, real[::-1, ::-1], atol=1e-15)
    assert np.allclose(imag, -imag[::-1, ::-1], atol=1e-15)


def test_kernel_envelope_at_alpha():
    p = GaborParams(alpha=3, beta=3, u0=0.125)
    real, imag = gabor_kernel(p, 19)
    mag = np.hypot(real, imag)
    assert mag[9, 9 + 3] / mag[9, 9] == pytest.approx(np.exp(-np.pi), rel=1e-12)
    assert np.exp(-np.pi) == pytest.approx(0.0432, abs=1e-4)


def test_kernel_matches_direct_formula():
    p = GaborParams(x0=0.5, y0=-0.25, alpha=2.5, beta=3.5, u0=0.1, v0=0.03)
    real, imag = gabor_kernel(p, 7)
    for y in range(-3, 4):
        for x in range(-3, 4):
            dx, dy = x - p.x0, y - p.y0
            g = np.exp(-np.pi * (dx ** 2 / p.alpha ** 2 + dy ** 2 / p.beta ** 2)) * np.exp(
                -2j * np.pi * (p.u0 * dx + p.v0 * dy))
            assert real[y + 3, x + 3] == pytest.approx(g.real, abs=1e-14)
            assert imag[y + 3, x + 3] == pytest.approx(g.imag, abs=1e-14)


def test_kernel_even_size():
    with pytest.raises(ParameterError):
        gabor_kernel(GaborParams(), 8)


def test_gabor_params_validation():
    with pytest.raises(ParameterError):
        GaborParams(alpha=0)
    with pytest.raises(ParameterError):
        GaborParams(u0=0, v0=0)
    assert GaborParams(u0=0.3, v0=0.4).frequency == pytest.approx(0.5)


def test_bank_kernels_have_no_dc():
    for p in DEFAULT_BANK + (GaborParams(alpha=4, beta=2, u0=0.0625),):
        k = zero_mean_kernel(p, 19)
        assert abs(k.sum()) < 1e-3
        # the odd part is untouched
        assert np.array_equal(k.imag, gabor_kernel(p, 19)[1])


# -- encode ----------------------------------------------------------------

def test_encode_matched_grating():
    r, theta = 24, 240
    j = np.arange(theta)
    grating = 0.5 + 0.3 * np.cos(2 * np.pi * 0.125 * j)
    t = encode(full_polar(np.tile(grating, (r, 1))))
    bits = layout(t)[:, :, 0, :]  # (Theta, R, 2)
    assert t.mask.all()
    # response ~ exp(-2 pi i u0 j): quadrant follows the grating phase
    assert np.all(bits[j % 8 == 0, :, 0] == 1)
    assert np.all(bits[j % 8 == 4, :, 0] == 0)
    assert np.all(bits[j % 8 == 2, :, 1] == 0)
    assert np.all(bits[j % 8 == 6, :, 1] == 1)


def test_encode_grating_phase_steps_are_gray_coded():
    r, theta = 24, 240
    j = np.arange(theta)
    grating = 0.5 + 0.3 * np.cos(2 * np.pi * 0.125 * j + 0.3)
    bits = layout(encode(full_polar(np.tile(grating, (r, 1)))))[:, 0, 0, :]
    quarter = bits[::2]  # every quarter period
    flips = np.sum(quarter[1:] != quarter[:-1], axis=1)
    assert np.all(flips == 1)


def test_encode_constant_input_is_fully_masked():
    t = encode(full_polar(np.full((24, 240), 0.4)))
    assert t.mask.sum() == 0


def test_encode_deterministic():
    polar = PolarIris(textured_field(1, (24, 240)), textured_field(2, (24, 240)) > 0.3)
    assert encode(polar) == encode(polar)


def test_encode_masks_invalid_cells():
    samples = textured_field(3, (24, 240))
    mask = np.ones(samples.shape, dtype=bool)
    mask[:, 100:140] = False
    t = encode(PolarIris(samples, mask))
    m = t.mask.reshape(240, 24, 1, 2)
    assert not m[100:140].any()
    assert m[:60].all()


@pytest.mark.parametrize("c", [1, -3, 17])
def test_encode_shift_equivariance(c):
    samples = textured_field(4, (24, 240))
    polar = full_polar(samples)
    assert encode(polar.shifted(c)) == encode(polar).shifted(c)


def test_encode_shift_equivariance_with_mask():
    polar = PolarIris(textured_field(5, (24, 240)), textured_field(6, (24, 240)) > 0.25)
    a = encode(polar.shifted(5))
    b = encode(polar).shifted(5)
    assert np.array_equal(a.mask, b.mask)
    trusted = a.mask.astype(bool)
    assert np.array_equal(a.code[trusted], b.code[trusted])


def test_encode_multi_filter_layout():
    bank = (GaborParams(), GaborParams(u0=0.0625))
    polar = full_polar(textured_field(7, (24, 240)))
    t = encode(polar, bank)
    assert t.shape == (24, 240, 2) and len(t) == 2 * 24 * 240 * 2
    resp = filter_responses(polar, bank)
    code = layout(t)
    assert np.array_equal(code[:, :, 1, 0], (resp[1].real >= 0).T)
    assert np.array_equal(code[:, :, 0, 1], (resp[0].imag >= 0).T)


def test_encode_errors():
    with pytest.raises(ParameterError):
        encode(full_polar(np.zeros((24, 240))), bank=())
    with pytest.raises(ParameterError):
        encode(np.zeros((24, 240)))


def test_bit_balance_over_synth_irises():
    ones = []
    for seed in range(50):
        t = eye_template(seed)
        ones.append(t.code[t.mask.astype(bool)].mean())
    ones = np.asarray(ones)
    assert np.all(np.abs(ones - 0.5) <= 0.05)


# -- histogram -------------------------------------------------------------

def test_histogram_examples():
    assert list(histogram([0, 1 / 3, 2 / 3, 1], 2)) == [2, 2]
    assert list(histogram(np.full(7, 0.3), 4)) == [7, 0, 0, 0]


def test_histogram_counts_sum():
    vals = np.random.default_rng(0).random(1000)
    assert histogram(vals, 13).sum() == 1000


def test_histogram_template_bits():
    t = IrisTemplate(8, 64, 1, np.tile([1, 0, 0, 0], 256), np.tile([1, 1, 0, 1], 256))
    assert list(histogram(t)) == [512, 256]


def test_histogram_balanced_code():
    t = eye_template(3)
    zeros, ones = histogram(t)
    assert abs(ones / (zeros + ones) - 0.5) <= 0.05


def test_histogram_errors():
    with pytest.raises(ParameterError):
        histogram([], 3)
    with pytest.raises(ParameterError):
        histogram([1.0], 0)


# -- template container and IRT1 -------------------------------------------

def random_template(seed, r=8, t=64, f=1):
    rng = np.random.default_rng(seed)
    n = 2 * r * t * f
    return IrisTemplate(r, t, f, rng.integers(0, 2, n), rng.random(n) < 0.8)


def test_template_validation():
    with pytest.raises(DimensionError):
        IrisTemplate(8, 64, 1, np.zeros(10), np.zeros(10))
    with pytest.raises(ParameterError):
        IrisTemplate(1, 2, 1, [0, 2, 0, 0], [1, 1, 1, 1])
    t = random_template(0)
    with pytest.raises(ValueError):
        t.code[0] = 1


def test_template_shift_moves_whole_columns():
    t = random_template(1)
    s = t.shifted(2)
    assert np.array_equal(layout(s), np.roll(layout(t), 2, axis=0))
    assert s.shifted(-2) == t


def test_irt1_round_trip(tmp_path):
    t = random_template(2, 24, 240, 1)
    data = t.to_bytes()
    assert data[:4] == b"IRT1"
    assert data[4:16] == (24).to_bytes(4, "little") + (240).to_bytes(4, "little") + (1).to_bytes(4, "little")
    assert IrisTemplate.from_bytes(data) == t
    write_template(tmp_path / "t.irt", t)
    assert read_template(tmp_path / "t.irt") == t
    assert (tmp_path / "t.irt").read_bytes() == data


def test_irt1_bits_packed_lsb_first():
    code = np.zeros(2 * 1 * 4 * 1, dtype=np.uint8)
    code[0] = 1
    code[3] = 1
    t = IrisTemplate(1, 4, 1, code, np.ones(8))
    assert t.to_bytes()[16:] == bytes([0b00001001, 0xFF])


def test_irt1_odd_bit_count_round_trip():
    t = random_template(3, 3, 5, 1)  # 30 bits, not a byte multiple
    assert IrisTemplate.from_bytes(t.to_bytes()) == t


@pytest.mark.parametrize("mutate", [lambda d: b"IRT2" + d[4:], lambda d: d[:-1], lambda d: d + b"\0",
                                    lambda d: d[:10]])
def test_irt1_rejects_malformed(mutate):
    data = random_template(4).to_bytes()
    with pytest.raises(FormatError):
        IrisTemplate.from_bytes(mutate(data))
