"""Gabor phase encoding of unwrapped irises into bit templates.

Template bit order is angle-major: the bit for angular column ``j``, radial
row ``i``, filter ``f`` and phase bit ``b`` sits at
``((j * R + i) * F + f) * 2 + b``. One angular column is therefore a
contiguous block of ``2 * F * R`` bits, and rotating the eye by ``c``
columns rotates the whole code by ``2 * F * R * c`` bits.
"""
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError, ParameterError
from .imgcore import convolve
from .normalization import PolarIris

TEMPLATE_MAGIC = b"IRT1"
AMPLITUDE_FLOOR = 1e-4
DEFAULT_KERNEL_SIZE = 19


@dataclass(frozen=True)
class GaborParams:
    """2D Gabor filter: Gaussian envelope of width ``alpha`` (columns) and
    length ``beta`` (rows) modulated at ``(u0, v0)`` cycles/sample."""

    x0: float = 0.0
    y0: float = 0.0
    alpha: float = 3.0
    beta: float = 3.0
    u0: float = 0.125
    v0: float = 0.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ParameterError("alpha and beta must be positive")
        if self.u0 == 0 and self.v0 == 0:
            raise ParameterError("(u0, v0) must not both be zero")

    @property
    def frequency(self):
        return float(np.hypot(self.u0, self.v0))

    def to_dict(self):
        return {k: float(getattr(self, k)) for k in ("x0", "y0", "alpha", "beta", "u0", "v0")}


DEFAULT_BANK = (GaborParams(),)


def gabor_kernel(p, size):
    """Sample the complex Gabor function on a ``size`` x ``size`` grid.

    Returns ``(real, imag)``. Offsets are measured from the center tap, so
    with ``x0 = y0 = 0`` the center is exactly ``1 + 0i``.
    """
    size = int(size)
    if size < 1 or size % 2 == 0:
        raise ParameterError(f"Gabor kernel size must be odd and positive, got {size}")
    half = size // 2
    y, x = np.mgrid[-half:half + 1, -half:half + 1].astype(np.float64)
    dx, dy = x - p.x0, y - p.y0
    envelope = np.exp(-np.pi * (dx ** 2 / p.alpha ** 2 + dy ** 2 / p.beta ** 2))
    carrier = np.exp(-2j * np.pi * (p.u0 * dx + p.v0 * dy))
    g = envelope * carrier
    return g.real.copy(), g.imag.copy()


def zero_mean_kernel(p, size):
    """Gabor kernel with the DC leak of its even part removed.

    The raw even (cosine) part does not sum to zero at practical widths, so
    a scaled copy of the envelope is subtracted; the odd part is already
    zero-sum by symmetry. Returned as one complex array.
    """
    real, imag = gabor_kernel(p, size)
    half = int(size) // 2
    y, x = np.mgrid[-half:half + 1, -half:half + 1].astype(np.float64)
    env = np.exp(-np.pi * ((x - p.x0) ** 2 / p.alpha ** 2 + (y - p.y0) ** 2 / p.beta ** 2))
    real = real - env * (real.sum() / env.sum())
    return real + 1j * imag


@dataclass(frozen=True, eq=False)
class IrisTemplate:
    """Phase code plus trust mask, both 0/1 ``uint8`` vectors."""

    radial_res: int
    angular_res: int
    n_filters: int
    code: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        n = 2 * self.radial_res * self.angular_res * self.n_filters
        code = np.asarray(self.code).astype(np.uint8).ravel()
        mask = np.asarray(self.mask).astype(np.uint8).ravel()
        if code.size != n or mask.size != n:
            raise DimensionError(f"code/mask length must be {n}, got {code.size}/{mask.size}")
        if code.max(initial=0) > 1 or mask.max(initial=0) > 1:
            raise ParameterError("code and mask must be 0/1")
        code.flags.writeable = False
        mask.flags.writeable = False
        object.__setattr__(self, "code", code)
        object.__setattr__(self, "mask", mask)

    def __len__(self):
        return self.code.size

    def __eq__(self, other):
        if not isinstance(other, IrisTemplate):
            return NotImplemented
        return (self.shape == other.shape and np.array_equal(self.code, other.code)
                and np.array_equal(self.mask, other.mask))

    @property
    def shape(self):
        return (self.radial_res, self.angular_res, self.n_filters)

    @property
    def column_bits(self):
        return 2 * self.n_filters * self.radial_res

    def shifted(self, columns):
        """Template of the same eye rotated by ``columns`` angular steps."""
        step = int(columns) * self.column_bits
        return IrisTemplate(self.radial_res, self.angular_res, self.n_filters,
                            np.roll(self.code, step), np.roll(self.mask, step))

    def valid_fraction(self):
        return float(self.mask.mean())

    def to_bytes(self):
        head = TEMPLATE_MAGIC + struct.pack("<III", self.radial_res, self.angular_res, self.n_filters)
        return (head + np.packbits(self.code, bitorder="little").tobytes()
                + np.packbits(self.mask, bitorder="little").tobytes())

    @classmethod
    def from_bytes(cls, data):
        if len(data) < 16 or data[:4] != TEMPLATE_MAGIC:
            raise FormatError("not an IRT1 template")
        r, t, f = struct.unpack("<III", data[4:16])
        n = 2 * r * t * f
        nbytes = (n + 7) // 8
        if len(data) != 16 + 2 * nbytes:
            raise FormatError(f"IRT1 payload is {len(data) - 16} bytes, expected {2 * nbytes}")
        raw = np.frombuffer(data, dtype=np.uint8, offset=16)
        code = np.unpackbits(raw[:nbytes], count=n, bitorder="little")
        mask = np.unpackbits(raw[nbytes:], count=n, bitorder="little")
        return cls(r, t, f, code, mask)


def write_template(path, template):
    Path(path).write_bytes(template.to_bytes())


def read_template(path):
    return IrisTemplate.from_bytes(Path(path).read_bytes())


def _footprint_majority(mask, size):
    box = np.ones((size, size))
    frac = convolve(mask.astype(np.float64), box, mode=("reflect", "wrap")) / box.size
    return frac >= 0.5


def filter_responses(polar, bank=DEFAULT_BANK, kernel_size=DEFAULT_KERNEL_SIZE):
    """Complex responses, shape ``(F, R, Theta)``.

    Masked cells are replaced by the mean of the valid ones before
    filtering so occluder edges do not ring into their neighbours.
    """
    samples = np.asarray(polar.samples, dtype=np.float64)
    valid = np.asarray(polar.mask, dtype=bool)
    fill = samples[valid].mean() if valid.any() else 0.0
    data = np.where(valid, samples, fill)
    return np.stack([convolve(data, zero_mean_kernel(p, kernel_size), mode=("reflect", "wrap"))
                     for p in bank])


def encode(polar, bank=DEFAULT_BANK, kernel_size=DEFAULT_KERNEL_SIZE,
           amplitude_floor=AMPLITUDE_FLOOR):
    """Quantize Gabor phase into a template.

    Each response contributes two bits, ``real >= 0`` and ``imag >= 0``,
    which Gray-codes the phase quadrant. A bit pair is trusted only when
    its cell is valid, most of the kernel footprint is valid and the
    response magnitude reaches ``amplitude_floor``.
    """
    if not isinstance(polar, PolarIris):
        raise ParameterError("encode expects a PolarIris")
    bank = tuple(bank)
    if not bank:
        raise ParameterError("filter bank must not be empty")
    resp = filter_responses(polar, bank, kernel_size)
    n_f, r, t = resp.shape

    valid = np.asarray(polar.mask, dtype=bool)
    trusted = valid & _footprint_majority(valid, kernel_size)
    trusted = trusted[None] & (np.abs(resp) >= amplitude_floor)

    bits = np.stack([resp.real >= 0, resp.imag >= 0], axis=-1)        # (F, R, T, 2)
    code = bits.transpose(2, 1, 0, 3)                                  # (T, R, F, 2)
    mask = np.repeat(trusted[..., None], 2, axis=-1).transpose(2, 1, 0, 3)
    return IrisTemplate(r, t, n_f, code.ravel(), mask.ravel())


def histogram(values, n_bins=10):
    """Counts over ``n_bins`` equal-width bins spanning ``[min, max]``.

    An :class:`IrisTemplate` is histogrammed over its valid code bits into
    two bins, zeros then ones.
    """
    n_bins = int(n_bins)
    if n_bins < 1:
        raise ParameterError("n_bins must be >= 1")
    if isinstance(values, IrisTemplate):
        bits = values.code[values.mask.astype(bool)]
        if bits.size == 0:
            raise ParameterError("template has no valid bits")
        return np.bincount(bits, minlength=2)
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ParameterError("histogram of empty input")
    lo, hi = float(arr.min()), float(arr.max())
    if lo == hi:
        counts = np.zeros(n_bins, dtype=np.int64)
        counts[0] = arr.size
        return counts
    counts, _ = np.histogram(arr, bins=n_bins, range=(lo, hi))
    return counts
