"""Rubber-sheet unwrapping and phase-correlation registration."""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateInputError, DimensionError, ParameterError, RegistrationError, UnwrapError
from .geometry import ray_circle_distance
from .imgcore import bilinear_sample, check_gray_image, fft2d
from .segmentation import annulus_mask

EPS = 1e-12


@dataclass(frozen=True)
class PolarIris:
    """Unwrapped iris: ``samples[i, j]`` is radius step ``i``, angle step ``j``.

    ``mask`` is True on cells that trace back to usable iris pixels.
    """

    samples: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        if self.samples.ndim != 2 or self.samples.shape != self.mask.shape:
            raise DimensionError("samples and mask must be 2D arrays of equal shape")

    @property
    def radial_res(self):
        return self.samples.shape[0]

    @property
    def angular_res(self):
        return self.samples.shape[1]

    def shifted(self, columns):
        """Cyclic rotation by ``columns`` angular steps."""
        return PolarIris(np.roll(self.samples, columns, axis=1), np.roll(self.mask, columns, axis=1))


@dataclass(frozen=True)
class RegistrationParams:
    dx: float
    dy: float
    s: float
    phi: float
    residual: float

    def to_dict(self):
        return {"dx": float(self.dx), "dy": float(self.dy), "s": float(self.s),
                "phi": float(self.phi), "phi_deg": float(np.rad2deg(self.phi)),
                "residual": float(self.residual)}


class PhaseCorrelation(NamedTuple):
    d1: int
    d2: int
    peak: float
    sub_pixel: tuple


def sample_grid(seg, radial_res, angular_res):
    """Image coordinates ``(ys, xs)`` of every polar cell.

    Rays start at the pupil center; along each ray the radius runs linearly
    from the pupil boundary to the iris boundary, sampled at cell centers.
    """
    if radial_res < 8 or angular_res < 64:
        raise ParameterError("need radial_res >= 8 and angular_res >= 64")
    pupil, iris = seg.pupil, seg.iris
    if not iris.contains(pupil):
        raise UnwrapError("pupil is not strictly inside the iris")
    theta = 2 * np.pi * np.arange(angular_res) / angular_res
    try:
        outer = ray_circle_distance(pupil.cx, pupil.cy, theta, iris)
    except Exception as exc:  # degenerate geometry
        raise UnwrapError(str(exc)) from exc
    frac = (np.arange(radial_res) + 0.5) / radial_res
    radius = pupil.r + frac[:, None] * (outer - pupil.r)[None, :]
    xs = pupil.cx + radius * np.cos(theta)[None, :]
    ys = pupil.cy + radius * np.sin(theta)[None, :]
    return ys, xs


def unwrap(img, seg, radial_res=24, angular_res=240):
    """Map the segmented annulus onto a ``radial_res`` x ``angular_res`` grid.

    Values are bilinearly interpolated; the mask takes the noise-mask value
    of the nearest source pixel and is 0 for samples outside the frame.
    """
    arr = check_gray_image(img)
    ys, xs = sample_grid(seg, radial_res, angular_res)
    samples, inside = bilinear_sample(arr, ys, xs)
    noise = seg.noise_mask
    if noise is None:
        noise = annulus_mask(arr.shape, seg.pupil, seg.iris)
    h, w = arr.shape
    ry = np.clip(np.rint(ys).astype(np.intp), 0, h - 1)
    rx = np.clip(np.rint(xs).astype(np.intp), 0, w - 1)
    mask = inside & noise[ry, rx]
    return PolarIris(samples, mask)


def _as_field(x):
    if isinstance(x, PolarIris):
        return x.samples, x.mask, True
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError("expected a 2D field")
    return arr, np.ones(arr.shape, dtype=bool), False


def cross_power_spectrum(a, b):
    """Magnitude-normalized cross-power spectrum ``B conj(A) / |B conj(A)|``.

    The denominator is floored at 1e-12 so empty bins come out as ~0
    instead of NaN.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    prod = fft2d(b) * np.conj(fft2d(a))
    return prod / np.maximum(np.abs(prod), EPS)


def raised_cosine_window(shape, axes=(True, True)):
    """Separable Hann taper; an axis flagged False is left untouched."""
    rows = np.hanning(shape[0]) if axes[0] else np.ones(shape[0])
    cols = np.hanning(shape[1]) if axes[1] else np.ones(shape[1])
    return np.outer(rows, cols)


def _parabolic_offset(vm, v0, vp):
    denom = vm - 2 * v0 + vp
    if denom >= 0:
        return 0.0
    return float(np.clip(0.5 * (vm - vp) / denom, -0.5, 0.5))


def phase_correlate(a, b, window=False, band_limit=None):
    """Integer shift ``(d1, d2)`` with ``b ~= roll(a, (d1, d2))``.

    Returns a :class:`PhaseCorrelation` whose ``sub_pixel`` refines each
    axis by a three-point parabola through the peak and its neighbours.
    Shifts past half the dimension are reported as negative.

    ``window`` tapers non-periodic content: True tapers both axes, a pair
    of booleans selects axes (``(True, False)`` suits polar grids, whose
    angular axis is genuinely cyclic).

    ``band_limit`` (cycles per sample, at most 0.5) zeroes the normalized
    cross-power spectrum above that frequency on either axis. Whitening
    gives resampling noise near Nyquist the same weight as texture, so
    resampled grids correlate more reliably with a cut around 0.25.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    if np.ptp(a) <= EPS or np.ptp(b) <= EPS:
        raise DegenerateInputError("phase correlation needs non-constant inputs")
    if isinstance(window, (bool, np.bool_)):
        window = (bool(window), bool(window))
    if any(window):
        w = raised_cosine_window(a.shape, window)
        a = (a - a.mean()) * w
        b = (b - b.mean()) * w
    spectrum = cross_power_spectrum(a, b)
    if band_limit is not None:
        if not 0 < band_limit <= 0.5:
            raise ParameterError("band_limit must be in (0, 0.5]")
        f1 = np.abs(np.fft.fftfreq(a.shape[0]))[:, None]
        f2 = np.abs(np.fft.fftfreq(a.shape[1]))[None, :]
        spectrum = spectrum * ((f1 <= band_limit) & (f2 <= band_limit))
    corr = np.fft.ifft2(spectrum).real
    h, w_ = corr.shape
    p1, p2 = np.unravel_index(int(np.argmax(corr)), corr.shape)
    peak = float(corr[p1, p2])
    f1 = _parabolic_offset(corr[(p1 - 1) % h, p2], peak, corr[(p1 + 1) % h, p2])
    f2 = _parabolic_offset(corr[p1, (p2 - 1) % w_], peak, corr[p1, (p2 + 1) % w_])
    d1 = int(p1 - h) if p1 > h // 2 else int(p1)
    d2 = int(p2 - w_) if p2 > w_ // 2 else int(p2)
    return PhaseCorrelation(d1, d2, peak, (d1 + f1, d2 + f2))


POLAR_BAND_LIMIT = 0.25


def polar_shift(a, b):
    """Angular column shift taking polar grid ``a`` onto ``b``.

    No window: the angular axis is cyclic, and tapering the short radial
    axis discards most of the texture.
    """
    pa = a.samples if isinstance(a, PolarIris) else a
    pb = b.samples if isinstance(b, PolarIris) else b
    if isinstance(a, PolarIris) and isinstance(b, PolarIris):
        both = a.mask & b.mask
        pa, pb = _filled(pa, both), _filled(pb, both)
    return phase_correlate(pa, pb, band_limit=POLAR_BAND_LIMIT)


def warp_similarity(values, mask, s, phi, dx=0.0, dy=0.0, cyclic=False):
    """Resample so that output ``x' = s R(phi) (x - c) + c + t``.

    ``c`` is the array center and ``t = (dx, dy)``. Returns the warped
    values and validity mask.
    """
    h, w = values.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.indices((h, w), dtype=np.float64)
    ox, oy = xx - cx - dx, yy - cy - dy
    c, sn = np.cos(phi), np.sin(phi)
    src_x = (c * ox + sn * oy) / s + cx
    src_y = (-sn * ox + c * oy) / s + cy
    out, inside = bilinear_sample(values, src_y, src_x, wrap_x=cyclic)
    m, _ = bilinear_sample(mask.astype(np.float64), src_y, src_x, wrap_x=cyclic)
    return out, inside & (m >= 0.5)


def _shift(values, mask, d1, d2, cyclic):
    out = np.roll(values, (d1, d2), axis=(0, 1))
    m = np.roll(mask, (d1, d2), axis=(0, 1))
    m = m.copy()
    # rows always wrap in a roll; invalidate wrapped content unless cyclic
    if d1 > 0:
        m[:d1] = False
    elif d1 < 0:
        m[d1:] = False
    if not cyclic:
        if d2 > 0:
            m[:, :d2] = False
        elif d2 < 0:
            m[:, d2:] = False
    return out, m


def _filled(values, mask):
    if mask.any():
        return np.where(mask, values, values[mask].mean())
    return values


def _evaluate(a, am, d, dm, s, phi, cyclic, window):
    wa, wm = warp_similarity(a, am, s, phi, cyclic=cyclic)
    if wm.sum() < 4:
        return None
    try:
        pc = phase_correlate(_filled(wa, wm), _filled(d, dm), window=window)
    except DegenerateInputError:
        return None
    sa, sm = _shift(wa, wm, pc.d1, pc.d2, cyclic)
    both = sm & dm
    if not both.any():
        return None
    residual = float(np.mean((d[both] - sa[both]) ** 2))
    dy, dx = pc.sub_pixel
    return RegistrationParams(dx, dy, s, phi, residual)


def register_similarity(moving, reference, scales=None, angles_deg=None, window=None):
    """Estimate scale, rotation and translation aligning ``moving`` onto
    ``reference`` by minimizing the mean squared difference over mutually
    valid cells.

    A coarse grid over ``scales`` x ``angles_deg`` is searched, translation
    at each node coming from phase correlation, followed by one half-step
    refinement around the best node. Polar inputs wrap in the angular axis
    and, unless ``window`` says otherwise, are tapered along the radius
    before correlation.
    """
    a, am, cyc_a = _as_field(moving)
    d, dm, cyc_d = _as_field(reference)
    if a.shape != d.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {d.shape}")
    cyclic = cyc_a and cyc_d
    if window is None:
        window = (True, False) if cyclic else False
    if scales is None:
        scales = np.round(np.arange(0.90, 1.1 + 1e-9, 0.02), 10)
    if angles_deg is None:
        angles_deg = np.arange(-15.0, 15.0 + 1e-9, 1.0)
    scales = np.asarray(scales, dtype=np.float64)
    angles_deg = np.asarray(angles_deg, dtype=np.float64)

    def key(p):
        return (p.residual, abs(p.s - 1.0), abs(p.phi))

    best = None
    for s in scales:
        for ang in angles_deg:
            p = _evaluate(a, am, d, dm, s, np.deg2rad(ang), cyclic, window)
            if p is not None and (best is None or key(p) < key(best)):
                best = p
    if best is None:
        raise RegistrationError("no candidate produced a valid overlap")

    s_step = np.diff(scales).min() / 2 if scales.size > 1 else 0.0
    a_step = np.diff(angles_deg).min() / 2 if angles_deg.size > 1 else 0.0
    s0, a0 = best.s, np.rad2deg(best.phi)
    for ds in (-s_step, 0.0, s_step):
        for da in (-a_step, 0.0, a_step):
            if ds == 0 and da == 0:
                continue
            p = _evaluate(a, am, d, dm, s0 + ds, np.deg2rad(a0 + da), cyclic, window)
            if p is not None and key(p) < key(best):
                best = p
    return best
