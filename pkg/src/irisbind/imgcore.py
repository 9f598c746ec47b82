"""Image primitives shared by every pipeline stage.

Images are plain 2D ``float64`` arrays with luminance in [0, 1], indexed
``[row, col]`` (``y`` down, ``x`` right). Spectra are complex arrays of the
same shape. Nothing here mutates its inputs.
"""
import logging
import re
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError, ParameterError

logger = logging.getLogger(__name__)

SOBEL_X = np.array([[1.0, 0.0, -1.0], [2.0, 0.0, -2.0], [1.0, 0.0, -1.0]])
SOBEL_Y = SOBEL_X.T.copy()

_PAD_MODES = {"reflect": "reflect", "wrap": "wrap"}


def check_gray_image(img, min_size=1, name="image"):
    """Validate ``img`` as a grayscale raster and return it as float64.

    Parameters
    ----------
    img : array_like
        2D luminance array, values in [0, 1].
    min_size : int
        Minimum allowed height and width.

    Returns
    -------
    numpy.ndarray
        A float64 copy-free view when possible.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2D, got shape {arr.shape}")
    if arr.shape[0] < min_size or arr.shape[1] < min_size:
        raise DimensionError(
            f"{name} is {arr.shape[1]}x{arr.shape[0]}, needs at least {min_size}x{min_size}"
        )
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains non-finite values")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ParameterError(f"{name} values must lie in [0, 1]")
    return arr


def _check_field(field, min_size=1, name="field"):
    arr = np.asarray(field)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2D, got shape {arr.shape}")
    if arr.shape[0] < min_size or arr.shape[1] < min_size:
        raise DimensionError(f"{name} must be at least {min_size}x{min_size}")
    return arr


def check_kernel(kernel):
    k = np.asarray(kernel)
    if k.ndim != 2:
        raise DimensionError("kernel must be 2D")
    if k.shape[0] % 2 == 0 or k.shape[1] % 2 == 0:
        raise ParameterError(f"kernel dimensions must be odd, got {k.shape}")
    return k


def fft2d(img):
    """Forward 2D DFT, unnormalized (DC bin equals the pixel sum)."""
    arr = _check_field(img, min_size=2, name="image")
    return np.fft.fft2(arr)


def ifft2d(spectrum):
    """Inverse of :func:`fft2d`, returning the real part.

    A warning is logged when the discarded imaginary part exceeds 1e-6,
    which means the spectrum was not Hermitian.
    """
    spec = _check_field(spectrum, min_size=2, name="spectrum")
    out = np.fft.ifft2(spec)
    residue = float(np.max(np.abs(out.imag))) if out.size else 0.0
    if residue > 1e-6:
        logger.warning("ifft2d: imaginary residue %.3g discarded", residue)
    return out.real.copy()


def _pad(arr, pad_y, pad_x, mode):
    if isinstance(mode, str):
        mode = (mode, mode)
    mode_y, mode_x = mode
    for m in (mode_y, mode_x):
        if m not in _PAD_MODES:
            raise ParameterError(f"unknown border mode {m!r}")
    out = np.pad(arr, ((pad_y, pad_y), (0, 0)), mode=_PAD_MODES[mode_y])
    return np.pad(out, ((0, 0), (pad_x, pad_x)), mode=_PAD_MODES[mode_x])


def convolve(img, kernel, mode="reflect"):
    """2D convolution with an odd-sized kernel; output has the input's shape.

    ``mode`` is ``"reflect"`` (mirror about the edge sample, edge not
    repeated), ``"wrap"``, or a ``(row_mode, col_mode)`` pair. Complex
    kernels are allowed.
    """
    arr = _check_field(img, name="image")
    k = check_kernel(kernel)
    kh, kw = k.shape
    if kh > arr.shape[0] or kw > arr.shape[1]:
        raise DimensionError(f"kernel {k.shape} larger than image {arr.shape}")
    py, px = kh // 2, kw // 2
    padded = _pad(arr, py, px, mode)
    h, w = arr.shape
    out = np.zeros((h, w), dtype=np.result_type(arr.dtype, k.dtype, np.float64))
    # out[y, x] = sum_ij k[i, j] * img[y + py - i, x + px - j]
    for i in range(kh):
        for j in range(kw):
            tap = k[i, j]
            if tap == 0:
                continue
            out += tap * padded[kh - 1 - i:kh - 1 - i + h, kw - 1 - j:kw - 1 - j + w]
    return out


def gaussian_kernel(sigma, size):
    """Normalized isotropic Gaussian, ``size`` x ``size`` taps."""
    if size % 2 == 0:
        raise ParameterError("gaussian kernel size must be odd")
    half = size // 2
    t = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-0.5 * (t / sigma) ** 2)
    k = np.outer(g, g)
    return k / k.sum()


def sobel_gradients(img):
    """Return ``(gx, gy)``; ``gx > 0`` where luminance rises to the right,
    ``gy > 0`` where it rises downward."""
    arr = _check_field(img, min_size=3, name="image")
    return convolve(arr, SOBEL_X), convolve(arr, SOBEL_Y)


def bilinear_sample(img, ys, xs, wrap_x=False):
    """Sample ``img`` at real-valued coordinates.

    Returns ``(values, valid)``. Points outside the raster are invalid and
    read as 0. With ``wrap_x`` the column axis is treated as periodic.
    """
    arr = np.asarray(img, dtype=np.float64)
    h, w = arr.shape
    ys = np.asarray(ys, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    if wrap_x:
        xs = np.mod(xs, w)
        valid = (ys >= -1e-9) & (ys <= h - 1 + 1e-9)
    else:
        valid = (ys >= -1e-9) & (ys <= h - 1 + 1e-9) & (xs >= -1e-9) & (xs <= w - 1 + 1e-9)
    yc = np.clip(ys, 0, h - 1)
    y0 = np.floor(yc).astype(np.intp)
    y0 = np.minimum(y0, h - 2) if h > 1 else y0
    fy = yc - y0
    y1 = np.minimum(y0 + 1, h - 1)
    if wrap_x:
        x0 = np.floor(xs).astype(np.intp) % w
        fx = xs - np.floor(xs)
        x1 = (x0 + 1) % w
    else:
        xc = np.clip(xs, 0, w - 1)
        x0 = np.floor(xc).astype(np.intp)
        x0 = np.minimum(x0, w - 2) if w > 1 else x0
        fx = xc - x0
        x1 = np.minimum(x0 + 1, w - 1)
    vals = (
        arr[y0, x0] * (1 - fy) * (1 - fx)
        + arr[y0, x1] * (1 - fy) * fx
        + arr[y1, x0] * fy * (1 - fx)
        + arr[y1, x1] * fy * fx
    )
    return np.where(valid, vals, 0.0), valid


def to_uint8(img):
    arr = np.asarray(img, dtype=np.float64)
    return np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)


def from_uint8(raw):
    return np.asarray(raw, dtype=np.float64) / 255.0


_PGM_TOKEN = re.compile(rb"(?:\s+|#[^\n]*\n)*(\S+)")


def decode_pgm(data):
    """Parse binary (P5, maxval 255) PGM bytes into a uint8 array."""
    if not data.startswith(b"P5"):
        raise FormatError("not a binary P5 PGM")
    pos = 2
    fields = []
    for _ in range(3):
        m = _PGM_TOKEN.match(data, pos)
        if m is None:
            raise FormatError("truncated PGM header")
        fields.append(int(m.group(1)))
        pos = m.end()
    width, height, maxval = fields
    if maxval != 255:
        raise FormatError(f"only 8-bit PGM supported, maxval={maxval}")
    pos += 1  # single whitespace byte after maxval
    body = data[pos:pos + width * height]
    if len(body) != width * height:
        raise FormatError("truncated PGM raster")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width).copy()


def encode_pgm(raw):
    raw = np.asarray(raw)
    if raw.dtype != np.uint8 or raw.ndim != 2:
        raise FormatError("PGM writer expects a 2D uint8 array")
    h, w = raw.shape
    return b"P5\n%d %d\n255\n" % (w, h) + raw.tobytes()


def read_pgm(path):
    return decode_pgm(Path(path).read_bytes())


def write_pgm(path, raw):
    Path(path).write_bytes(encode_pgm(raw))


def read_image(path):
    """Load a PGM (or 8-bit grayscale PNG, via Pillow) as floats in [0, 1]."""
    path = Path(path)
    data = path.read_bytes()
    if data.startswith(b"P5"):
        return from_uint8(decode_pgm(data))
    if data.startswith(b"\x89PNG"):
        from PIL import Image

        with Image.open(path) as im:
            return from_uint8(np.asarray(im.convert("L")))
    raise FormatError(f"{path}: unsupported image format")


def write_image(path, img):
    write_pgm(path, to_uint8(img))
