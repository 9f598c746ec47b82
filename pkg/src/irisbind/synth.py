"""Deterministic synthetic eye images with known ground truth.

The iris texture is defined on rubber-sheet coordinates: normalized radius
``rho`` in [0, 1] from the pupil boundary to the iris boundary, measured
along rays from the pupil center, and the ray angle. Re-rendering with a
dilated pupil or a rotation therefore reproduces the same unwrapped pattern,
which is what makes the renderer usable as an intra-class oracle.

Randomness comes from NumPy's PCG64 generator seeded through
``SeedSequence``; its output stream is specified bit-for-bit and identical
across platforms.
"""
from dataclasses import dataclass, replace

import numpy as np

from .errors import GeometryError, ParameterError
from .geometry import Circle, Parabola, ray_circle_distance

PUPIL_LUMA = 0.05
SCLERA_LUMA = 0.9
EYELID_LUMA = 0.7
IRIS_MEAN_LUMA = 0.45
TEXTURE_STD = 0.07
N_BANDS = 64
N_SECTORS = 24
SUPERSAMPLE = 3

_TEXTURE_KEY = 0x7E47
_NOISE_KEY = 0x401CE


@dataclass(frozen=True)
class EyeSpec:
    pupil: Circle
    iris: Circle
    texture_seed: int
    eyelid_coverage: float = 0.0
    noise_sigma: float = 0.0

    def validate(self, width, height):
        if not self.iris.contains(self.pupil):
            raise GeometryError("pupil must lie strictly inside the iris")
        if not 0.0 <= self.eyelid_coverage <= 0.4:
            raise GeometryError("eyelid_coverage must be in [0, 0.4]")
        if self.noise_sigma < 0:
            raise ParameterError("noise_sigma must be non-negative")
        i = self.iris
        if i.cx - i.r < 0 or i.cy - i.r < 0 or i.cx + i.r > width - 1 or i.cy + i.r > height - 1:
            raise GeometryError("iris does not fit inside the frame")

    def eyelids(self):
        """Upper and lower eyelid arcs realizing ``eyelid_coverage``.

        Each lid hides half of the requested fraction of annulus pixels.
        Returns ``(None, None)`` when the coverage is zero.
        """
        if self.eyelid_coverage <= 0:
            return None, None
        xs, ys = _annulus_pixels(self.pupil, self.iris)
        a = 0.5 / self.iris.r
        target = self.eyelid_coverage / 2.0
        h = self.iris.cx
        top, bottom = self.iris.cy - self.iris.r, self.iris.cy + self.iris.r
        k_up = _bisect(lambda k: np.mean(ys < k + a * (xs - h) ** 2) - target,
                       top - a * self.iris.r ** 2 - 1, bottom)
        k_lo = _bisect(lambda k: target - np.mean(ys > k - a * (xs - h) ** 2),
                       top, bottom + a * self.iris.r ** 2 + 1)
        return Parabola(h, k_up, a, 0.0), Parabola(h, k_lo, -a, 0.0)

    def to_dict(self):
        return {
            "pupil": self.pupil.to_dict(),
            "iris": self.iris.to_dict(),
            "texture_seed": int(self.texture_seed),
            "eyelid_coverage": float(self.eyelid_coverage),
            "noise_sigma": float(self.noise_sigma),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(Circle(**d["pupil"]), Circle(**d["iris"]), int(d["texture_seed"]),
                   float(d.get("eyelid_coverage", 0.0)), float(d.get("noise_sigma", 0.0)))


def _bisect(f, lo, hi, iters=60):
    # f increasing in k, f(lo) <= 0 <= f(hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _annulus_pixels(pupil, iris):
    x0, x1 = int(np.floor(iris.cx - iris.r)), int(np.ceil(iris.cx + iris.r))
    y0, y1 = int(np.floor(iris.cy - iris.r)), int(np.ceil(iris.cy + iris.r))
    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1].astype(np.float64)
    inside = (np.hypot(xs - iris.cx, ys - iris.cy) < iris.r) & (
        np.hypot(xs - pupil.cx, ys - pupil.cy) >= pupil.r)
    return xs[inside], ys[inside]


@dataclass(frozen=True)
class _Texture:
    freqs: np.ndarray
    radial: np.ndarray
    phases: np.ndarray
    amps: np.ndarray
    sector_offsets: np.ndarray
    scale: float

    @classmethod
    def from_seed(cls, seed):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), _TEXTURE_KEY])))
        freqs = rng.integers(6, 97, size=N_BANDS).astype(np.float64)
        radial = rng.uniform(-1.5, 1.5, size=N_BANDS)
        phases = rng.uniform(0.0, 2 * np.pi, size=N_BANDS)
        amps = rng.uniform(0.5, 1.0, size=N_BANDS)
        sector_offsets = rng.normal(0.0, 0.5, size=N_SECTORS)
        sector_offsets -= sector_offsets.mean()
        var = 0.5 * np.sum(amps ** 2) + np.mean(sector_offsets ** 2)
        return cls(freqs, radial, phases, amps, sector_offsets, TEXTURE_STD / np.sqrt(var))

    def __call__(self, rho, theta):
        acc = np.zeros(np.broadcast(rho, theta).shape)
        for f, c, p, a in zip(self.freqs, self.radial, self.phases, self.amps):
            acc += a * np.cos(f * theta + 2 * np.pi * c * rho + p)
        sector = np.floor(np.mod(theta, 2 * np.pi) / (2 * np.pi) * N_SECTORS).astype(np.intp)
        acc += self.sector_offsets[np.minimum(sector, N_SECTORS - 1)]
        return IRIS_MEAN_LUMA + self.scale * acc


def _render(spec, width, height, texture_rotation, lids, noise_sigma, noise_key):
    spec.validate(width, height)
    texture = _Texture.from_seed(spec.texture_seed)
    pupil, iris = spec.pupil, spec.iris

    sub = (np.arange(SUPERSAMPLE) + 0.5) / SUPERSAMPLE - 0.5
    ys = (np.arange(height)[:, None] + sub[None, :]).ravel()
    xs = (np.arange(width)[:, None] + sub[None, :]).ravel()
    Y, X = np.meshgrid(ys, xs, indexing="ij")

    dx, dy = X - pupil.cx, Y - pupil.cy
    d_pupil = np.hypot(dx, dy)
    theta = np.arctan2(dy, dx)
    in_iris = np.hypot(X - iris.cx, Y - iris.cy) < iris.r

    out = np.full(X.shape, SCLERA_LUMA)
    ring = in_iris & (d_pupil >= pupil.r)
    t_edge = ray_circle_distance(pupil.cx, pupil.cy, theta[ring], iris)
    rho = (d_pupil[ring] - pupil.r) / (t_edge - pupil.r)
    out[ring] = np.clip(texture(rho, theta[ring] - texture_rotation), 0.0, 1.0)
    out[d_pupil < pupil.r] = PUPIL_LUMA
    for lid in lids:
        if lid is not None:
            out[lid.occludes(X, Y)] = EYELID_LUMA

    img = out.reshape(height, SUPERSAMPLE, width, SUPERSAMPLE).mean(axis=(1, 3))
    if noise_sigma > 0:
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence([int(spec.texture_seed), _NOISE_KEY, int(noise_key)])))
        img = np.clip(img + rng.normal(0.0, noise_sigma, size=img.shape), 0.0, 1.0)
    return img


def render(spec, width, height):
    """Render ``spec`` into a ``height`` x ``width`` luminance array."""
    return _render(spec, width, height, 0.0, spec.eyelids(), spec.noise_sigma, 0)


def variant_spec(spec, rotation_deg=0.0, pupil_dilation=1.0):
    """Geometry of a re-rendered variant: pupil scaled, then the eye rotated
    about the iris center."""
    if pupil_dilation <= 0:
        raise ParameterError("pupil_dilation must be positive")
    rot = np.deg2rad(rotation_deg)
    ex, ey = spec.pupil.cx - spec.iris.cx, spec.pupil.cy - spec.iris.cy
    c, s = np.cos(rot), np.sin(rot)
    pupil = Circle(spec.iris.cx + c * ex - s * ey, spec.iris.cy + s * ex + c * ey,
                   spec.pupil.r * pupil_dilation)
    if not spec.iris.contains(pupil):
        raise GeometryError("dilated pupil no longer fits inside the iris")
    return replace(spec, pupil=pupil)


def rerender_variant(spec, width, height, rotation_deg=0.0, pupil_dilation=1.0,
                     noise_sigma=None, noise_seed=1):
    """Render the same eye rotated and/or with a dilated pupil.

    Eyelids stay fixed in the frame. ``noise_seed`` selects an independent
    noise realization; seed 0 reproduces the noise of :func:`render`.
    """
    moved = variant_spec(spec, rotation_deg, pupil_dilation)
    sigma = spec.noise_sigma if noise_sigma is None else noise_sigma
    return _render(moved, width, height, np.deg2rad(rotation_deg), spec.eyelids(),
                   sigma, noise_seed)


def random_eye_spec(seed, width=160, height=160, eyelid_coverage=0.0, noise_sigma=0.0):
    """Plausible eye geometry drawn from ``seed``; the texture uses the same seed."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 0x6E0])))
    r_iris = rng.uniform(56.0, 66.0)
    margin = min(width, height) / 2.0 - r_iris - 2.0
    off = min(6.0, max(margin, 0.0))
    icx = (width - 1) / 2.0 + rng.uniform(-off, off)
    icy = (height - 1) / 2.0 + rng.uniform(-off, off)
    r_pupil = rng.uniform(18.0, 28.0)
    pcx = icx + rng.uniform(-3.0, 3.0)
    pcy = icy + rng.uniform(-3.0, 3.0)
    return EyeSpec(Circle(pcx, pcy, r_pupil), Circle(icx, icy, r_iris), int(seed),
                   eyelid_coverage, noise_sigma)
