"""Pupil, iris and eyelid localization.

Edges come from a Canny detector whose gradient can be biased toward one
orientation: vertically-oriented edges (strong ``gx``) carry the left and
right limbs of the pupil and iris circles, horizontally-oriented edges
(strong ``gy``) carry the eyelids. Circles are found with an integer Hough
accumulator and then refined by a least-squares fit to the supporting
edge pixels; eyelids are rotated parabolas found by voting.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import GeometryError, NoEdgesError, ParameterError, SegmentationError
from .geometry import Circle, Parabola
from .imgcore import check_gray_image, convolve, gaussian_kernel, sobel_gradients

__all__ = [
    "Circle", "Parabola", "EdgeMap", "SegmentationConfig", "SegmentationResult",
    "canny", "hough_circle", "hough_parabola", "segment", "annulus_mask",
]

BIAS_WEIGHTS = {"none": (1.0, 1.0), "vertical": (1.0, 0.0), "horizontal": (0.0, 1.0)}

# theta candidates ordered so that ties favour an unrotated arc
_THETAS = (0.0, -0.1, 0.1, -0.2, 0.2)


@dataclass(frozen=True)
class EdgeMap:
    edges: np.ndarray
    orientation: np.ndarray

    @property
    def shape(self):
        return self.edges.shape

    @property
    def count(self):
        return int(self.edges.sum())


@dataclass
class SegmentationConfig:
    canny_low: float = 0.1
    canny_high: float = 0.3
    smoothing_sigma: float = 2.0
    smoothing_size: int = 9
    pupil_radius: tuple = (15, 35)
    iris_radius: tuple = (45, 75)
    iris_center_window: int = 10
    vote_direction_tolerance: float = 45.0
    vote_ring_width: float = 2.0
    pupil_seed_threshold: float = 0.2
    pupil_seed_window: int = 15
    refine_circles: bool = True
    parabola_min_votes: int = 25
    parabola_center_support: int = 6
    parabola_candidates: int = 50
    parabola_margin: float = 3.0
    parabola_h_step: float = 2.0
    parabola_k_step: float = 2.0
    parabola_a_range: tuple = (1e-4, 1e-1)
    parabola_a_steps: int = 20
    parabola_thetas: tuple = _THETAS
    refine_parabola: bool = True
    darkness_floor: float = 0.02

    @classmethod
    def from_dict(cls, d):
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        for key in ("pupil_radius", "iris_radius", "parabola_a_range", "parabola_thetas"):
            if key in known:
                known[key] = tuple(known[key])
        return cls(**known)


@dataclass
class SegmentationResult:
    pupil: Circle
    iris: Circle
    upper_eyelid: Parabola = None
    lower_eyelid: Parabola = None
    noise_mask: np.ndarray = field(default=None, repr=False)

    def to_dict(self):
        return {
            "pupil": self.pupil.to_dict(),
            "iris": self.iris.to_dict(),
            "upper_eyelid": None if self.upper_eyelid is None else self.upper_eyelid.to_dict(),
            "lower_eyelid": None if self.lower_eyelid is None else self.lower_eyelid.to_dict(),
        }


def canny(img, low_thresh=0.1, high_thresh=0.3, orientation_bias="none",
          sigma=2.0, kernel_size=9):
    """Canny edge map with optional orientation bias.

    Thresholds are fractions of the maximum (biased) gradient magnitude.
    """
    if not 0 < low_thresh < high_thresh <= 1:
        raise ParameterError("need 0 < low_thresh < high_thresh <= 1")
    if orientation_bias not in BIAS_WEIGHTS:
        raise ParameterError(f"unknown orientation bias {orientation_bias!r}")
    arr = check_gray_image(img, min_size=5)
    if kernel_size > min(arr.shape):
        kernel_size = min(arr.shape) - (1 - min(arr.shape) % 2)
    smooth = convolve(arr, gaussian_kernel(sigma, kernel_size))
    gx, gy = sobel_gradients(smooth)
    # orientation is reported for the unbiased gradient
    orient = np.arctan2(gy, gx)
    wx, wy = BIAS_WEIGHTS[orientation_bias]
    bx, by = wx * gx, wy * gy
    mag = np.hypot(bx, by)
    peak = mag.max()
    if peak <= 1e-9:
        return EdgeMap(np.zeros(arr.shape, dtype=bool), orient)

    thin = _non_max_suppression(mag, np.arctan2(by, bx))
    strong = thin >= high_thresh * peak
    weak = thin >= low_thresh * peak
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    keep = np.zeros(n + 1, dtype=bool)
    keep[np.unique(labels[strong])] = True
    keep[0] = False
    return EdgeMap(keep[labels], orient)


def _non_max_suppression(mag, orient):
    h, w = mag.shape
    p = np.pad(mag, 1, mode="constant")
    angle = np.mod(np.rad2deg(orient), 180.0)
    sector = (np.floor((angle + 22.5) / 45.0).astype(np.intp)) % 4
    # neighbour offsets (dy, dx) along the gradient for sectors 0,45,90,135 deg
    offsets = ((0, 1), (1, 1), (1, 0), (1, -1))
    out = np.zeros_like(mag)
    centre = p[1:h + 1, 1:w + 1]
    for s, (dy, dx) in enumerate(offsets):
        fwd = p[1 + dy:h + 1 + dy, 1 + dx:w + 1 + dx]
        bwd = p[1 - dy:h + 1 - dy, 1 - dx:w + 1 - dx]
        sel = (sector == s) & (centre >= fwd) & (centre > bwd) & (centre > 0)
        out[sel] = centre[sel]
    return out


def _ring_offsets(r, width=1.0):
    span = int(np.ceil(r + width)) + 1
    dy, dx = np.mgrid[-span:span + 1, -span:span + 1]
    on = np.abs(np.hypot(dy, dx) - r) < width / 2.0
    return dy[on], dx[on]


def hough_circle(edges, r_min, r_max, center_bounds=None, dark_side_tolerance=None,
                 ring_width=1.0):
    """Best circle over integer radii ``r_min..r_max`` (inclusive).

    An edge pixel votes for center ``c`` at radius ``r`` when its distance
    to ``c`` is within ``ring_width / 2`` of ``r``; the default width of 1
    means "rounds to ``r``". Ties go to the smaller radius, then the smaller
    ``(cy, cx)``. ``center_bounds=(y0, y1, x0, x1)`` (inclusive) restricts
    the candidate centers.

    With ``dark_side_tolerance`` (degrees) set, a pixel only votes for
    centers within that angle of its descent direction, i.e. for circles
    whose interior is darker than their surround. This needs an
    :class:`EdgeMap` carrying orientations.

    Returns ``(Circle, votes)``.
    """
    if not r_min < r_max:
        raise ParameterError("need r_min < r_max")
    mask = edges.edges if isinstance(edges, EdgeMap) else np.asarray(edges, dtype=bool)
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        raise NoEdgesError("edge map is empty")
    if dark_side_tolerance is not None:
        if not isinstance(edges, EdgeMap):
            raise ParameterError("direction gating needs an EdgeMap with orientations")
        descent = edges.orientation[ys, xs] + np.pi
        dcos, dsin = np.cos(descent), np.sin(descent)
        min_cos = np.cos(np.deg2rad(dark_side_tolerance))
    h, w = mask.shape
    if center_bounds is None:
        y0, y1, x0, x1 = 0, h - 1, 0, w - 1
    else:
        y0, y1, x0, x1 = center_bounds
        y0, x0 = max(int(y0), 0), max(int(x0), 0)
        y1, x1 = min(int(y1), h - 1), min(int(x1), w - 1)
        if y1 < y0 or x1 < x0:
            raise ParameterError("center_bounds do not intersect the image")
    ch, cw = y1 - y0 + 1, x1 - x0 + 1
    radii = np.arange(int(r_min), int(r_max) + 1)
    acc = np.zeros((radii.size, ch * cw), dtype=np.int64)
    for i, r in enumerate(radii):
        oy, ox = _ring_offsets(r, ring_width)
        cy = (ys[:, None] + oy[None, :]).ravel() - y0
        cx = (xs[:, None] + ox[None, :]).ravel() - x0
        ok = (cy >= 0) & (cy < ch) & (cx >= 0) & (cx < cw)
        if dark_side_tolerance is not None:
            cos = (dcos[:, None] * ox[None, :] + dsin[:, None] * oy[None, :]) / np.hypot(oy, ox)
            ok &= cos.ravel() >= min_cos
        acc[i] = np.bincount(cy[ok] * cw + cx[ok], minlength=ch * cw)
    best = int(np.argmax(acc))
    ri, rest = divmod(best, ch * cw)
    cy, cx = divmod(rest, cw)
    return Circle(float(cx + x0), float(cy + y0), float(radii[ri])), int(acc.flat[best])


def fit_circle(xs, ys):
    """Algebraic least-squares circle through points."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    A = np.column_stack([2 * xs, 2 * ys, np.ones_like(xs)])
    b = xs * xs + ys * ys
    (a, c, d), *_ = np.linalg.lstsq(A, b, rcond=None)
    return Circle(a, c, float(np.sqrt(d + a * a + c * c)))


def _refine(circle, edges, band=2.0, max_move=3.0, max_angle=30.0):
    ys, xs = np.nonzero(edges.edges)
    d = np.hypot(xs - circle.cx, ys - circle.cy)
    # keep pixels whose gradient points radially outward (dark interior)
    radial = np.arctan2(ys - circle.cy, xs - circle.cx)
    turn = np.angle(np.exp(1j * (edges.orientation[ys, xs] - radial)))
    near = (np.abs(d - circle.r) <= band) & (np.abs(turn) <= np.deg2rad(max_angle))
    if near.sum() < 12:
        return circle
    try:
        fit = fit_circle(xs[near], ys[near])
    except (np.linalg.LinAlgError, ParameterError):
        return circle
    moved = max(abs(fit.cx - circle.cx), abs(fit.cy - circle.cy), abs(fit.r - circle.r))
    return fit if moved <= max_move else circle


def _a_grid(cfg):
    lo, hi = cfg.parabola_a_range
    return np.geomspace(lo, hi, cfg.parabola_a_steps)


def hough_parabola(edges, pupil, iris, region="upper", cfg=None):
    """Fit an eyelid arc in the iris band above or below the pupil.

    The band spans from the top (or bottom) of the pupil to the iris edge.
    Only edge pixels strictly inside the annulus (``cfg.parabola_margin``
    pixels clear of both circles) vote, so the circles themselves cannot
    masquerade as eyelids. Cells are tried in vote order; the first with at
    least ``cfg.parabola_min_votes`` votes and some support directly above
    (or below) the pupil wins. Returns ``None`` when no cell qualifies.
    """
    cfg = cfg or SegmentationConfig()
    if region not in ("upper", "lower"):
        raise ParameterError("region must be 'upper' or 'lower'")
    mask = edges.edges if isinstance(edges, EdgeMap) else np.asarray(edges, dtype=bool)
    ys, xs = np.nonzero(mask)
    ys = ys.astype(np.float64)
    xs = xs.astype(np.float64)
    m = cfg.parabola_margin
    inside = (np.hypot(xs - iris.cx, ys - iris.cy) < iris.r - m) & (
        np.hypot(xs - pupil.cx, ys - pupil.cy) > pupil.r + m)
    side = ys < pupil.cy - pupil.r if region == "upper" else ys > pupil.cy + pupil.r
    sel = inside & side
    if sel.sum() < cfg.parabola_min_votes:
        return None
    px, py = xs[sel], ys[sel]

    sign = 1.0 if region == "upper" else -1.0
    a_vals = sign * _a_grid(cfg)
    hs = np.arange(iris.cx - iris.r, iris.cx + iris.r + 1e-9, cfg.parabola_h_step)
    k_lo = iris.cy - 2 * iris.r
    kstep = cfg.parabola_k_step
    n_k = int(np.ceil(4 * iris.r / kstep)) + 1
    thetas = np.asarray(cfg.parabola_thetas, dtype=np.float64)

    votes = np.zeros((thetas.size, a_vals.size, hs.size, n_k), dtype=np.int64)
    dx = px[None, :] - hs[:, None]  # (n_h, n_pts)
    for ti, th in enumerate(thetas):
        c, s = np.cos(th), np.sin(th)
        for ai, a in enumerate(a_vals):
            A = a * s * s
            B = 2 * a * dx * c * s - c
            C = a * dx * dx * c * c + dx * s
            disc = B * B - 4 * A * C
            ok = disc >= 0
            root = np.sqrt(np.where(ok, disc, 0.0))
            denom = B + np.where(B >= 0, root, -root)
            ok &= np.abs(denom) > 1e-12
            t = -2 * C / np.where(ok, denom, 1.0)
            kb = np.rint((py[None, :] - t - k_lo) / kstep).astype(np.int64)
            ok &= (kb >= 0) & (kb < n_k)
            hi_idx = np.broadcast_to(np.arange(hs.size)[:, None], kb.shape)
            flat = hi_idx[ok] * n_k + kb[ok]
            votes[ti, ai] = np.bincount(flat, minlength=hs.size * n_k).reshape(hs.size, n_k)
    flat = votes.ravel()
    ranked = np.argsort(-flat, kind="stable")[:cfg.parabola_candidates]
    central = np.abs(px - pupil.cx) <= pupil.r
    for best in ranked:
        if flat[best] < cfg.parabola_min_votes:
            break
        ti, ai, hi, ki = np.unravel_index(best, votes.shape)
        arc = Parabola(float(hs[hi]), float(k_lo + ki * kstep), float(a_vals[ai]),
                       float(thetas[ti]))
        # an eyelid crosses the iris, so it must pass over the pupil
        near = np.abs(arc.residual(px, py)) <= kstep
        if np.count_nonzero(near & central) >= cfg.parabola_center_support:
            if cfg.refine_parabola:
                arc = _refine_parabola(arc, px, py, thetas, sign)
            return arc
    return None


def fit_parabola(xs, ys, theta):
    """Least-squares parabola with fixed axis tilt ``theta``.

    In the frame rotated by ``theta`` the model ``v = a u^2 + b u + c`` is
    linear in ``(a, b, c)``; the vertex follows by completing the square.
    Returns ``(Parabola, rms_residual)`` or None for degenerate fits.
    """
    c, s = np.cos(theta), np.sin(theta)
    u = xs * c + ys * s
    v = -xs * s + ys * c
    design = np.column_stack([u * u, u, np.ones_like(u)])
    coef, *_ = np.linalg.lstsq(design, v, rcond=None)
    a, b, c0 = coef
    if abs(a) < 1e-12:
        return None
    u0 = -b / (2 * a)
    v0 = c0 - a * u0 * u0
    arc = Parabola(u0 * c - v0 * s, u0 * s + v0 * c, a, theta)
    return arc, float(np.sqrt(np.mean(arc.residual(xs, ys) ** 2)))


def _refine_parabola(arc, px, py, thetas, sign, band=4.0, trims=2):
    """Re-fit the Hough winner on its own support for every candidate tilt
    and keep the tilt with the smallest residual. The voting grid is coarse
    in curvature, and a small tilt can stand in for a curvature error, so
    the raw winner's tilt is unreliable."""
    near = np.abs(arc.residual(px, py)) <= band
    if np.count_nonzero(near) < 6:
        return arc
    xs, ys = px[near], py[near]
    best, best_rms = arc, np.inf
    for th in thetas:
        keep = np.ones(xs.size, dtype=bool)
        fit = None
        for _ in range(trims + 1):
            out = fit_parabola(xs[keep], ys[keep], th)
            if out is None:
                break
            fit = out
            res = np.abs(fit[0].residual(xs, ys))
            keep = res <= max(1.0, 2.5 * fit[1])
            if keep.sum() < 6:
                break
        if fit is None or np.sign(fit[0].a) != sign:
            continue
        if fit[1] < best_rms - 1e-9:
            best, best_rms = fit[0], fit[1]
    return best


def _dark_blob_center(arr, cfg):
    """Centroid ``(row, col)`` of the largest dark region, or None."""
    smooth = ndimage.uniform_filter(arr, size=5, mode="reflect")
    dark = smooth < cfg.pupil_seed_threshold
    labels, n = ndimage.label(dark)
    if n == 0:
        return None
    sizes = np.bincount(labels.ravel())[1:]
    biggest = int(np.argmax(sizes)) + 1
    if sizes[biggest - 1] == dark.size:
        return None
    cy, cx = ndimage.center_of_mass(labels == biggest)
    return int(round(cy)), int(round(cx))


def annulus_mask(shape, pupil, iris):
    ys, xs = np.indices(shape, dtype=np.float64)
    return (np.hypot(xs - iris.cx, ys - iris.cy) < iris.r) & (
        np.hypot(xs - pupil.cx, ys - pupil.cy) >= pupil.r)


def segment(img, cfg=None):
    """Locate pupil, iris and eyelids and build the image-domain noise mask.

    The noise mask is 1 on usable iris pixels: inside the annulus, outside
    both eyelids and not darker than ``cfg.darkness_floor``.
    """
    cfg = cfg or SegmentationConfig()
    arr = check_gray_image(img, min_size=5)
    canny_args = dict(sigma=cfg.smoothing_sigma, kernel_size=cfg.smoothing_size)
    vert = canny(arr, cfg.canny_low, cfg.canny_high, "vertical", **canny_args)

    votes = dict(dark_side_tolerance=cfg.vote_direction_tolerance,
                 ring_width=cfg.vote_ring_width)
    seed = _dark_blob_center(arr, cfg)
    seed_bounds = None
    if seed is not None:
        sw = cfg.pupil_seed_window
        seed_bounds = (seed[0] - sw, seed[0] + sw, seed[1] - sw, seed[1] + sw)
    pupil, _ = hough_circle(vert, *cfg.pupil_radius, center_bounds=seed_bounds, **votes)
    if cfg.refine_circles:
        pupil = _refine(pupil, vert)
    win = cfg.iris_center_window
    bounds = (np.floor(pupil.cy) - win, np.ceil(pupil.cy) + win,
              np.floor(pupil.cx) - win, np.ceil(pupil.cx) + win)
    iris, _ = hough_circle(vert, *cfg.iris_radius, center_bounds=bounds, **votes)
    if cfg.refine_circles:
        iris = _refine(iris, vert)
    if not iris.contains(pupil):
        raise SegmentationError("pupil circle is not inside the iris circle", pupil, iris)

    horiz = canny(arr, cfg.canny_low, cfg.canny_high, "horizontal", **canny_args)
    upper = hough_parabola(horiz, pupil, iris, "upper", cfg)
    lower = hough_parabola(horiz, pupil, iris, "lower", cfg)

    mask = annulus_mask(arr.shape, pupil, iris) & (arr >= cfg.darkness_floor)
    ys, xs = np.indices(arr.shape, dtype=np.float64)
    for lid in (upper, lower):
        if lid is not None:
            mask &= ~lid.occludes(xs, ys)
    return SegmentationResult(pupil, iris, upper, lower, mask)


def validate_result(result, shape):
    if not result.iris.contains(result.pupil):
        raise GeometryError("pupil must lie strictly inside the iris")
    if result.noise_mask is not None and result.noise_mask.shape != tuple(shape):
        raise GeometryError("noise mask shape differs from the image")


def overlay(img, result, value=1.0, width=0.6):
    """Copy of ``img`` with the recovered circles and eyelid arcs drawn in."""
    out = check_gray_image(img).copy()
    ys, xs = np.indices(out.shape, dtype=np.float64)
    for c in (result.pupil, result.iris):
        out[np.abs(np.hypot(xs - c.cx, ys - c.cy) - c.r) < width] = value
    inside = np.hypot(xs - result.iris.cx, ys - result.iris.cy) < result.iris.r + 2
    for lid in (result.upper_eyelid, result.lower_eyelid):
        if lid is not None:
            out[inside & (np.abs(lid.residual(xs, ys)) < width)] = value
    return out
