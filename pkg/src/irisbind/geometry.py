"""Circle and rotated-parabola models used by the renderer and the detectors."""
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, ParameterError


@dataclass(frozen=True)
class Circle:
    """Circle ``(x - cx)^2 + (y - cy)^2 = r^2`` in pixel coordinates."""

    cx: float
    cy: float
    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise ParameterError(f"circle radius must be positive, got {self.r}")

    def contains(self, other):
        """True when ``other`` lies strictly inside this circle."""
        d = np.hypot(self.cx - other.cx, self.cy - other.cy)
        return d + other.r < self.r

    def to_dict(self):
        return {"cx": float(self.cx), "cy": float(self.cy), "r": float(self.r)}


@dataclass(frozen=True)
class Parabola:
    """Rotated parabola ``v = a * u**2`` with vertex ``(h, k)``.

    ``u = (x-h) cos(theta) + (y-k) sin(theta)`` runs along the axis tilted by
    ``theta`` from the x-axis and ``v = -(x-h) sin(theta) + (y-k) cos(theta)``
    is perpendicular to it. Image ``y`` points down, so an upper eyelid has
    ``a > 0`` and a lower eyelid ``a < 0``.
    """

    h: float
    k: float
    a: float
    theta: float = 0.0

    def __post_init__(self):
        if self.a == 0:
            raise ParameterError("parabola curvature must be nonzero")

    def residual(self, x, y):
        """``v - a u^2``: negative above the arc, positive below (for a > 0)."""
        dx = np.asarray(x, dtype=np.float64) - self.h
        dy = np.asarray(y, dtype=np.float64) - self.k
        c, s = np.cos(self.theta), np.sin(self.theta)
        u = dx * c + dy * s
        v = -dx * s + dy * c
        return v - self.a * u * u

    def occludes(self, x, y):
        """Points on the open side of the arc (the eyelid side)."""
        res = self.residual(x, y)
        return res < 0 if self.a > 0 else res > 0

    def to_dict(self):
        return {"h": float(self.h), "k": float(self.k), "a": float(self.a),
                "theta": float(self.theta)}


def ray_circle_distance(ox, oy, angles, circle):
    """Distance from ``(ox, oy)`` along each ray to the boundary of ``circle``.

    The origin must lie strictly inside the circle so every ray has exactly
    one positive intersection.
    """
    angles = np.asarray(angles, dtype=np.float64)
    dx, dy = np.cos(angles), np.sin(angles)
    ex, ey = ox - circle.cx, oy - circle.cy
    b = ex * dx + ey * dy
    c = ex * ex + ey * ey - circle.r * circle.r
    if c >= 0:
        raise GeometryError("ray origin is not inside the boundary circle")
    disc = b * b - c
    return -b + np.sqrt(disc)
