"""Parallel-beam forward projection and an analytic ellipse sinogram oracle.

Coordinate convention: theta = 0 means rays run parallel to the y axis and
the detector coordinate u is measured along x, i.e. a sample at detector
offset u integrates the object over the line x*cos(theta) + y*sin(theta) = u.
The rotation axis passes through the slice center. Lengths are carried in
nanometres and attenuation in 1/um, so line integrals come out dimensionless
after a single nm -> um conversion inside the projector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .phantom import Slice

NM_PER_UM = 1e3


@dataclass(frozen=True)
class Geometry:
    """Parallel-beam scan description.

    Angles run from theta_min to theta_max inclusive in steps of angle_step
    (all in degrees). detector_pixel and recon_pixel are in nm; recon_pixel
    defaults to detector_pixel * detector_count / recon_size so the detector
    and reconstruction grid cover the same physical width.
    """

    theta_min: float
    theta_max: float
    angle_step: float
    detector_count: int
    detector_pixel: float
    recon_size: int
    recon_pixel: float = field(default=0.0)

    def __post_init__(self):
        if self.theta_min >= self.theta_max:
            raise ValueError("theta_min must be < theta_max")
        if self.angle_step <= 0:
            raise ValueError("angle_step must be positive")
        if self.detector_count <= 0 or self.recon_size <= 0:
            raise ValueError("detector_count and recon_size must be positive")
        if self.detector_pixel <= 0:
            raise ValueError("detector_pixel must be positive")
        if self.recon_pixel <= 0:
            object.__setattr__(
                self, "recon_pixel",
                self.detector_pixel * self.detector_count / self.recon_size)

    @property
    def angles(self) -> np.ndarray:
        """Angle list in degrees, endpoints inclusive."""
        n = int(np.floor((self.theta_max - self.theta_min) / self.angle_step + 1e-9)) + 1
        return self.theta_min + self.angle_step * np.arange(n)

    @property
    def detector_offsets(self) -> np.ndarray:
        """Signed detector sample positions u in nm, centered on the axis."""
        k = np.arange(self.detector_count, dtype=float)
        return (k - (self.detector_count - 1) / 2.0) * self.detector_pixel


@dataclass
class Sinogram:
    """Stack of log-transformed projections, one row per angle."""

    angles: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=float)
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2 or self.data.shape[0] != self.angles.size:
            raise ValueError("sinogram rows must match the angle list")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("sinogram values must be finite")

    @property
    def detector_count(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class Ellipse2D:
    """Analytic 2-D ellipse: center/semi-axes in nm, rotation in degrees."""

    center_x: float
    center_y: float
    semi_x: float
    semi_y: float
    rotation_deg: float
    intensity: float

    def __post_init__(self):
        if self.semi_x <= 0 or self.semi_y <= 0:
            raise ValueError("ellipse semi-axes must be positive")


def _bilinear_zero(img: np.ndarray, col: np.ndarray, row: np.ndarray) -> np.ndarray:
    """Bilinear interpolation with zero contribution from out-of-grid pixels.

    col/row are fractional pixel-center coordinates. Out-of-range corner
    pixels contribute zero, so the interpolant ramps to zero over one pixel
    beyond the outermost centers; this makes the line integral of a constant
    image equal constant * (size * pixel) along a central chord.
    """
    h, w = img.shape
    c0 = np.floor(col).astype(np.int64)
    r0 = np.floor(row).astype(np.int64)
    fc = col - c0
    fr = row - r0
    out = np.zeros(np.broadcast(col, row).shape, dtype=float)
    for dr, dc in ((0, 0), (0, 1), (1, 0), (1, 1)):
        rr = r0 + dr
        cc = c0 + dc
        weight = (fr if dr else 1.0 - fr) * (fc if dc else 1.0 - fc)
        valid = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
        out += np.where(valid, img[rr.clip(0, h - 1), cc.clip(0, w - 1)], 0.0) * weight
    return out


def forward_project(slc: Slice, geometry: Geometry, supersample: int = 2) -> Sinogram:
    """Ray-driven line integrals of a slice over the scan geometry.

    Each ray is sampled at slice.pixel_size / supersample spacing and the
    bilinearly interpolated attenuation is summed (midpoint rule). The
    result is linear in the slice and converges to the continuous line
    integral as supersample grows.
    """
    if supersample < 1:
        raise ValueError("supersample must be >= 1")
    data = np.asarray(slc.data, dtype=float)
    h, w = data.shape
    px = slc.pixel_size
    u = geometry.detector_offsets

    half_extent = 0.5 * px * float(np.hypot(w, h)) + px
    step = px / supersample
    n_samp = int(np.ceil(2.0 * half_extent / step)) + 1
    t = (np.arange(n_samp) - (n_samp - 1) / 2.0) * step

    cx = (w - 1) / 2.0
    cy = (h - 1) / 2.0
    angles = geometry.angles
    out = np.empty((angles.size, geometry.detector_count), dtype=float)
    for i, theta in enumerate(np.deg2rad(angles)):
        ct, st = np.cos(theta), np.sin(theta)
        x = u[None, :] * ct - t[:, None] * st
        y = u[None, :] * st + t[:, None] * ct
        vals = _bilinear_zero(data, x / px + cx, y / px + cy)
        out[i] = vals.sum(axis=0) * step / NM_PER_UM
    return Sinogram(angles, out)


def analytic_ellipse_sinogram(specs, geometry: Geometry) -> Sinogram:
    """Closed-form sinogram of a set of 2-D ellipses (chord length * intensity).

    The line integral of an ellipse with semi-axes (a, b) rotated by phi is
    2 * I * a * b / s^2 * sqrt(s^2 - d^2) with s^2 = a^2 cos^2(t) + b^2 sin^2(t),
    t = theta - phi, and d the signed ray offset from the ellipse center.
    Overlapping ellipses add.
    """
    angles = geometry.angles
    u = geometry.detector_offsets
    out = np.zeros((angles.size, geometry.detector_count), dtype=float)
    theta = np.deg2rad(angles)[:, None]
    for e in specs:
        t = theta - np.deg2rad(e.rotation_deg)
        s2 = (e.semi_x * np.cos(t)) ** 2 + (e.semi_y * np.sin(t)) ** 2
        d = u[None, :] - (e.center_x * np.cos(theta) + e.center_y * np.sin(theta))
        under = s2 - d ** 2
        chord = np.where(under > 0.0, 2.0 * e.semi_x * e.semi_y / s2 * np.sqrt(np.maximum(under, 0.0)), 0.0)
        out += e.intensity * chord / NM_PER_UM
    return Sinogram(angles, out)


def rasterize_ellipses(specs, size: int, pixel_size: float,
                       subpixel: int = 1) -> Slice:
    """Rasterize 2-D ellipses onto a centered grid.

    Companion to analytic_ellipse_sinogram for projector tests and disk
    phantoms. With subpixel = 1 a pixel belongs to an ellipse iff its center
    satisfies the quadratic inequality; subpixel > 1 averages a subpixel x
    subpixel grid of membership tests per pixel (area-fraction anti-aliasing,
    used where the binary boundary error would mask the quantity under test).
    Overlapping intensities add.
    """
    if subpixel < 1:
        raise ValueError("subpixel must be >= 1")
    n = size * subpixel
    idx = (np.arange(n) - (n - 1) / 2.0) * (pixel_size / subpixel)
    x = idx[None, :]
    y = idx[:, None]
    fine = np.zeros((n, n), dtype=float)
    for e in specs:
        phi = np.deg2rad(e.rotation_deg)
        dx = x - e.center_x
        dy = y - e.center_y
        xe = dx * np.cos(phi) + dy * np.sin(phi)
        ye = -dx * np.sin(phi) + dy * np.cos(phi)
        inside = (xe / e.semi_x) ** 2 + (ye / e.semi_y) ** 2 <= 1.0
        fine[inside] += e.intensity
    if subpixel > 1:
        fine = fine.reshape(size, subpixel, size, subpixel).mean(axis=(1, 3))
    return Slice(width=size, height=size, pixel_size=pixel_size, data=fine)
