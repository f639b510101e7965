"""Filtered back-projection with the closed-form Ram-Lak kernel.

Filtering is spatial-domain convolution with the exact band-limited ramp
taps (bit-stable goldens, no apodization); back-projection accumulates
linearly interpolated detector samples at u = x cos(theta) + y sin(theta)
and scales by the angular step in radians. No short-scan weighting is
applied: the limited angular range is back-projected as-is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .phantom import Slice
from .projection import NM_PER_UM, Geometry, Sinogram


@dataclass(frozen=True)
class RamLakKernel:
    """Discrete ramp filter h[n], n in [-half_width, half_width].

    h[0] = 1/(4 d^2), h[n] = -1/(pi n d)^2 for odd n, 0 for even n != 0,
    with d the detector spacing. The DFT magnitude approximates |omega| on
    the band [-1/(2d), 1/(2d)].
    """

    half_width: int
    spacing: float
    taps: np.ndarray

    def __getitem__(self, n: int) -> float:
        if abs(n) > self.half_width:
            raise IndexError(f"tap index {n} beyond half_width {self.half_width}")
        return float(self.taps[n + self.half_width])


def ramlak_taps(half_width: int, spacing: float = 1.0) -> RamLakKernel:
    if half_width < 1:
        raise ValueError("half_width must be >= 1")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    n = np.arange(-half_width, half_width + 1)
    taps = np.zeros(n.size, dtype=float)
    taps[n == 0] = 1.0 / (4.0 * spacing ** 2)
    odd = n % 2 != 0
    taps[odd] = -1.0 / (np.pi * n[odd] * spacing) ** 2
    return RamLakKernel(half_width=half_width, spacing=spacing, taps=taps)


def filter_sinogram(sino: Sinogram, kernel: RamLakKernel) -> Sinogram:
    """Convolve each angle row with the kernel, approximating the ramp
    integral: q[k] = spacing * sum_n p[n] h[k - n]."""
    n_det = sino.detector_count
    if kernel.half_width < n_det:
        raise ValueError("kernel half_width must be >= detector_count")
    h = kernel.half_width
    out = np.empty_like(sino.data)
    for i in range(sino.data.shape[0]):
        full = np.convolve(sino.data[i], kernel.taps)
        out[i] = full[h:h + n_det] * kernel.spacing
    return Sinogram(sino.angles.copy(), out)


def back_project(filtered: Sinogram, geometry: Geometry) -> Slice:
    """Accumulate filtered rows into the reconstruction grid.

    Each pixel reads the row by linear interpolation on the detector at
    u = x cos(theta) + y sin(theta); rays falling outside the detector
    contribute zero. The accumulated sum is scaled by the angular step in
    radians (the quadrature weight of the limited-angle integral).
    """
    if filtered.detector_count != geometry.detector_count:
        raise ValueError("sinogram does not match geometry detector_count")
    n = geometry.recon_size
    px = geometry.recon_pixel
    coords = (np.arange(n) - (n - 1) / 2.0) * px
    x = coords[None, :]
    y = coords[:, None]
    n_det = geometry.detector_count
    det_center = (n_det - 1) / 2.0
    step_rad = np.deg2rad(geometry.angle_step)
    recon = np.zeros((n, n), dtype=float)
    for row, theta in zip(filtered.data, np.deg2rad(filtered.angles)):
        u = x * np.cos(theta) + y * np.sin(theta)
        pos = u / geometry.detector_pixel + det_center
        i0 = np.floor(pos).astype(np.int64)
        frac = pos - i0
        i1 = i0 + 1
        v0 = np.where((i0 >= 0) & (i0 < n_det), row[i0.clip(0, n_det - 1)], 0.0)
        v1 = np.where((i1 >= 0) & (i1 < n_det), row[i1.clip(0, n_det - 1)], 0.0)
        recon += (1.0 - frac) * v0 + frac * v1
    recon *= step_rad
    return Slice(width=n, height=n, pixel_size=px, data=recon)


def fbp_reconstruct(sino: Sinogram, geometry: Geometry,
                    kernel: RamLakKernel | None = None) -> Slice:
    """Filter then back-project; attenuation comes out in 1/um.

    The kernel spacing must be the detector pixel in um so that the
    spacing-weighted convolution plus the radian angular step reproduce the
    object scale on a full 180-degree scan.
    """
    if kernel is None:
        kernel = ramlak_taps(geometry.detector_count,
                             geometry.detector_pixel / NM_PER_UM)
    return back_project(filter_sinogram(sino, kernel), geometry)
