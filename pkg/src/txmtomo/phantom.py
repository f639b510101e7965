"""Randomized 3-D ellipsoid phantoms and grayscale image ingestion.

Phantoms mimic immobilized single-cell samples: two large ellipsoids for the
outer boundary, two mid-sized ones approximating the cup-shaped chloroplast,
many small lipid bodies, and a cloud of tiny high-intensity gold particles,
all on a constant background. External image corpora can be pulled in as
extra training slices, with 90/180/270 degree rotation augmentation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError


@dataclass
class Slice:
    """2-D horizontal section of an attenuation map, values in 1/um."""

    width: int
    height: int
    pixel_size: float
    data: np.ndarray

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("slice dimensions must be positive")
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != (self.height, self.width):
            raise ValueError("data shape must be (height, width)")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("slice data must be finite")


@dataclass
class Volume:
    """3-D attenuation map in 1/um, indexed (z, y, x), cubic voxels."""

    voxel_size: float
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 3:
            raise ValueError("volume data must be 3-D")

    @property
    def grid_size(self) -> int:
        return self.data.shape[0]

    def slice_at(self, z: int) -> Slice:
        nz, ny, nx = self.data.shape
        if not 0 <= z < nz:
            raise ValueError(f"z index {z} out of range [0, {nz})")
        return Slice(width=nx, height=ny, pixel_size=self.voxel_size,
                     data=self.data[z].copy())


@dataclass(frozen=True)
class EllipsoidSpec:
    """One ellipsoid: center and semi-axes in voxel units, additive intensity.

    euler_angles (degrees) rotate the ellipsoid frame as Rz(a) @ Ry(b) @ Rx(c).
    Rasterization is deterministic: a voxel belongs to the ellipsoid iff its
    center satisfies the quadratic inequality (no anti-aliasing), so a spec
    list reproduces its volume exactly when re-rasterized.
    """

    center: tuple[float, float, float]
    semi_axes: tuple[float, float, float]
    euler_angles: tuple[float, float, float]
    intensity: float

    def __post_init__(self):
        if min(self.semi_axes) <= 0:
            raise ValueError("semi-axes must be strictly positive")


@dataclass(frozen=True)
class CategoryRanges:
    """Randomization ranges for one ellipsoid category.

    axis_frac and center_frac are fractions of grid_size: semi-axes are drawn
    from axis_frac and the center offset from the grid center is drawn from
    [-center_frac, +center_frac] per axis. intensity is in 1/um.
    """

    count: int
    axis_frac: tuple[float, float]
    center_frac: float
    intensity: tuple[float, float]


DEFAULT_CATEGORIES = {
    "outer": CategoryRanges(2, (0.35, 0.48), 0.02, (0.002, 0.004)),
    "chloroplast": CategoryRanges(2, (0.15, 0.30), 0.12, (0.004, 0.008)),
    "lipid": CategoryRanges(20, (0.02, 0.06), 0.25, (0.006, 0.010)),
    "gold": CategoryRanges(50, (0.005, 0.015), 0.30, (0.03, 0.06)),
}

CATEGORY_ORDER = ("outer", "chloroplast", "lipid", "gold")


@dataclass(frozen=True)
class PhantomConfig:
    grid_size: int
    seed: int
    voxel_size: float = 21.9
    background: float = 0.002
    categories: dict = field(default_factory=lambda: dict(DEFAULT_CATEGORIES))

    def __post_init__(self):
        if self.grid_size < 8:
            raise ValueError("grid_size must be >= 8")
        if self.background < 0:
            raise ValueError("background must be >= 0")
        for name, cat in self.categories.items():
            if cat.count < 0:
                raise ValueError(f"negative count for category {name}")
            if cat.axis_frac[1] + cat.center_frac > 0.5 + 1e-9:
                raise ValueError(
                    f"category {name}: axis range plus center range exceeds the "
                    "grid, ellipsoid would not fit")


def _rotation_matrix(euler_deg) -> np.ndarray:
    a, b, c = np.deg2rad(euler_deg)
    rz = np.array([[np.cos(a), -np.sin(a), 0.0],
                   [np.sin(a), np.cos(a), 0.0],
                   [0.0, 0.0, 1.0]])
    ry = np.array([[np.cos(b), 0.0, np.sin(b)],
                   [0.0, 1.0, 0.0],
                   [-np.sin(b), 0.0, np.cos(b)]])
    rx = np.array([[1.0, 0.0, 0.0],
                   [0.0, np.cos(c), -np.sin(c)],
                   [0.0, np.sin(c), np.cos(c)]])
    return rz @ ry @ rx


def rasterize_ellipsoid(spec: EllipsoidSpec, volume: np.ndarray) -> None:
    """Add spec.intensity to every voxel whose center is inside the ellipsoid."""
    nz, ny, nx = volume.shape
    reach = max(spec.semi_axes)
    cz, cy, cx = spec.center[2], spec.center[1], spec.center[0]
    z0, z1 = max(0, int(np.floor(cz - reach))), min(nz, int(np.ceil(cz + reach)) + 1)
    y0, y1 = max(0, int(np.floor(cy - reach))), min(ny, int(np.ceil(cy + reach)) + 1)
    x0, x1 = max(0, int(np.floor(cx - reach))), min(nx, int(np.ceil(cx + reach)) + 1)
    if z0 >= z1 or y0 >= y1 or x0 >= x1:
        return
    z = np.arange(z0, z1)[:, None, None] - cz
    y = np.arange(y0, y1)[None, :, None] - cy
    x = np.arange(x0, x1)[None, None, :] - cx
    rot = _rotation_matrix(spec.euler_angles)
    # body-frame coordinates: d = R^T (v - c)
    dx = rot[0, 0] * x + rot[1, 0] * y + rot[2, 0] * z
    dy = rot[0, 1] * x + rot[1, 1] * y + rot[2, 1] * z
    dz = rot[0, 2] * x + rot[1, 2] * y + rot[2, 2] * z
    ax, ay, az = spec.semi_axes
    inside = (dx / ax) ** 2 + (dy / ay) ** 2 + (dz / az) ** 2 <= 1.0
    volume[z0:z1, y0:y1, x0:x1][inside] += spec.intensity


def rasterize_specs(specs, grid_size: int, background: float,
                    voxel_size: float = 21.9) -> Volume:
    data = np.full((grid_size,) * 3, float(background))
    for spec in specs:
        rasterize_ellipsoid(spec, data)
    return Volume(voxel_size=voxel_size, data=data)


def generate_phantom(config: PhantomConfig):
    """Draw a randomized ellipsoid phantom; returns (Volume, spec list).

    Categories are sampled in a fixed order so the result is a pure function
    of the config (identical seed gives a bit-identical volume).
    """
    rng = np.random.default_rng(config.seed)
    g = config.grid_size
    center = (g - 1) / 2.0
    specs = []
    for name in CATEGORY_ORDER:
        cat = config.categories.get(name)
        if cat is None:
            continue
        for _ in range(cat.count):
            offs = rng.uniform(-cat.center_frac, cat.center_frac, size=3) * g
            axes = rng.uniform(cat.axis_frac[0], cat.axis_frac[1], size=3) * g
            euler = rng.uniform(0.0, 360.0, size=3)
            intensity = rng.uniform(cat.intensity[0], cat.intensity[1])
            specs.append(EllipsoidSpec(
                center=tuple(center + offs),
                semi_axes=tuple(axes),
                euler_angles=tuple(euler),
                intensity=float(intensity)))
    volume = rasterize_specs(specs, g, config.background, config.voxel_size)
    return volume, specs


def uniform_slice_indices(grid_size: int, n: int) -> list[int]:
    """z_k = round((k + 0.5) * grid / n) - 1, half rounded up, clamped.

    n = grid_size yields every index in order and n = 1 picks the lower of
    the two middle slices on even grids.
    """
    if not 1 <= n <= grid_size:
        raise ValueError(f"n must be in [1, {grid_size}]")
    out = []
    for k in range(n):
        z = int(np.floor((k + 0.5) * grid_size / n + 0.5)) - 1
        out.append(min(max(z, 0), grid_size - 1))
    return out


def extract_slices(volume: Volume, n: int) -> list[Slice]:
    """n horizontal (constant-z) slices at uniformly spaced z indices."""
    return [volume.slice_at(z) for z in uniform_slice_indices(volume.grid_size, n)]


def ingest_images(dir_path, slice_size: int, pixel_size: float = 21.9,
                  attenuation_range: tuple[float, float] = (0.0, 0.02)) -> list[Slice]:
    """Load raster images from a directory as attenuation slices.

    Color images are converted to grey intensity (ITU-R 601 luminance),
    resampled bilinearly to slice_size x slice_size, and the 8-bit range
    [0, 255] is mapped linearly onto attenuation_range. Unreadable files are
    skipped with a warning; an empty directory is an error.
    """
    lo, hi = attenuation_range
    if not lo <= hi:
        raise ValueError("attenuation_range must be ordered (lo, hi)")
    directory = Path(dir_path)
    if not directory.is_dir():
        raise ValueError(f"not a directory: {directory}")
    slices = []
    for path in sorted(p for p in directory.iterdir() if p.is_file()):
        try:
            with Image.open(path) as img:
                grey = img.convert("L").convert("F")
                resized = grey.resize((slice_size, slice_size), Image.BILINEAR)
                arr = np.asarray(resized, dtype=float)
        except (UnidentifiedImageError, OSError) as exc:
            warnings.warn(f"skipping unreadable image {path.name}: {exc}")
            continue
        data = arr / 255.0 * (hi - lo) + lo
        slices.append(Slice(width=slice_size, height=slice_size,
                            pixel_size=pixel_size, data=data))
    if not slices:
        raise ValueError(f"no readable images in {directory}")
    return slices


def augment_rotations(slices) -> list[Slice]:
    """Expand each square slice into {original, rot90, rot180, rot270}."""
    out = []
    for s in slices:
        if s.width != s.height:
            raise ValueError("rotation augmentation requires square slices")
        for k in range(4):
            out.append(Slice(width=s.width, height=s.height,
                             pixel_size=s.pixel_size,
                             data=np.rot90(s.data, k).copy()))
    return out
