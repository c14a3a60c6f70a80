"""Label-preserving random affine augmentation for training images.

One resampling pass applies rotation about the image center, then zoom about
the center, then translation. Sampling is bilinear; out-of-bounds samples
clamp to the nearest edge pixel. Output dimensions always equal input
dimensions, so augmentation never changes the label.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .preprocess import ImageBuffer


@dataclass(frozen=True)
class AugmentConfig:
    rotation_range: float = 0.2      # degrees, sampled from +/- this value
    zoom_range: float = 0.1          # zoom factor sampled from [1-z, 1+z]
    width_shift_range: float = 0.2   # fraction of image width
    height_shift_range: float = 0.2  # fraction of image height
    fill: str = "nearest"
    enabled: bool = True

    def __post_init__(self):
        for name in ("rotation_range", "zoom_range", "width_shift_range",
                     "height_shift_range"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.zoom_range >= 1:
            raise ConfigError(f"zoom_range must be < 1, got {self.zoom_range}")
        if self.fill != "nearest":
            raise ConfigError(f"only 'nearest' fill is supported, got {self.fill!r}")


@dataclass(frozen=True)
class AffineParams:
    angle: float  # degrees
    zoom: float   # magnification factor about the center
    dx: float     # pixels
    dy: float     # pixels


def sample_affine(config: AugmentConfig, width: int, height: int,
                  rng: np.random.Generator) -> AffineParams:
    """Draw one parameter set. Draw order is fixed (angle, zoom, dx, dy) so a
    seeded stream reproduces the same sequence."""
    angle = float(rng.uniform(-config.rotation_range, config.rotation_range))
    zoom = float(rng.uniform(1.0 - config.zoom_range, 1.0 + config.zoom_range))
    dx = float(rng.uniform(-width * config.width_shift_range,
                           width * config.width_shift_range))
    dy = float(rng.uniform(-height * config.height_shift_range,
                           height * config.height_shift_range))
    return AffineParams(angle=angle, zoom=zoom, dx=dx, dy=dy)


def apply_affine(img: ImageBuffer, params: AffineParams) -> ImageBuffer:
    """Resample the image under rotate -> zoom -> translate in one pass.

    Identity parameters return a bitwise-identical image.
    """
    h, w = img.height, img.width
    if params.angle == 0.0 and params.zoom == 1.0 and params.dx == 0.0 \
            and params.dy == 0.0:
        return ImageBuffer(w, h, img.pixels.copy())

    cx = (w - 1) / 2.0
    cy = (h - 1) / 2.0
    gx, gy = np.meshgrid(np.arange(w, dtype=np.float64),
                         np.arange(h, dtype=np.float64))
    # invert the transform: undo translation, then zoom, then rotation
    u = (gx - cx - params.dx) / params.zoom
    v = (gy - cy - params.dy) / params.zoom
    theta = math.radians(params.angle)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    xs = cos_t * u + sin_t * v + cx
    ys = -sin_t * u + cos_t * v + cy

    # nearest-edge fill: clamp source coordinates into the image
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[:, :, None]
    fy = (ys - y0)[:, :, None]

    src = img.pixels.astype(np.float64)
    top = src[y0, x0] * (1 - fx) + src[y0, x1] * fx
    bot = src[y1, x0] * (1 - fx) + src[y1, x1] * fx
    blended = top * (1 - fy) + bot * fy
    pixels = np.clip(np.floor(blended + 0.5), 0, 255).astype(np.uint8)
    return ImageBuffer(w, h, pixels)
