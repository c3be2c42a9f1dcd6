"""Texture coordinates, color texture baking, normal maps, and image export."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import distance_transform_edt, sobel

from .grid import GridSpec
from .ground import Heightmap
from .ingest import PointCloud


@dataclass(frozen=True)
class TextureImage:
    """RGB texture aligned one texel per heightmap cell.

    ``filled`` marks texels whose color is defined; after baking every texel
    is filled.
    """

    pixels: np.ndarray  # (height, width, 3) uint8
    filled: np.ndarray  # (height, width) bool

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class MaterialMaps:
    """Terrain material inputs: diffuse color plus an encoded normal map."""

    diffuse: TextureImage
    normal: np.ndarray  # (height, width, 3) uint8, n = pixel / 127.5 - 1


def map_uv(x, y, bounds) -> tuple:
    """Affine map of world (x, y) into texture coordinates [0, 1]^2.

    u runs from x_min -> 0 to x_max -> 1, v likewise over y; values outside
    the bounds clamp. Accepts scalars or arrays.
    """
    if not (bounds.x_max > bounds.x_min and bounds.y_max > bounds.y_min):
        raise ValueError("degenerate bounds: x and y spans must be positive")
    u = (np.asarray(x, dtype=np.float64) - bounds.x_min) / (bounds.x_max - bounds.x_min)
    v = (np.asarray(y, dtype=np.float64) - bounds.y_min) / (bounds.y_max - bounds.y_min)
    u = np.clip(u, 0.0, 1.0)
    v = np.clip(v, 0.0, 1.0)
    if np.isscalar(x) and np.isscalar(y):
        return float(u), float(v)
    return u, v


def _round_half_up_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """Exact round-half-up of num/den for non-negative integers."""
    return (2 * num + den) // (2 * den)


def bake_texture(cloud: PointCloud, spec: GridSpec) -> TextureImage:
    """Average point colors per cell, then densify to full coverage.

    Texels that received no points take the color of the nearest filled
    texel and are then smoothed once with a 3x3 box blur (originally filled
    texels are left untouched). Channel means round half up.
    """
    if not cloud.has_color:
        raise ValueError(
            "cloud carries no color; run with --no-texture to skip texture baking"
        )
    ix, iy = spec.cell_indices(cloud.xyz[:, 0], cloud.xyz[:, 1])
    flat = iy * spec.width + ix
    ncells = spec.width * spec.height
    count = np.bincount(flat, minlength=ncells)
    filled = count > 0

    pixels = np.zeros((ncells, 3), dtype=np.uint8)
    safe_count = np.maximum(count, 1)
    for ch in range(3):
        sums = np.bincount(flat, weights=cloud.colors[:, ch], minlength=ncells)
        pixels[:, ch] = _round_half_up_ratio(sums.astype(np.int64), safe_count.astype(np.int64))
    pixels[~filled] = 0

    shape = (spec.height, spec.width)
    pixels = pixels.reshape(spec.height, spec.width, 3)
    filled = filled.reshape(shape)

    if not filled.all():
        # Nearest-filled fill, then one clamped 3x3 box blur over the texels
        # that started out empty.
        _, (near_r, near_c) = distance_transform_edt(~filled, return_indices=True)
        dense = pixels[near_r, near_c]
        blurred = _box_blur_3x3(dense)
        out = dense.copy()
        out[~filled] = blurred[~filled]
        pixels = out

    return TextureImage(pixels, np.ones(shape, dtype=bool))


def _box_blur_3x3(pixels: np.ndarray) -> np.ndarray:
    """3x3 mean with indices clamped at borders, channels rounded half up."""
    h, w = pixels.shape[:2]
    rows = np.clip(np.arange(-1, h + 1), 0, h - 1)
    cols = np.clip(np.arange(-1, w + 1), 0, w - 1)
    padded = pixels[np.ix_(rows, cols)].astype(np.int64)
    total = np.zeros((h, w, 3), dtype=np.int64)
    for dr in range(3):
        for dc in range(3):
            total += padded[dr : dr + h, dc : dc + w]
    return _round_half_up_ratio(total, np.int64(9)).astype(np.uint8)


def normal_map(heightmap: Heightmap, strength: float = 1.0) -> np.ndarray:
    """Tangent-space normal map from heightmap gradients, encoded as uint8.

    Gradients come from a 3x3 Sobel (borders clamped); the normal is
    normalize(-strength * dz/dx, -strength * dz/dy, 1) with +y texel rows
    aligned to +y world. Encoding is pixel = round_half_up((n + 1) * 127.5),
    decoded by n = pixel / 127.5 - 1.
    """
    if not strength > 0:
        raise ValueError(f"strength must be > 0, got {strength}")
    if not heightmap.valid.all():
        raise ValueError("normal_map requires a fully valid heightmap; inpaint first")
    z = heightmap.values
    # Sobel responses sum weights of 8 over a 2-cell baseline.
    scale = 8.0 * heightmap.spec.cell_size
    gx = sobel(z, axis=1, mode="nearest") / scale
    gy = sobel(z, axis=0, mode="nearest") / scale

    n = np.empty((*z.shape, 3))
    n[..., 0] = -strength * gx
    n[..., 1] = -strength * gy
    n[..., 2] = 1.0
    n /= np.linalg.norm(n, axis=-1, keepdims=True)

    encoded = np.floor((n + 1.0) * 127.5 + 0.5)
    return np.clip(encoded, 0, 255).astype(np.uint8)


def decode_normals(pixels: np.ndarray) -> np.ndarray:
    """Recover unit normals from an encoded normal map."""
    return pixels.astype(np.float64) / 127.5 - 1.0


def save_rgb_png(pixels: np.ndarray, path: str | Path) -> None:
    """Write an (h, w, 3) uint8 array as an RGB PNG (deterministic bytes)."""
    Image.fromarray(np.ascontiguousarray(pixels), mode="RGB").save(str(path), format="PNG")


def save_mask_png(mask: np.ndarray, path: str | Path) -> None:
    """Write a boolean grid as an 8-bit grayscale PNG (True = 255)."""
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L").save(
        str(path), format="PNG"
    )


def save_heightmap_png(heightmap: Heightmap, path: str | Path) -> Path:
    """Write a 16-bit grayscale PNG plus a key=value metadata sidecar.

    Elevations map linearly from [z_min, z_max] to [0, 65535]; the sidecar
    (<name>.meta.txt next to the PNG) records z_min, z_max, cell_size and the
    grid origin so heights can be recovered.
    """
    if not heightmap.valid.all():
        raise ValueError("heightmap export requires a fully valid heightmap")
    path = Path(path)
    z = heightmap.values
    z_min = float(z.min())
    z_max = float(z.max())
    if z_max > z_min:
        scaled = (z - z_min) / (z_max - z_min) * 65535.0
    else:
        scaled = np.zeros_like(z)
    img = np.floor(scaled + 0.5).astype(np.uint16)
    Image.fromarray(img).save(str(path), format="PNG")

    meta_path = path.with_suffix(".meta.txt")
    spec = heightmap.spec
    meta_path.write_text(
        f"z_min={z_min!r}\n"
        f"z_max={z_max!r}\n"
        f"cell_size={spec.cell_size!r}\n"
        f"origin_x={spec.origin[0]!r}\n"
        f"origin_y={spec.origin[1]!r}\n"
    )
    return meta_path
