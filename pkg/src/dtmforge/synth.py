"""Synthetic LiDAR scene generator with ground-truth rasters for scoring.

Each scene writes an ASCII XYZRGB point file plus a ``*_truth.npz`` holding
the analytic ground surface sampled on a raster, the box/canopy footprint
masks, and the surface parameters themselves so tests can evaluate the true
ground at arbitrary coordinates. Output is deterministic for a given seed.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

SCENES = ("plane", "rolling", "plane+boxes", "rolling+boxes+canopy")

BOX_HEIGHT = 5.0
CANOPY_HEIGHT = 8.0
NOISE_SIGMA = 0.02  # z jitter for non-plane scenes

_PLANE = (100.0, 0.05, 0.03)  # z0, x slope, y slope


def _rolling_params(extent: float, rng: np.random.Generator) -> np.ndarray:
    """Three low-frequency sinusoids: amplitude, wavelength, phase, axis mix."""
    amps = np.array([1.5, 1.2, 0.8])
    waves = np.array([1.4, 1.1, 1.8]) * extent
    phases = rng.uniform(0.0, 2.0 * math.pi, size=3)
    return np.column_stack([amps, waves, phases])


def _ground_z(kind: str, params: np.ndarray | None, x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z0, sx, sy = _PLANE
    if kind.startswith("plane"):
        return z0 + sx * x + sy * y
    a, w, p = params.T
    two_pi = 2.0 * math.pi
    return (
        z0
        + a[0] * np.sin(two_pi * x / w[0] + p[0])
        + a[1] * np.cos(two_pi * y / w[1] + p[1])
        + a[2] * np.sin(two_pi * (x + y) / w[2] + p[2])
    )


def _boxes(extent: float) -> np.ndarray:
    """Two square footprints totalling 8% of the area: (x0, y0, side, height)."""
    side = 0.2 * extent
    return np.array(
        [
            [0.15 * extent, 0.20 * extent, side, BOX_HEIGHT],
            [0.60 * extent, 0.55 * extent, side, BOX_HEIGHT],
        ]
    )


def _canopies(extent: float) -> np.ndarray:
    """Circular canopy patches: (cx, cy, radius, height)."""
    return np.array(
        [
            [0.78 * extent, 0.22 * extent, 0.09 * extent, CANOPY_HEIGHT],
            [0.25 * extent, 0.78 * extent, 0.10 * extent, CANOPY_HEIGHT],
        ]
    )


def _in_box(boxes: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    hit = np.zeros(x.shape, dtype=bool)
    for x0, y0, side, _ in boxes:
        hit |= (x >= x0) & (x < x0 + side) & (y >= y0) & (y < y0 + side)
    return hit


def _in_canopy(canopies: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    hit = np.zeros(x.shape, dtype=bool)
    for cx, cy, r, _ in canopies:
        hit |= (x - cx) ** 2 + (y - cy) ** 2 <= r * r
    return hit


def _canopy_ground_gaps(
    canopies: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    extent: float,
    cell: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Centers (jittered) of canopy-covered cells that hold no ground point."""
    dim = max(1, math.ceil(extent / cell))
    ix = np.clip((x / cell).astype(np.int64), 0, dim - 1)
    iy = np.clip((y / cell).astype(np.int64), 0, dim - 1)
    occupied = np.zeros((dim, dim), dtype=bool)
    occupied[iy, ix] = True

    centers = (np.arange(dim) + 0.5) * cell
    gx, gy = np.meshgrid(centers, centers)
    needed = _in_canopy(canopies, gx, gy) & ~occupied
    cx = gx[needed]
    cy = gy[needed]
    jitter = rng.uniform(-0.4 * cell, 0.4 * cell, size=(cx.size, 2))
    return cx + jitter[:, 0], cy + jitter[:, 1]


def _colors(
    z_rel: np.ndarray, on_box: np.ndarray, on_canopy: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Elevation-ramped ground colors, gray roofs, dark green canopy."""
    n = z_rel.size
    t = np.clip(z_rel, 0.0, 1.0)
    rgb = np.empty((n, 3))
    rgb[:, 0] = 95.0 + 70.0 * t
    rgb[:, 1] = 125.0 + 35.0 * (1.0 - t)
    rgb[:, 2] = 60.0 + 20.0 * t
    rgb[on_box] = (150.0, 150.0, 155.0)
    rgb[on_canopy] = (40.0, 110.0, 50.0)
    rgb += rng.integers(-8, 9, size=(n, 3))
    return np.clip(rgb, 0, 255).astype(np.uint8)


def make_synthetic(
    scene: str,
    out_dir: str | Path,
    seed: int = 0,
    density: float = 4.0,
    extent: float = 100.0,
    truth_cell_size: float = 1.0,
) -> tuple[Path, Path]:
    """Generate a scene's point file and ground-truth raster.

    ``density`` is in points per square meter over an ``extent`` x ``extent``
    meter tile. Returns (points_path, truth_path).
    """
    if scene not in SCENES:
        raise ValueError(f"unknown scene {scene!r}; choose one of {', '.join(SCENES)}")
    if not (density > 0 and extent > 0 and truth_cell_size > 0):
        raise ValueError("density, extent, and truth_cell_size must be > 0")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    rolling = None if scene.startswith("plane") else _rolling_params(extent, rng)
    boxes = _boxes(extent) if "boxes" in scene else np.zeros((0, 4))
    canopies = _canopies(extent) if "canopy" in scene else np.zeros((0, 4))

    n = int(round(density * extent * extent))
    xy = rng.random((n, 2)) * extent
    x, y = xy[:, 0], xy[:, 1]
    z = _ground_z(scene, rolling, x, y)
    if scene != "plane":
        z = z + rng.normal(0.0, NOISE_SIGMA, size=n)

    on_box = _in_box(boxes, x, y)
    z = np.where(on_box, z + BOX_HEIGHT, z)

    if canopies.size:
        # The scene promises visible ground beneath every canopy patch; plug
        # cells the uniform sampling left empty with one ground return each.
        gx_fill, gy_fill = _canopy_ground_gaps(
            canopies, x, y, extent, truth_cell_size, rng
        )
        if gx_fill.size:
            gz_fill = _ground_z(scene, rolling, gx_fill, gy_fill)
            gz_fill = gz_fill + rng.normal(0.0, NOISE_SIGMA, size=gx_fill.size)
            x = np.r_[x, gx_fill]
            y = np.r_[y, gy_fill]
            z = np.r_[z, gz_fill]
            on_box = np.r_[on_box, np.zeros(gx_fill.size, dtype=bool)]
            n = x.size

    # Canopy points come on top of the ground returns so the ground stays
    # visible beneath the overhang.
    extra_parts = []
    for cx, cy, r, height in canopies:
        n_extra = int(round(density * math.pi * r * r))
        radius = r * np.sqrt(rng.random(n_extra))
        theta = rng.uniform(0.0, 2.0 * math.pi, n_extra)
        ex = np.clip(cx + radius * np.cos(theta), 0.0, extent)
        ey = np.clip(cy + radius * np.sin(theta), 0.0, extent)
        ez = _ground_z(scene, rolling, ex, ey) + height
        ez = ez + rng.normal(0.0, NOISE_SIGMA, size=n_extra)
        extra_parts.append(np.column_stack([ex, ey, ez]))
    if extra_parts:
        extra = np.vstack(extra_parts)
        all_xyz = np.vstack([np.column_stack([x, y, z]), extra])
        canopy_flags = np.r_[
            np.zeros(n, dtype=bool), np.ones(extra.shape[0], dtype=bool)
        ]
        on_box = np.r_[on_box, np.zeros(extra.shape[0], dtype=bool)]
    else:
        all_xyz = np.column_stack([x, y, z])
        canopy_flags = np.zeros(n, dtype=bool)

    z_ground_only = _ground_z(scene, rolling, all_xyz[:, 0], all_xyz[:, 1])
    z_rel = (z_ground_only - z_ground_only.min()) / max(
        z_ground_only.max() - z_ground_only.min(), 1e-9
    )
    colors = _colors(z_rel, on_box, canopy_flags, rng)

    stem = scene.replace("+", "_")
    points_path = out_dir / f"{stem}.xyz"
    records = np.column_stack([all_xyz, colors])
    np.savetxt(points_path, records, fmt="%.6f %.6f %.6f %d %d %d")

    truth_path = out_dir / f"{stem}_truth.npz"
    _write_truth(truth_path, scene, rolling, boxes, canopies, extent, density, seed, truth_cell_size)
    return points_path, truth_path


def _write_truth(
    path: Path,
    scene: str,
    rolling: np.ndarray | None,
    boxes: np.ndarray,
    canopies: np.ndarray,
    extent: float,
    density: float,
    seed: int,
    cell: float,
) -> None:
    dim = max(1, math.ceil(extent / cell))
    centers = (np.arange(dim) + 0.5) * cell
    gx, gy = np.meshgrid(centers, centers)
    ground = _ground_z(scene, rolling, gx, gy)
    box_mask = _in_box(boxes, gx, gy)
    canopy_mask = _in_canopy(canopies, gx, gy)
    np.savez(
        path,
        scene=scene,
        ground=ground,
        box_mask=box_mask,
        canopy_mask=canopy_mask,
        boxes=boxes,
        canopies=canopies,
        rolling=rolling if rolling is not None else np.zeros((0, 3)),
        extent=extent,
        density=density,
        seed=seed,
        cell_size=cell,
    )


def load_truth(path: str | Path) -> dict:
    with np.load(path, allow_pickle=False) as data:
        return {key: data[key] for key in data.files}


def eval_truth_ground(truth: dict, x, y):
    """True (noise-free) ground elevation at arbitrary coordinates."""
    scene = str(truth["scene"])
    rolling = truth["rolling"] if truth["rolling"].size else None
    return _ground_z(scene, rolling, x, y)
