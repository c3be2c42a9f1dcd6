"""Statistical outlier removal and min/max-return rasterization."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .ingest import PointCloud

log = logging.getLogger(__name__)

_QUERY_CHUNK = 262_144  # bounds the transient neighbor matrices


@dataclass(frozen=True)
class OutlierParams:
    """Tunables for density-based outlier removal.

    k:            neighbors considered per point (planimetric kNN), >= 1
    bandwidth_h:  Gaussian kernel bandwidth in meters, > 0
    threshold_th: density cutoff; points scoring strictly below it are removed
    """

    k: int = 16
    bandwidth_h: float = 1.0
    threshold_th: float = 1e-4

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.bandwidth_h > 0:
            raise ValueError(f"bandwidth_h must be > 0, got {self.bandwidth_h}")
        if self.threshold_th < 0:
            raise ValueError(f"threshold_th must be >= 0, got {self.threshold_th}")


@dataclass(frozen=True)
class GridSpec:
    """Uniform raster over the cloud's planimetric bounds.

    Cell (ix, iy) covers [origin_x + ix*cell, origin_x + (ix+1)*cell) x the
    same in y; points exactly on the maximal edge fall into the last cell so
    the grid covers the closed bounds.
    """

    cell_size: float
    origin: tuple[float, float]
    width: int
    height: int

    @classmethod
    def from_bounds(cls, bounds, cell_size: float) -> "GridSpec":
        if not cell_size > 0:
            raise ValueError(f"cell_size must be > 0, got {cell_size}")
        width = max(1, math.ceil((bounds.x_max - bounds.x_min) / cell_size))
        height = max(1, math.ceil((bounds.y_max - bounds.y_min) / cell_size))
        return cls(cell_size, (bounds.x_min, bounds.y_min), width, height)

    def cell_indices(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Column (ix) and row (iy) indices for coordinates, clamped to the grid."""
        ix = np.floor((np.asarray(x) - self.origin[0]) / self.cell_size).astype(np.int64)
        iy = np.floor((np.asarray(y) - self.origin[1]) / self.cell_size).astype(np.int64)
        return np.clip(ix, 0, self.width - 1), np.clip(iy, 0, self.height - 1)

    def x_centers(self) -> np.ndarray:
        return self.origin[0] + (np.arange(self.width) + 0.5) * self.cell_size

    def y_centers(self) -> np.ndarray:
        return self.origin[1] + (np.arange(self.height) + 0.5) * self.cell_size


@dataclass(frozen=True)
class ReturnRasters:
    """Per-cell lowest/highest return elevations plus point counts.

    ``low`` and ``high`` are (height, width) float64 grids holding NaN where
    ``count`` is zero; for occupied cells low <= high and both are elevations
    of actual points binned there.
    """

    spec: GridSpec
    low: np.ndarray
    high: np.ndarray
    count: np.ndarray


def point_densities(cloud: PointCloud, params: OutlierParams) -> np.ndarray:
    """Kernel density score per point against its planimetric kNN.

    For each point the k nearest neighbors in the (x, y) plane are found
    (excluding the point itself) and scored with a Gaussian kernel on the
    full 3-D Euclidean distance:

        score_i = mean_j exp(-d3(i,j)^2 / (2 h^2)) / (h * sqrt(2 pi))

    All scores are computed against the complete cloud, so the result does
    not depend on any removal order.
    """
    xyz = cloud.xyz
    n = len(cloud)
    k = params.k
    h = params.bandwidth_h
    if n < k + 1:
        raise ValueError(f"need at least k+1={k + 1} points for kNN, cloud has {n}")

    tree = cKDTree(xyz[:, :2])
    norm = 1.0 / (h * math.sqrt(2.0 * math.pi))
    inv_two_h2 = 1.0 / (2.0 * h * h)
    scores = np.empty(n, dtype=np.float64)
    for start in range(0, n, _QUERY_CHUNK):
        stop = min(start + _QUERY_CHUNK, n)
        _, idx = tree.query(xyz[start:stop, :2], k=k + 1, workers=-1)
        rows = np.arange(start, stop)
        # Drop the query point itself; under exact ties it may land in any
        # slot, so fall back to dropping the farthest when it is absent.
        is_self = idx == rows[:, None]
        has_self = is_self.any(axis=1)
        drop = np.where(has_self, is_self.argmax(axis=1), k)
        keep = np.ones_like(is_self)
        keep[np.arange(stop - start), drop] = False
        nbr = idx[keep].reshape(stop - start, k)

        diff = xyz[nbr] - xyz[start:stop, None, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        scores[start:stop] = norm * np.exp(-d2 * inv_two_h2).mean(axis=1)
    return scores


def remove_outliers(
    cloud: PointCloud, params: OutlierParams
) -> tuple[PointCloud, int]:
    """Drop points whose kernel density score falls strictly below the threshold.

    Returns the surviving cloud (bounds recomputed) and the removal count.
    Clouds with fewer than k+1 points pass through unchanged with a warning.
    """
    if len(cloud) < params.k + 1:
        log.warning(
            "cloud has %d points, fewer than k+1=%d; outlier filter skipped",
            len(cloud),
            params.k + 1,
        )
        return cloud, 0
    scores = point_densities(cloud, params)
    keep = scores >= params.threshold_th
    removed = int(len(cloud) - keep.sum())
    if removed == 0:
        return cloud, 0
    if not keep.any():
        raise ValueError(
            f"threshold_th={params.threshold_th} would remove every point; lower it"
        )
    colors = cloud.colors[keep] if cloud.colors is not None else None
    return PointCloud(cloud.xyz[keep], colors), removed


def rasterize_returns(cloud: PointCloud, cell_size: float) -> ReturnRasters:
    """Bin points into a uniform grid keeping per-cell min/max elevation and count."""
    spec = GridSpec.from_bounds(cloud.bounds, cell_size)
    ix, iy = spec.cell_indices(cloud.xyz[:, 0], cloud.xyz[:, 1])
    flat = iy * spec.width + ix
    z = cloud.xyz[:, 2]

    ncells = spec.width * spec.height
    order = np.argsort(flat, kind="stable")
    fsorted = flat[order]
    zsorted = z[order]
    starts = np.flatnonzero(np.r_[True, fsorted[1:] != fsorted[:-1]])
    occupied = fsorted[starts]

    low = np.full(ncells, np.nan)
    high = np.full(ncells, np.nan)
    low[occupied] = np.minimum.reduceat(zsorted, starts)
    high[occupied] = np.maximum.reduceat(zsorted, starts)
    count = np.bincount(flat, minlength=ncells)

    shape = (spec.height, spec.width)
    return ReturnRasters(spec, low.reshape(shape), high.reshape(shape), count.reshape(shape))
