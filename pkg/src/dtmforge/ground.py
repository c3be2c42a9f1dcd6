"""Heightmap generation: overhang removal, ground/anomaly split, inpainting."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.ndimage import median_filter
from scipy.sparse.linalg import spsolve

from .errors import NumericError
from .grid import GridSpec, ReturnRasters
from .lsq import eval_surface, fit_surface

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Heightmap:
    """Gridded ground elevations with a validity mask.

    ``values`` is (height, width) float64; ``valid`` marks cells holding a
    ground elevation. Invalid cells carry NaN and must never be read as
    elevations.
    """

    spec: GridSpec
    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        shape = (self.spec.height, self.spec.width)
        if self.values.shape != shape or self.valid.shape != shape:
            raise ValueError(f"grids must have shape {shape}")

    def copy(self) -> "Heightmap":
        return Heightmap(self.spec, self.values.copy(), self.valid.copy())


@dataclass(frozen=True)
class GroundParams:
    """Decision thresholds for the heightmap stage.

    overhang_gap:       min high-low spread (m) to treat a cell as overhung
    residual_threshold: height above the fitted ground surface (m) marking a cell anomalous
    slope_threshold:    rise/run ratio beyond which anomaly regions grow into a neighbor
    seed_percentile:    fraction of lowest-residual cells kept for the second fit pass
    median_window:      odd window for the final median smoothing (1 = off)
    poly_degree:        degree of the polynomial ground surface
    """

    overhang_gap: float = 2.0
    residual_threshold: float = 1.0
    slope_threshold: float = 1.5
    seed_percentile: float = 0.75
    median_window: int = 3
    poly_degree: int = 3

    def __post_init__(self):
        if not self.overhang_gap > 0:
            raise ValueError(f"overhang_gap must be > 0, got {self.overhang_gap}")
        if not self.residual_threshold > 0:
            raise ValueError(f"residual_threshold must be > 0, got {self.residual_threshold}")
        if not self.slope_threshold > 0:
            raise ValueError(f"slope_threshold must be > 0, got {self.slope_threshold}")
        if not 0 < self.seed_percentile < 1:
            raise ValueError(f"seed_percentile must be in (0, 1), got {self.seed_percentile}")
        if self.median_window < 1 or self.median_window % 2 == 0:
            raise ValueError(f"median_window must be odd and >= 1, got {self.median_window}")
        if self.poly_degree < 0:
            raise ValueError(f"poly_degree must be >= 0, got {self.poly_degree}")


def remove_overhangs(rasters: ReturnRasters, overhang_gap: float) -> Heightmap:
    """Collapse min/max returns into a single candidate ground height per cell.

    A spread larger than ``overhang_gap`` means something hangs over visible
    ground, so the low return is kept; otherwise the cell takes the mean of
    both returns. Empty cells stay invalid.
    """
    if not overhang_gap > 0:
        raise ValueError(f"overhang_gap must be > 0, got {overhang_gap}")
    occupied = rasters.count > 0
    values = np.full(rasters.low.shape, np.nan)
    overhung = occupied & (rasters.high - rasters.low > overhang_gap)
    flat = occupied & ~overhung
    values[overhung] = rasters.low[overhung]
    values[flat] = 0.5 * (rasters.low[flat] + rasters.high[flat])
    return Heightmap(rasters.spec, values, occupied)


def classify_ground(
    candidate: Heightmap, params: GroundParams
) -> tuple[Heightmap, np.ndarray]:
    """Split the candidate heightmap into ground and anomalous cells.

    A polynomial surface is fit twice: first over every valid cell, then over
    the cells whose residual falls below the ``seed_percentile`` quantile,
    which keeps buildings from dragging the surface upward. Cells more than
    ``residual_threshold`` above the refit surface seed the anomaly mask, and
    the mask then grows across steep 8-connected edges until it stops
    changing. Returns the heightmap with anomalous cells invalidated plus the
    mask.
    """
    spec = candidate.spec
    valid = candidate.valid
    basis = (params.poly_degree + 1) ** 2
    n_valid = int(valid.sum())
    if n_valid < basis:
        raise NumericError(
            f"classify_ground needs at least {basis} valid cells for degree "
            f"{params.poly_degree}, got {n_valid}"
        )

    ys, xs = np.nonzero(valid)
    cx = spec.x_centers()[xs]
    cy = spec.y_centers()[ys]
    cz = candidate.values[ys, xs]
    pts = np.column_stack([cx, cy, cz])

    surface = fit_surface(pts, params.poly_degree)
    residual = cz - eval_surface(surface, cx, cy)

    cutoff = np.quantile(residual, params.seed_percentile)
    seeds = residual <= cutoff
    if seeds.sum() >= basis:
        surface = fit_surface(pts[seeds], params.poly_degree)
        residual = cz - eval_surface(surface, cx, cy)
    else:
        log.warning("seed subset too small for refit; keeping the initial fit")

    anomaly = np.zeros(valid.shape, dtype=bool)
    anomaly[ys, xs] = residual > params.residual_threshold
    anomaly = _grow_anomalies(
        candidate.values, valid, anomaly, spec.cell_size, params.slope_threshold
    )

    values = candidate.values.copy()
    values[anomaly] = np.nan
    return Heightmap(spec, values, valid & ~anomaly), anomaly


_NEIGHBORS_8 = [
    (dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)
]


def _shifted(a: np.ndarray, dr: int, dc: int, fill) -> np.ndarray:
    """out[r, c] = a[r + dr, c + dc], with ``fill`` outside the grid."""
    out = np.full_like(a, fill)
    h, w = a.shape
    rs = slice(max(dr, 0), h + min(dr, 0))
    cs = slice(max(dc, 0), w + min(dc, 0))
    rd = slice(max(-dr, 0), h + min(-dr, 0))
    cd = slice(max(-dc, 0), w + min(-dc, 0))
    out[rd, cd] = a[rs, cs]
    return out


def _grow_anomalies(
    values: np.ndarray,
    valid: np.ndarray,
    anomaly: np.ndarray,
    cell_size: float,
    slope_threshold: float,
) -> np.ndarray:
    """Monotone closure: valid cells joined to the mask across steep edges.

    Each pass is a vectorized frontier expansion; the result equals the
    serial fixpoint because membership only ever grows.
    """
    anomaly = anomaly.copy()
    while True:
        grown = np.zeros_like(anomaly)
        for dr, dc in _NEIGHBORS_8:
            run = cell_size * math.hypot(dr, dc)
            nbr_anom = _shifted(anomaly, dr, dc, False)
            nbr_vals = _shifted(values, dr, dc, np.nan)
            with np.errstate(invalid="ignore"):
                steep = np.abs(values - nbr_vals) / run > slope_threshold
            grown |= nbr_anom & steep
        grown &= valid & ~anomaly
        if not grown.any():
            return anomaly
        anomaly |= grown


def inpaint(holes: Heightmap) -> Heightmap:
    """Fill invalid cells by solving the discrete Laplace equation.

    Every filled cell ends up equal to the mean of its in-grid 4-neighbors,
    with valid cells as Dirichlet boundary, so filled values always stay
    within the range of the surrounding valid data. Output is fully valid.
    """
    valid = holes.valid
    if not valid.any():
        raise NumericError("inpaint needs at least one valid cell")
    if valid.all():
        return holes.copy()

    h, w = valid.shape
    values = holes.values.copy()
    flat_vals = values.ravel()
    missing = np.flatnonzero(~valid.ravel())
    n_miss = missing.size
    lut = np.full(h * w, -1, dtype=np.int64)
    lut[missing] = np.arange(n_miss)

    r = missing // w
    c = missing % w
    rows, cols, data = [], [], []
    rhs = np.zeros(n_miss)
    degree = np.zeros(n_miss)
    for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        rr, cc = r + dr, c + dc
        inside = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
        degree += inside
        nbr = rr[inside] * w + cc[inside]
        src = np.flatnonzero(inside)
        nbr_missing = lut[nbr] >= 0
        rows.append(src[nbr_missing])
        cols.append(lut[nbr[nbr_missing]])
        data.append(-np.ones(int(nbr_missing.sum())))
        np.add.at(rhs, src[~nbr_missing], flat_vals[nbr[~nbr_missing]])

    rows.append(np.arange(n_miss))
    cols.append(np.arange(n_miss))
    data.append(degree)
    system = sp.csc_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_miss, n_miss),
    )
    solution = spsolve(system, rhs)

    # The exact solution is a convex combination of boundary values; clamp
    # out the solver's rounding so the maximum principle holds exactly.
    vmin = float(flat_vals[valid.ravel()].min())
    vmax = float(flat_vals[valid.ravel()].max())
    flat_out = flat_vals.copy()
    flat_out[missing] = np.clip(solution, vmin, vmax)
    return Heightmap(holes.spec, flat_out.reshape(h, w), np.ones_like(valid))


def smooth_median(heightmap: Heightmap, window: int) -> Heightmap:
    """Median-filter the fully valid heightmap; window indices clamp at borders."""
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    if not heightmap.valid.all():
        raise ValueError("smooth_median requires a fully valid heightmap; inpaint first")
    if window == 1:
        return heightmap.copy()
    smoothed = median_filter(heightmap.values, size=window, mode="nearest")
    return Heightmap(heightmap.spec, smoothed, heightmap.valid.copy())
