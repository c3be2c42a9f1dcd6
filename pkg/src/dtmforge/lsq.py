"""Bivariate polynomial least-squares fitting via truncated SVD."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import NumericError

log = logging.getLogger(__name__)

MAX_DEGREE = 8
SVD_RCOND = 1e-10  # singular values below this fraction of the largest are truncated


@dataclass(frozen=True)
class PolySurface:
    """Bivariate polynomial z = sum_{i,j} coeffs[i, j] * xs^i * ys^j.

    ``xs, ys`` are the input coordinates affinely mapped to [-1, 1]^2;
    ``domain_scale`` = (x_center, x_halfspan, y_center, y_halfspan) records
    the map. ``coeffs`` has shape (degree_n + 1, degree_n + 1).
    """

    degree_n: int
    coeffs: np.ndarray
    domain_scale: tuple[float, float, float, float]

    def __post_init__(self):
        coeffs = np.ascontiguousarray(self.coeffs, dtype=np.float64)
        if coeffs.shape != (self.degree_n + 1, self.degree_n + 1):
            raise ValueError(
                f"coeffs shape {coeffs.shape} does not match degree {self.degree_n}"
            )
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        if not (self.domain_scale[1] > 0 and self.domain_scale[3] > 0):
            raise ValueError("domain_scale halfspans must be > 0")


def _scaled(v: np.ndarray, center: float, halfspan: float) -> np.ndarray:
    return (v - center) / halfspan


def _design_matrix(xs: np.ndarray, ys: np.ndarray, degree: int) -> np.ndarray:
    """Rows of all monomials xs^i * ys^j, flat index i * (degree+1) + j."""
    m = degree + 1
    xp = np.empty((xs.size, m))
    yp = np.empty((ys.size, m))
    xp[:, 0] = 1.0
    yp[:, 0] = 1.0
    for p in range(1, m):
        xp[:, p] = xp[:, p - 1] * xs
        yp[:, p] = yp[:, p - 1] * ys
    return (xp[:, :, None] * yp[:, None, :]).reshape(xs.size, m * m)


def fit_surface(
    samples, degree_n: int, weights=None
) -> PolySurface:
    """Fit a degree-n bivariate polynomial to (x, y, z) samples.

    Coordinates are mapped to [-1, 1]^2 before the monomial basis is built
    (raw survey coordinates make higher-degree systems singular). The system
    is solved in the least-squares sense through an SVD with singular values
    below ``SVD_RCOND`` of the largest truncated; a rank-deficient system is
    reported with a warning and still yields the minimum-norm solution.

    ``weights``, when given, minimizes sum w_k (g(x_k, y_k) - z_k)^2.
    """
    pts = np.asarray(samples, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"samples must be an (n, 3) array of (x, y, z), got {pts.shape}")
    if not 0 <= degree_n <= MAX_DEGREE:
        raise ValueError(f"degree_n must be in [0, {MAX_DEGREE}], got {degree_n}")
    basis = (degree_n + 1) ** 2
    if pts.shape[0] < basis:
        raise NumericError(
            f"degree {degree_n} needs at least {basis} samples, got {pts.shape[0]}"
        )

    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    cx, hx = _span(x)
    cy, hy = _span(y)
    a = _design_matrix(_scaled(x, cx, hx), _scaled(y, cy, hy), degree_n)
    b = z
    if weights is not None:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (pts.shape[0],):
            raise ValueError("weights must be one scalar per sample")
        if (w < 0).any():
            raise ValueError("weights must be non-negative")
        sw = np.sqrt(w)
        a = a * sw[:, None]
        b = z * sw

    coeffs, _, rank, _ = np.linalg.lstsq(a, b, rcond=SVD_RCOND)
    if rank < basis:
        log.warning(
            "rank-deficient surface fit: rank %d of %d; minimum-norm solution returned",
            rank,
            basis,
        )
    return PolySurface(degree_n, coeffs.reshape(degree_n + 1, degree_n + 1), (cx, hx, cy, hy))


def _span(v: np.ndarray) -> tuple[float, float]:
    lo, hi = float(v.min()), float(v.max())
    center = 0.5 * (lo + hi)
    halfspan = 0.5 * (hi - lo)
    return center, halfspan if halfspan > 0 else 1.0


def eval_surface(surface: PolySurface, x, y):
    """Evaluate the surface at x, y (scalars or arrays) by nested Horner form."""
    xs = _scaled(np.asarray(x, dtype=np.float64), surface.domain_scale[0], surface.domain_scale[1])
    ys = _scaled(np.asarray(y, dtype=np.float64), surface.domain_scale[2], surface.domain_scale[3])
    c = surface.coeffs
    result = np.zeros(np.broadcast(xs, ys).shape)
    for i in range(surface.degree_n, -1, -1):
        row = c[i]
        inner = np.full_like(result, row[-1])
        for j in range(surface.degree_n - 1, -1, -1):
            inner = inner * ys + row[j]
        result = result * xs + inner
    if np.isscalar(x) and np.isscalar(y):
        return float(result)
    return result
