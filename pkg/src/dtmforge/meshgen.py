"""Heightmap to triangulated terrain mesh with power-of-two LoD decimation."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ground import Heightmap
from .ingest import Bounds
from .texturing import map_uv


@dataclass(frozen=True)
class TerrainMesh:
    """Triangulated heightfield: z-up, right-handed, meters.

    Triangle indices are 0-based into ``vertices``/``uvs`` (one UV per
    vertex); winding is counter-clockwise seen from above, so every face
    normal has a non-negative z-component.
    """

    vertices: np.ndarray  # (n, 3) float64
    uvs: np.ndarray  # (n, 2) float64 in [0, 1]^2
    triangles: np.ndarray  # (m, 3) int64
    lod_level: int


def _lattice(size: int, stride: int) -> np.ndarray:
    """Every stride-th index plus the final one."""
    idx = np.arange(0, size, stride)
    if idx[-1] != size - 1:
        idx = np.append(idx, size - 1)
    return idx


def heightmap_to_mesh(heightmap: Heightmap, lod: int = 0) -> TerrainMesh:
    """Build a terrain mesh sampling every 2^lod-th heightmap cell.

    Vertices sit at cell centers (the last row/column is always included so
    the mesh spans the full grid); each quad splits along a fixed diagonal
    into two upward-facing triangles. UVs span the full-resolution grid's
    cell-center range so LoD variants share one texture mapping.
    """
    if lod < 0:
        raise ValueError(f"lod must be >= 0, got {lod}")
    if not heightmap.valid.all():
        raise ValueError("heightmap_to_mesh requires a fully valid heightmap; inpaint first")
    spec = heightmap.spec
    stride = 1 << lod
    if stride >= spec.width or stride >= spec.height:
        raise ValueError(
            f"lod {lod} too large for a {spec.width}x{spec.height} grid "
            f"(need dimensions > {stride})"
        )

    rows = _lattice(spec.height, stride)
    cols = _lattice(spec.width, stride)
    xc = spec.x_centers()
    yc = spec.y_centers()

    gx, gy = np.meshgrid(xc[cols], yc[rows])
    gz = heightmap.values[np.ix_(rows, cols)]
    vertices = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])

    uv_bounds = Bounds(xc[0], xc[-1], yc[0], yc[-1], float(gz.min()), float(gz.max()))
    u, v = map_uv(vertices[:, 0], vertices[:, 1], uv_bounds)
    uvs = np.column_stack([u, v])

    nr, nc = len(rows), len(cols)
    vid = np.arange(nr * nc).reshape(nr, nc)
    v00 = vid[:-1, :-1].ravel()
    v10 = vid[:-1, 1:].ravel()
    v01 = vid[1:, :-1].ravel()
    v11 = vid[1:, 1:].ravel()
    triangles = np.empty((2 * v00.size, 3), dtype=np.int64)
    triangles[0::2] = np.column_stack([v00, v10, v11])
    triangles[1::2] = np.column_stack([v00, v11, v01])

    return TerrainMesh(vertices, uvs, triangles, lod)


def export_obj(mesh: TerrainMesh, path: str | Path) -> None:
    """Write a Wavefront OBJ: `v x y z`, `vt u v`, `f a/a b/b c/c`.

    Numbers carry 6 decimal places and indices are 1-based; output is
    byte-for-byte deterministic for identical meshes.
    """
    path = Path(path)
    faces = mesh.triangles + 1
    with open(path, "w", newline="\n") as fh:
        np.savetxt(fh, mesh.vertices, fmt="v %.6f %.6f %.6f")
        np.savetxt(fh, mesh.uvs, fmt="vt %.6f %.6f")
        np.savetxt(fh, faces[:, [0, 0, 1, 1, 2, 2]], fmt="f %d/%d %d/%d %d/%d")


def export_vertex_buffer(mesh: TerrainMesh, path: str | Path) -> None:
    """Dump vertices as packed little-endian float32 triplets (for benchmarks)."""
    Path(path).write_bytes(mesh.vertices.astype("<f4").tobytes())
