from collections import Counter

import numpy as np
import pytest

from dtmforge.meshgen import (
    export_obj,
    export_vertex_buffer,
    heightmap_to_mesh,
)

from conftest import make_heightmap
from helpers import read_obj


def grid_mesh(shape, lod=0, rng=None, cell=1.0):
    if rng is None:
        values = np.full(shape, 5.0)
    else:
        values = rng.random(shape) * 20.0
    return heightmap_to_mesh(make_heightmap(values, cell_size=cell), lod)


def face_normals(mesh):
    v = mesh.vertices
    t = mesh.triangles
    return np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])


def edge_counts(mesh):
    counts = Counter()
    for a, b, c in mesh.triangles:
        for e in ((a, b), (b, c), (c, a)):
            counts[tuple(sorted(e))] += 1
    return counts


class TestHeightmapToMesh:
    def test_two_by_two_counts(self):
        mesh = grid_mesh((2, 2))
        assert mesh.vertices.shape == (4, 3)
        assert mesh.triangles.shape == (2, 3)

    def test_flat_field_normals_point_up(self):
        mesh = grid_mesh((5, 5))
        assert (mesh.vertices[:, 2] == 5.0).all()
        normals = face_normals(mesh)
        normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
        np.testing.assert_allclose(normals, np.tile([0.0, 0.0, 1.0], (len(normals), 1)))

    def test_lod2_equals_stride_sampling(self, rng):
        values = rng.random((33, 33)) * 12.0
        hm = make_heightmap(values, cell_size=2.0)
        mesh = heightmap_to_mesh(hm, 2)
        rows = np.arange(0, 33, 4)
        cols = np.arange(0, 33, 4)
        assert mesh.vertices.shape[0] == rows.size * cols.size
        k = 0
        for r in rows:
            for c in cols:
                x, y, z = mesh.vertices[k]
                assert x == hm.spec.x_centers()[c]
                assert y == hm.spec.y_centers()[r]
                assert z == values[r, c]
                k += 1

    def test_forced_last_row_and_column(self):
        mesh = grid_mesh((34, 30), lod=2)
        # lattice 0,4,...,32 plus 33 -> 10 rows; 0,4,...,28 plus 29 -> 9 cols
        assert mesh.vertices.shape[0] == 10 * 9
        assert mesh.triangles.shape[0] == 2 * 9 * 8

    @pytest.mark.parametrize("shape,lod", [((2, 2), 0), ((9, 7), 1), ((33, 33), 3)])
    def test_triangle_count_formula(self, rng, shape, lod):
        mesh = grid_mesh(shape, lod=lod, rng=rng)
        stride = 1 << lod
        wl = len(set(list(range(0, shape[1], stride)) + [shape[1] - 1]))
        hl = len(set(list(range(0, shape[0], stride)) + [shape[0] - 1]))
        assert mesh.triangles.shape[0] == 2 * (wl - 1) * (hl - 1)

    def test_no_degenerate_triangles_and_upward_winding(self, rng):
        mesh = grid_mesh((17, 23), lod=1, rng=rng)
        normals = face_normals(mesh)
        areas_xy = np.abs(normals[:, 2]) / 2.0
        assert (areas_xy > 0).all()
        assert (normals[:, 2] > 0).all()

    def test_manifold_edges(self, rng):
        mesh = grid_mesh((9, 11), lod=1, rng=rng)
        counts = edge_counts(mesh)
        assert set(counts.values()) <= {1, 2}
        boundary = sum(1 for v in counts.values() if v == 1)
        wl, hl = 6, 5  # lattice sizes for 11 and 9 at stride 2
        assert boundary == 2 * ((wl - 1) + (hl - 1))

    def test_lod_vertices_nest(self, rng):
        values = rng.random((33, 33)) * 9.0
        hm = make_heightmap(values)
        fine = {tuple(v) for v in heightmap_to_mesh(hm, 1).vertices}
        coarse = {tuple(v) for v in heightmap_to_mesh(hm, 2).vertices}
        assert coarse <= fine

    def test_uv_range_and_corners(self, rng):
        mesh = grid_mesh((12, 15), rng=rng)
        assert mesh.uvs.min() >= 0.0 and mesh.uvs.max() <= 1.0
        assert tuple(mesh.uvs[0]) == (0.0, 0.0)
        assert tuple(mesh.uvs[-1]) == (1.0, 1.0)

    def test_lod_too_large(self, rng):
        hm = make_heightmap(rng.random((8, 8)))
        with pytest.raises(ValueError, match="too large"):
            heightmap_to_mesh(hm, 3)

    def test_requires_fully_valid_map(self):
        values = np.ones((4, 4))
        values[1, 1] = np.nan
        with pytest.raises(ValueError, match="valid"):
            heightmap_to_mesh(make_heightmap(values), 0)


class TestExportObj:
    def test_line_counts_for_two_triangles(self, tmp_path):
        mesh = grid_mesh((2, 2))
        path = tmp_path / "m.obj"
        export_obj(mesh, path)
        lines = path.read_text().splitlines()
        assert sum(1 for l in lines if l.startswith("v ")) == 4
        assert sum(1 for l in lines if l.startswith("vt ")) == 4
        assert sum(1 for l in lines if l.startswith("f ")) == 2

    def test_roundtrip_through_independent_parser(self, tmp_path, rng):
        mesh = grid_mesh((7, 9), lod=1, rng=rng)
        path = tmp_path / "rt.obj"
        export_obj(mesh, path)
        verts, uvs, faces_v, faces_vt = read_obj(path)
        assert np.array_equal(faces_v, mesh.triangles)
        assert np.array_equal(faces_vt, mesh.triangles)
        assert np.abs(verts - mesh.vertices).max() <= 5e-7
        assert np.abs(uvs - mesh.uvs).max() <= 5e-7

    def test_deterministic_bytes(self, tmp_path, rng):
        mesh = grid_mesh((6, 6), rng=rng)
        a, b = tmp_path / "a.obj", tmp_path / "b.obj"
        export_obj(mesh, a)
        export_obj(mesh, b)
        assert a.read_bytes() == b.read_bytes()

    def test_io_error_mentions_path(self, tmp_path):
        mesh = grid_mesh((2, 2))
        bogus = tmp_path / "no_such_dir" / "m.obj"
        with pytest.raises(OSError, match="no_such_dir"):
            export_obj(mesh, bogus)


class TestVertexBuffer:
    def test_binary_dump_roundtrip(self, tmp_path, rng):
        mesh = grid_mesh((4, 5), rng=rng)
        path = tmp_path / "verts.bin"
        export_vertex_buffer(mesh, path)
        back = np.frombuffer(path.read_bytes(), dtype="<f4").reshape(-1, 3)
        assert np.array_equal(back, mesh.vertices.astype("<f4"))
