"""Independent file-format oracles: a LAS 1.2 writer and an OBJ reader.

Built from the public format layouts with struct/plain parsing only, so
round-trip tests exercise the package against code that shares nothing
with it.
"""

import struct
from pathlib import Path

import numpy as np

RECORD_LENGTHS = {0: 20, 1: 28, 2: 26, 3: 34}
HEADER_SIZE = 227


def write_las(
    path,
    xyz,
    point_format=0,
    colors=None,
    scale=(0.001, 0.001, 0.001),
    offset=(0.0, 0.0, 0.0),
):
    """Write an uncompressed LAS 1.2 file record by record.

    Returns the (n, 3) float64 coordinates actually stored, i.e. the
    quantized integers mapped back through scale and offset.
    """
    xyz = np.asarray(xyz, dtype=np.float64)
    n = xyz.shape[0]
    rec_len = RECORD_LENGTHS[point_format]

    header = bytearray(HEADER_SIZE)
    header[0:4] = b"LASF"
    header[24] = 1  # version major
    header[25] = 2  # version minor
    struct.pack_into("<H", header, 94, HEADER_SIZE)
    struct.pack_into("<L", header, 96, HEADER_SIZE)
    header[104] = point_format
    struct.pack_into("<H", header, 105, rec_len)
    struct.pack_into("<L", header, 107, n)
    struct.pack_into("<3d", header, 131, *scale)
    struct.pack_into("<3d", header, 155, *offset)
    struct.pack_into(
        "<6d",
        header,
        179,
        xyz[:, 0].max(),
        xyz[:, 0].min(),
        xyz[:, 1].max(),
        xyz[:, 1].min(),
        xyz[:, 2].max(),
        xyz[:, 2].min(),
    )

    ints = np.empty((n, 3), dtype=np.int64)
    for axis in range(3):
        ints[:, axis] = np.rint((xyz[:, axis] - offset[axis]) / scale[axis])

    body = bytearray()
    for i in range(n):
        body += struct.pack("<iii", *(int(v) for v in ints[i]))
        body += struct.pack("<HBBbBH", 0, 0, 0, 0, 0, 0)
        if point_format in (1, 3):
            body += struct.pack("<d", 0.0)
        if point_format in (2, 3):
            r, g, b = (colors[i] if colors is not None else (0, 0, 0))
            body += struct.pack("<HHH", int(r), int(g), int(b))

    Path(path).write_bytes(bytes(header) + bytes(body))

    stored = np.empty_like(xyz)
    for axis in range(3):
        stored[:, axis] = ints[:, axis] * scale[axis] + offset[axis]
    return stored


def read_obj(path):
    """Parse `v`, `vt`, and `f a/a b/b c/c` lines; indices returned 0-based."""
    verts, uvs, faces_v, faces_vt = [], [], [], []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(p) for p in parts[1:4]])
        elif parts[0] == "vt":
            uvs.append([float(p) for p in parts[1:3]])
        elif parts[0] == "f":
            vi, ti = [], []
            for chunk in parts[1:]:
                a, _, b = chunk.partition("/")
                vi.append(int(a) - 1)
                ti.append(int(b) - 1)
            faces_v.append(vi)
            faces_vt.append(ti)
    return (
        np.array(verts),
        np.array(uvs),
        np.array(faces_v, dtype=np.int64),
        np.array(faces_vt, dtype=np.int64),
    )
