"""Point-cloud file readers: ASCII XYZ[RGB] and uncompressed LAS 1.2."""

from __future__ import annotations

import logging
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import ParseError

log = logging.getLogger(__name__)


class Bounds(NamedTuple):
    """Axis-aligned bounding box of a point cloud, closed intervals in meters."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    z_min: float
    z_max: float


@dataclass(frozen=True)
class Point:
    """A single point: planimetric x, y and elevation z in meters."""

    x: float
    y: float
    z: float
    color: tuple[int, int, int] | None = None


@dataclass(frozen=True)
class PointCloud:
    """Immutable point cloud.

    Coordinates are stored as an (n, 3) float64 array; colors, when present,
    as an (n, 3) uint8 array covering every point. Arrays are made read-only
    so a cloud can be shared freely across threads.
    """

    xyz: np.ndarray
    colors: np.ndarray | None = None
    bounds: Bounds = field(init=False)

    def __post_init__(self):
        xyz = np.ascontiguousarray(self.xyz, dtype=np.float64)
        if xyz.ndim != 2 or xyz.shape[1] != 3:
            raise ValueError(f"xyz must be an (n, 3) array, got shape {xyz.shape}")
        if xyz.shape[0] == 0:
            raise ValueError("a PointCloud must contain at least one point")
        if not np.isfinite(xyz).all():
            raise ValueError("xyz contains non-finite values; drop them before construction")
        xyz.setflags(write=False)
        object.__setattr__(self, "xyz", xyz)
        if self.colors is not None:
            colors = np.ascontiguousarray(self.colors, dtype=np.uint8)
            if colors.shape != (xyz.shape[0], 3):
                raise ValueError("colors must be an (n, 3) array matching xyz")
            colors.setflags(write=False)
            object.__setattr__(self, "colors", colors)
        mins = xyz.min(axis=0)
        maxs = xyz.max(axis=0)
        object.__setattr__(
            self,
            "bounds",
            Bounds(
                float(mins[0]),
                float(maxs[0]),
                float(mins[1]),
                float(maxs[1]),
                float(mins[2]),
                float(maxs[2]),
            ),
        )

    def __len__(self) -> int:
        return self.xyz.shape[0]

    @property
    def has_color(self) -> bool:
        return self.colors is not None

    def point(self, i: int) -> Point:
        x, y, z = self.xyz[i]
        color = tuple(int(c) for c in self.colors[i]) if self.colors is not None else None
        return Point(float(x), float(y), float(z), color)


def load_xyz(path: str | Path, delimiter: str | None = None) -> PointCloud:
    """Parse an ASCII XYZ or XYZRGB file into a PointCloud.

    Lines starting with ``#`` are skipped. Every data line must have exactly
    3 (x y z) or 6 (x y z r g b) numeric fields; 4- or 5-field layouts are
    rejected because intensity vs. color cannot be told apart. Points with
    non-finite coordinates are dropped with a logged count.

    ``delimiter=None`` splits on any whitespace; pass ``,`` for CSV.
    """
    path = Path(path)
    try:
        with warnings.catch_warnings():
            # empty input warns before returning an empty array; the zero-point
            # ParseError below covers that case
            warnings.simplefilter("ignore", UserWarning)
            data = np.loadtxt(
                path, delimiter=delimiter, comments="#", ndmin=2, dtype=np.float64
            )
    except ValueError as exc:
        raise ParseError(_describe_bad_line(path, delimiter, exc)) from exc
    if data.size == 0:
        raise ParseError(f"{path}: no data lines found")
    if data.shape[1] not in (3, 6):
        raise ParseError(
            f"{path}: expected 3 or 6 columns per line, found {data.shape[1]} "
            "(4-5 column layouts are ambiguous and not supported)"
        )
    finite = np.isfinite(data).all(axis=1)
    dropped = int(data.shape[0] - finite.sum())
    if dropped:
        log.warning("%s: dropped %d points with non-finite coordinates", path, dropped)
        data = data[finite]
    if data.shape[0] == 0:
        raise ParseError(f"{path}: zero valid points after parsing")
    colors = None
    if data.shape[1] == 6:
        colors = np.clip(np.rint(data[:, 3:6]), 0, 255).astype(np.uint8)
    return PointCloud(data[:, :3].copy(), colors)


def _describe_bad_line(path: Path, delimiter: str | None, exc: ValueError) -> str:
    """Re-scan the file to pinpoint the first malformed line (1-based)."""
    expected = None
    try:
        with open(path, "r") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                fields = line.split(delimiter) if delimiter else line.split()
                if expected is None:
                    expected = len(fields)
                if len(fields) != expected:
                    return (
                        f"{path}: malformed line {lineno}: expected {expected} fields, "
                        f"found {len(fields)}"
                    )
                for tok in fields:
                    try:
                        float(tok)
                    except ValueError:
                        return f"{path}: malformed line {lineno}: non-numeric field {tok!r}"
    except OSError:
        pass
    return f"{path}: parse failure: {exc}"


# LAS 1.2 public layout: header fields at fixed byte offsets, little-endian.
_LAS_HEADER_SIZE = 227

_LAS_CORE_FIELDS = [
    ("X", "<i4"),
    ("Y", "<i4"),
    ("Z", "<i4"),
    ("intensity", "<u2"),
    ("flags", "u1"),
    ("classification", "u1"),
    ("scan_angle", "i1"),
    ("user_data", "u1"),
    ("source_id", "<u2"),
]
_LAS_GPS = [("gps_time", "<f8")]
_LAS_RGB = [("red", "<u2"), ("green", "<u2"), ("blue", "<u2")]

_LAS_POINT_FORMATS = {
    0: _LAS_CORE_FIELDS,
    1: _LAS_CORE_FIELDS + _LAS_GPS,
    2: _LAS_CORE_FIELDS + _LAS_RGB,
    3: _LAS_CORE_FIELDS + _LAS_GPS + _LAS_RGB,
}


def load_las(path: str | Path) -> PointCloud:
    """Parse an uncompressed LAS file (versions 1.0-1.2, point formats 0-3).

    Coordinates are recovered as ``X * scale + offset`` per axis. For formats
    2 and 3 the 16-bit color channels are downscaled to 8 bits by a right
    shift of 8. LAZ-compressed payloads are rejected with a clear error.
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _LAS_HEADER_SIZE:
        raise ParseError(f"{path}: file too short to hold a LAS header")
    if raw[:4] != b"LASF":
        raise ParseError(f"{path}: bad signature (expected 'LASF')")
    ver_major, ver_minor = raw[24], raw[25]
    if ver_major != 1 or ver_minor > 2:
        raise ParseError(f"{path}: unsupported LAS version {ver_major}.{ver_minor} (need 1.0-1.2)")
    (point_offset,) = struct.unpack_from("<L", raw, 96)
    fmt_id = raw[104]
    (rec_len,) = struct.unpack_from("<H", raw, 105)
    (n_points,) = struct.unpack_from("<L", raw, 107)
    sx, sy, sz = struct.unpack_from("<3d", raw, 131)
    ox, oy, oz = struct.unpack_from("<3d", raw, 155)

    if fmt_id & 0x80:
        raise ParseError(f"{path}: LAZ-compressed points are not supported; convert to LAS first")
    if fmt_id not in _LAS_POINT_FORMATS:
        raise ParseError(f"{path}: unsupported point record format {fmt_id} (formats 0-3 supported)")
    base = np.dtype(_LAS_POINT_FORMATS[fmt_id])
    if rec_len < base.itemsize:
        raise ParseError(
            f"{path}: point record length {rec_len} smaller than format {fmt_id} "
            f"minimum {base.itemsize}"
        )
    fields = list(_LAS_POINT_FORMATS[fmt_id])
    if rec_len > base.itemsize:
        fields.append(("extra", f"V{rec_len - base.itemsize}"))
    dtype = np.dtype(fields)

    if n_points == 0:
        raise ParseError(f"{path}: header declares zero points")
    end = point_offset + n_points * rec_len
    if point_offset < _LAS_HEADER_SIZE or end > len(raw):
        raise ParseError(
            f"{path}: truncated file: header declares {n_points} points "
            f"({end} bytes needed, {len(raw)} present)"
        )

    rec = np.frombuffer(raw, dtype=dtype, count=n_points, offset=point_offset)
    xyz = np.empty((n_points, 3), dtype=np.float64)
    xyz[:, 0] = rec["X"] * sx + ox
    xyz[:, 1] = rec["Y"] * sy + oy
    xyz[:, 2] = rec["Z"] * sz + oz

    colors = None
    if fmt_id in (2, 3):
        colors = np.empty((n_points, 3), dtype=np.uint8)
        colors[:, 0] = rec["red"] >> 8
        colors[:, 1] = rec["green"] >> 8
        colors[:, 2] = rec["blue"] >> 8

    finite = np.isfinite(xyz).all(axis=1)
    dropped = int(n_points - finite.sum())
    if dropped:
        log.warning("%s: dropped %d points with non-finite coordinates", path, dropped)
        xyz = xyz[finite]
        colors = colors[finite] if colors is not None else None
    if xyz.shape[0] == 0:
        raise ParseError(f"{path}: zero valid points after parsing")
    return PointCloud(xyz, colors)
