"""dtmforge: digital terrain models from raw LiDAR point clouds.

The pipeline turns a point cloud into a ground heightmap with non-ground
objects removed, a triangulated terrain mesh with LoD variants, a color
texture, and a normal map. See the cli module for the command-line entry.
"""

from .errors import ConfigError, DtmError, NumericError, ParseError, PipelineError
from .grid import GridSpec, OutlierParams, ReturnRasters, rasterize_returns, remove_outliers
from .ground import (
    GroundParams,
    Heightmap,
    classify_ground,
    inpaint,
    remove_overhangs,
    smooth_median,
)
from .ingest import Bounds, Point, PointCloud, load_las, load_xyz
from .lsq import PolySurface, eval_surface, fit_surface
from .meshgen import TerrainMesh, export_obj, export_vertex_buffer, heightmap_to_mesh
from .synth import make_synthetic
from .texturing import MaterialMaps, TextureImage, bake_texture, map_uv, normal_map

__version__ = "0.1.0"

__all__ = [
    "Bounds",
    "ConfigError",
    "DtmError",
    "GridSpec",
    "GroundParams",
    "Heightmap",
    "MaterialMaps",
    "NumericError",
    "OutlierParams",
    "ParseError",
    "PipelineError",
    "Point",
    "PointCloud",
    "PolySurface",
    "ReturnRasters",
    "TerrainMesh",
    "TextureImage",
    "bake_texture",
    "classify_ground",
    "eval_surface",
    "export_obj",
    "export_vertex_buffer",
    "fit_surface",
    "heightmap_to_mesh",
    "inpaint",
    "load_las",
    "load_xyz",
    "make_synthetic",
    "map_uv",
    "normal_map",
    "rasterize_returns",
    "remove_outliers",
    "remove_overhangs",
    "smooth_median",
]
