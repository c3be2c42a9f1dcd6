"""Pipeline orchestration, configuration, and the dtmforge command line."""

from __future__ import annotations

import argparse
import logging
import sys
import tempfile
import time
from dataclasses import dataclass, fields
from pathlib import Path

from . import synth
from .errors import ConfigError, NumericError, ParseError, PipelineError
from .grid import OutlierParams, rasterize_returns, remove_outliers
from .ground import GroundParams, classify_ground, inpaint, remove_overhangs, smooth_median
from .ingest import load_las, load_xyz
from .meshgen import export_obj, heightmap_to_mesh
from .texturing import bake_texture, normal_map, save_heightmap_png, save_mask_png, save_rgb_png

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_BAD_CONFIG = 2
EXIT_PARSE = 3
EXIT_NUMERIC = 4
EXIT_IO = 5


@dataclass
class PipelineConfig:
    """Every pipeline tunable; the run is fully deterministic given these."""

    input_path: str = ""
    output_dir: str = "dtm_out"
    cell_size: float = 1.0
    grid_max_dim: int = 1024
    outlier_k: int = 16
    outlier_bandwidth_h: float = 1.0
    outlier_threshold_th: float = 1e-4
    overhang_gap: float = 2.0
    residual_threshold: float = 1.0
    slope_threshold: float = 1.5
    seed_percentile: float = 0.75
    median_window: int = 3
    poly_degree: int = 3
    lod_levels: int = 1
    texture_enabled: bool = True
    normal_strength: float = 1.0

    def outlier_params(self) -> OutlierParams:
        return OutlierParams(self.outlier_k, self.outlier_bandwidth_h, self.outlier_threshold_th)

    def ground_params(self) -> GroundParams:
        return GroundParams(
            self.overhang_gap,
            self.residual_threshold,
            self.slope_threshold,
            self.seed_percentile,
            self.median_window,
            self.poly_degree,
        )

    def validate(self) -> None:
        if not self.input_path:
            raise ConfigError("input_path is required")
        if not self.cell_size > 0:
            raise ConfigError(f"cell_size must be > 0, got {self.cell_size}")
        if self.grid_max_dim < 1:
            raise ConfigError(f"grid_max_dim must be >= 1, got {self.grid_max_dim}")
        if self.lod_levels < 1:
            raise ConfigError(f"lod_levels must be >= 1, got {self.lod_levels}")
        if not self.normal_strength > 0:
            raise ConfigError(f"normal_strength must be > 0, got {self.normal_strength}")
        try:
            self.outlier_params()
            self.ground_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_file(self, path: str | Path) -> None:
        lines = [f"{f.name}={_format_value(getattr(self, f.name))}" for f in fields(self)]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        known = {f.name: f.type for f in fields(cls)}
        values = {}
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in known:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _parse_value(known[key], value.strip(), f"{path}:{lineno}")
        return cls(**values)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(kind: str, text: str, where: str):
    try:
        if kind == "bool":
            lowered = text.lower()
            if lowered in ("true", "1", "yes", "on"):
                return True
            if lowered in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass
class RunReport:
    """Ordered key=value record of one pipeline run."""

    entries: dict

    def to_text(self) -> str:
        return "\n".join(f"{k}={_format_value(v)}" for k, v in self.entries.items()) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())


def _load_cloud(path: Path):
    if path.suffix.lower() in (".las", ".laz"):
        return load_las(path)
    delimiter = None
    try:
        with open(path, "r") as fh:
            for raw in fh:
                line = raw.split("#", 1)[0].strip()
                if line:
                    delimiter = "," if "," in line else None
                    break
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not a text file (and not LAS); {exc}") from exc
    return load_xyz(path, delimiter=delimiter)


class _Stages:
    """Runs named stages, timing each and wrapping failures."""

    def __init__(self):
        self.seconds: dict[str, float] = {}

    def run(self, name: str, fn):
        start = time.perf_counter()
        try:
            result = fn()
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError(name, exc) from exc
        self.seconds[name] = time.perf_counter() - start
        return result


def run_pipeline(config: PipelineConfig) -> RunReport:
    """Execute the full point-cloud -> terrain-assets pipeline.

    Stages: load, outlier removal, rasterization, overhang removal, ground
    classification, inpainting, median smoothing, mesh generation per LoD,
    texture and normal baking, artifact export. Any stage failure removes the
    partial outputs and raises PipelineError naming the stage.
    """
    try:
        config.validate()
    except ConfigError as exc:
        raise PipelineError("config", exc) from exc
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []
    stages = _Stages()

    def track(path: Path) -> Path:
        created.append(path)
        return path

    try:
        input_path = Path(config.input_path)
        cloud = stages.run("load", lambda: _load_cloud(input_path))
        points_loaded = len(cloud)

        filtered, removed = stages.run(
            "outliers", lambda: remove_outliers(cloud, config.outlier_params())
        )

        bounds = filtered.bounds
        extent = max(bounds.x_max - bounds.x_min, bounds.y_max - bounds.y_min)
        effective_cell = max(config.cell_size, extent / config.grid_max_dim)
        rasters = stages.run("rasterize", lambda: rasterize_returns(filtered, effective_cell))
        spec = rasters.spec

        max_stride = 1 << (config.lod_levels - 1)
        if max_stride >= min(spec.width, spec.height):
            raise PipelineError(
                "rasterize",
                ConfigError(
                    f"lod_levels={config.lod_levels} needs grid dimensions above "
                    f"{max_stride}, grid is {spec.width}x{spec.height}"
                ),
            )

        candidate = stages.run(
            "overhangs", lambda: remove_overhangs(rasters, config.overhang_gap)
        )
        ground_hm, anomaly_mask = stages.run(
            "classify", lambda: classify_ground(candidate, config.ground_params())
        )
        filled = stages.run("inpaint", lambda: inpaint(ground_hm))
        final_hm = stages.run(
            "smooth", lambda: smooth_median(filled, config.median_window)
        )

        def build_meshes():
            for level in range(config.lod_levels):
                mesh = heightmap_to_mesh(final_hm, level)
                export_obj(mesh, track(out_dir / f"mesh_lod{level}.obj"))

        stages.run("mesh", build_meshes)

        if config.texture_enabled:
            texture = stages.run("texture", lambda: bake_texture(filtered, spec))
            save_rgb_png(texture.pixels, track(out_dir / "diffuse.png"))
        normals = stages.run(
            "normals", lambda: normal_map(final_hm, config.normal_strength)
        )
        save_rgb_png(normals, track(out_dir / "normal.png"))

        def export_rasters():
            meta = save_heightmap_png(final_hm, track(out_dir / "heightmap.png"))
            track(meta)
            save_mask_png(anomaly_mask, track(out_dir / "anomaly_mask.png"))

        stages.run("export", export_rasters)
    except PipelineError:
        for path in created:
            path.unlink(missing_ok=True)
        raise

    anomaly_cells = int(anomaly_mask.sum())
    entries: dict = {f.name: getattr(config, f.name) for f in fields(config)}
    entries.update(
        effective_cell_size=effective_cell,
        grid_width=spec.width,
        grid_height=spec.height,
        points_loaded=points_loaded,
        outliers_removed=removed,
        points_after_outliers=len(filtered),
        anomaly_cells=anomaly_cells,
        anomaly_pct=100.0 * anomaly_cells / anomaly_mask.size,
    )
    cells = spec.width * spec.height
    for name, seconds in stages.seconds.items():
        entries[f"time_{name}"] = round(seconds, 6)
        work = points_loaded if name in ("load", "outliers", "rasterize") else cells
        entries[f"rate_{name}"] = round(work / seconds, 1) if seconds > 0 else float("inf")

    report = RunReport(entries)
    report.write(out_dir / "report.txt")
    return report


def _exit_code_for(exc: Exception) -> int:
    cause = exc.cause if isinstance(exc, PipelineError) else exc
    if isinstance(cause, ConfigError):
        return EXIT_BAD_CONFIG
    if isinstance(cause, ParseError):
        return EXIT_PARSE
    if isinstance(cause, NumericError):
        return EXIT_NUMERIC
    if isinstance(cause, OSError):
        return EXIT_IO
    return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dtmforge",
        description="Generate digital terrain models (heightmap, mesh, texture, "
        "normal map) from LiDAR point clouds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the full pipeline")
    run.add_argument("--config", help="key=value config file")
    run.add_argument("--input", help="point cloud (.xyz/.txt/.csv or .las)")
    run.add_argument("--out", help="output directory")
    run.add_argument("--cell-size", type=float, help="raster cell size in meters")
    run.add_argument("--degree", type=int, help="ground polynomial degree")
    run.add_argument("--th", type=float, help="outlier density threshold")
    run.add_argument("--no-texture", action="store_true", help="skip color texture baking")

    syn = sub.add_parser("synth", help="generate a synthetic test scene")
    syn.add_argument("--scene", required=True, choices=synth.SCENES)
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--out", required=True)
    syn.add_argument("--density", type=float, default=4.0, help="points per square meter")
    syn.add_argument("--extent", type=float, default=100.0, help="tile side in meters")
    syn.add_argument("--truth-cell", type=float, default=1.0, help="truth raster cell size")

    bench = sub.add_parser("bench", help="run the pipeline and print per-stage rates")
    bench.add_argument("--input", required=True)
    bench.add_argument("--cell-size", type=float)
    bench.add_argument("--grid-max-dim", type=int)
    bench.add_argument("--no-texture", action="store_true")
    return parser


def _config_from_args(args) -> PipelineConfig:
    config_path = getattr(args, "config", None)
    config = PipelineConfig.from_file(config_path) if config_path else PipelineConfig()
    if args.input:
        config.input_path = args.input
    if getattr(args, "out", None):
        config.output_dir = args.out
    if args.cell_size is not None:
        config.cell_size = args.cell_size
    if getattr(args, "degree", None) is not None:
        config.poly_degree = args.degree
    if getattr(args, "th", None) is not None:
        config.outlier_threshold_th = args.th
    if getattr(args, "no_texture", False):
        config.texture_enabled = False
    if getattr(args, "grid_max_dim", None) is not None:
        config.grid_max_dim = args.grid_max_dim
    return config


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            report = run_pipeline(_config_from_args(args))
            print(f"wrote artifacts to {report.entries['output_dir']}")
            return EXIT_OK
        if args.command == "synth":
            points, truth = synth.make_synthetic(
                args.scene,
                args.out,
                seed=args.seed,
                density=args.density,
                extent=args.extent,
                truth_cell_size=args.truth_cell,
            )
            print(f"wrote {points}\nwrote {truth}")
            return EXIT_OK
        if args.command == "bench":
            with tempfile.TemporaryDirectory() as tmp:
                config = _config_from_args(args)
                config.output_dir = tmp
                report = run_pipeline(config)
                print(f"points: {report.entries['points_loaded']}")
                for key, value in report.entries.items():
                    if key.startswith("rate_"):
                        stage = key[len("rate_") :]
                        unit = (
                            "points/s"
                            if stage in ("load", "outliers", "rasterize")
                            else "cells/s"
                        )
                        print(
                            f"{stage:>10}: {report.entries[f'time_{stage}']:.3f}s  "
                            f"{value:,.0f} {unit}"
                        )
            return EXIT_OK
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code_for(exc)
    except (ConfigError, ParseError, NumericError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code_for(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
