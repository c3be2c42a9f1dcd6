import numpy as np
import pytest

from dtmforge.cli import (
    EXIT_BAD_CONFIG,
    EXIT_IO,
    PipelineConfig,
    main,
    run_pipeline,
)
from dtmforge.errors import ConfigError, PipelineError
from dtmforge.synth import eval_truth_ground, load_truth, make_synthetic

ARTIFACTS = [
    "heightmap.png",
    "heightmap.meta.txt",
    "mesh_lod0.obj",
    "diffuse.png",
    "normal.png",
    "anomaly_mask.png",
]


@pytest.fixture(scope="module")
def plane_scene(tmp_path_factory):
    out = tmp_path_factory.mktemp("plane_scene")
    return make_synthetic("plane", out, seed=3, density=1.0, extent=60.0)


@pytest.fixture(scope="module")
def boxes_scene(tmp_path_factory):
    out = tmp_path_factory.mktemp("boxes_scene")
    return make_synthetic("plane+boxes", out, seed=5, density=3.0, extent=80.0)


class TestConfig:
    def test_roundtrip_equality(self, tmp_path):
        config = PipelineConfig(
            input_path="in.xyz",
            output_dir="out",
            cell_size=0.75,
            grid_max_dim=512,
            outlier_threshold_th=2.5e-5,
            texture_enabled=False,
            lod_levels=3,
        )
        path = tmp_path / "cfg.txt"
        config.to_file(path)
        assert PipelineConfig.from_file(path) == config

    def test_comments_and_whitespace(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("# comment\ncell_size = 2.0\n\ninput_path=a.xyz\n")
        config = PipelineConfig.from_file(path)
        assert config.cell_size == 2.0
        assert config.input_path == "a.xyz"

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("not_a_key=1\n")
        with pytest.raises(ConfigError, match="unknown key"):
            PipelineConfig.from_file(path)

    def test_bad_value(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("cell_size=abc\n")
        with pytest.raises(ConfigError):
            PipelineConfig.from_file(path)

    def test_validate_catches_bad_ranges(self):
        with pytest.raises(ConfigError):
            PipelineConfig(input_path="x", cell_size=-1.0).validate()
        with pytest.raises(ConfigError):
            PipelineConfig(input_path="x", median_window=4).validate()
        with pytest.raises(ConfigError):
            PipelineConfig().validate()  # missing input


class TestRunPipeline:
    def test_plane_scene_produces_all_artifacts_with_zero_anomalies(
        self, plane_scene, tmp_path
    ):
        points, _ = plane_scene
        out = tmp_path / "out"
        config = PipelineConfig(input_path=str(points), output_dir=str(out), cell_size=1.0)
        report = run_pipeline(config)
        for name in ARTIFACTS + ["report.txt"]:
            assert (out / name).exists(), name
        assert report.entries["anomaly_pct"] == 0.0
        assert report.entries["points_loaded"] == 3600

    def test_boxes_scene_anomaly_pct_tracks_footprint(self, boxes_scene, tmp_path):
        points, truth_path = boxes_scene
        truth = load_truth(truth_path)
        footprint_pct = 100.0 * truth["box_mask"].mean()
        out = tmp_path / "out"
        config = PipelineConfig(input_path=str(points), output_dir=str(out), cell_size=1.0)
        report = run_pipeline(config)
        assert abs(report.entries["anomaly_pct"] - footprint_pct) <= 2.0

    def test_missing_input_aborts_without_artifacts(self, tmp_path):
        out = tmp_path / "out"
        config = PipelineConfig(input_path=str(tmp_path / "nope.xyz"), output_dir=str(out))
        with pytest.raises(PipelineError) as excinfo:
            run_pipeline(config)
        assert excinfo.value.stage == "load"
        assert not list(out.glob("*"))

    def test_failure_removes_partial_outputs(self, tmp_path, rng):
        # colorless input with texturing on: meshes export first, then the
        # texture stage fails and must clean them up
        points = tmp_path / "plain.xyz"
        np.savetxt(points, rng.random((400, 3)) * [50.0, 50.0, 2.0], fmt="%.4f")
        out = tmp_path / "out"
        config = PipelineConfig(
            input_path=str(points), output_dir=str(out), cell_size=2.0, poly_degree=1
        )
        with pytest.raises(PipelineError) as excinfo:
            run_pipeline(config)
        assert excinfo.value.stage == "texture"
        assert not list(out.glob("*.obj")) and not list(out.glob("*.png"))

    def test_no_texture_skips_diffuse_only(self, plane_scene, tmp_path):
        points, _ = plane_scene
        out = tmp_path / "out"
        config = PipelineConfig(
            input_path=str(points),
            output_dir=str(out),
            cell_size=1.0,
            texture_enabled=False,
        )
        run_pipeline(config)
        assert not (out / "diffuse.png").exists()
        assert (out / "normal.png").exists()

    def test_texture_toggle_changes_no_heightmap_or_mesh_bytes(
        self, plane_scene, tmp_path
    ):
        points, _ = plane_scene
        outs = []
        for flag in (True, False):
            out = tmp_path / f"out_{flag}"
            run_pipeline(
                PipelineConfig(
                    input_path=str(points),
                    output_dir=str(out),
                    cell_size=1.0,
                    texture_enabled=flag,
                )
            )
            outs.append(out)
        for name in ("heightmap.png", "mesh_lod0.obj", "normal.png"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    def test_grid_max_dim_raises_cell_size(self, plane_scene, tmp_path):
        points, _ = plane_scene
        out = tmp_path / "out"
        config = PipelineConfig(
            input_path=str(points),
            output_dir=str(out),
            cell_size=0.05,
            grid_max_dim=32,
        )
        report = run_pipeline(config)
        assert report.entries["effective_cell_size"] > 0.05
        assert report.entries["grid_width"] <= 32
        assert report.entries["grid_height"] <= 32

    def test_lod_levels_validated_against_grid(self, plane_scene, tmp_path):
        points, _ = plane_scene
        config = PipelineConfig(
            input_path=str(points),
            output_dir=str(tmp_path / "out"),
            cell_size=1.0,
            lod_levels=12,
        )
        with pytest.raises(PipelineError) as excinfo:
            run_pipeline(config)
        assert isinstance(excinfo.value.cause, ConfigError)

    def test_report_written_as_key_value_text(self, plane_scene, tmp_path):
        points, _ = plane_scene
        out = tmp_path / "out"
        run_pipeline(
            PipelineConfig(input_path=str(points), output_dir=str(out), cell_size=1.0)
        )
        lines = (out / "report.txt").read_text().splitlines()
        keys = {line.split("=", 1)[0] for line in lines}
        assert {"effective_cell_size", "points_loaded", "anomaly_pct", "time_load"} <= keys
        assert all("=" in line for line in lines)


class TestMakeSynthetic:
    def test_plane_density_one_exact_count_and_heights(self, tmp_path):
        points, truth_path = make_synthetic("plane", tmp_path, seed=1, density=1.0, extent=100.0)
        data = np.loadtxt(points)
        assert data.shape[0] == 10_000
        truth = load_truth(truth_path)
        expect = eval_truth_ground(truth, data[:, 0], data[:, 1])
        assert np.abs(data[:, 2] - expect).max() <= 1e-5

    def test_same_seed_same_bytes_different_seed_differs(self, tmp_path):
        a, _ = make_synthetic("rolling", tmp_path / "a", seed=9, density=0.5, extent=40.0)
        b, _ = make_synthetic("rolling", tmp_path / "b", seed=9, density=0.5, extent=40.0)
        c, _ = make_synthetic("rolling", tmp_path / "c", seed=10, density=0.5, extent=40.0)
        assert a.read_bytes() == b.read_bytes()
        assert a.read_bytes() != c.read_bytes()

    def test_unknown_scene(self, tmp_path):
        with pytest.raises(ValueError, match="unknown scene"):
            make_synthetic("volcano", tmp_path)

    def test_truth_masks_cover_declared_fractions(self, tmp_path):
        _, truth_path = make_synthetic(
            "rolling+boxes+canopy", tmp_path, seed=2, density=0.5, extent=100.0
        )
        truth = load_truth(truth_path)
        assert truth["box_mask"].mean() == pytest.approx(0.08, abs=0.005)
        assert truth["canopy_mask"].any()


class TestCommandLine:
    def test_run_exit_codes(self, plane_scene, tmp_path, capsys):
        points, _ = plane_scene
        out = tmp_path / "cli_out"
        code = main(
            ["run", "--input", str(points), "--out", str(out), "--cell-size", "1.0"]
        )
        assert code == 0
        assert (out / "heightmap.png").exists()

    def test_missing_input_is_io_exit(self, tmp_path, capsys):
        code = main(
            ["run", "--input", str(tmp_path / "ghost.xyz"), "--out", str(tmp_path / "o")]
        )
        assert code == EXIT_IO
        assert "load" in capsys.readouterr().err

    def test_bad_config_exit(self, plane_scene, tmp_path, capsys):
        points, _ = plane_scene
        code = main(
            [
                "run",
                "--input",
                str(points),
                "--out",
                str(tmp_path / "o"),
                "--cell-size",
                "-2.0",
            ]
        )
        assert code == EXIT_BAD_CONFIG

    def test_config_file_with_overrides(self, plane_scene, tmp_path):
        points, _ = plane_scene
        cfg = tmp_path / "cfg.txt"
        PipelineConfig(input_path="overridden", cell_size=1.0).to_file(cfg)
        out = tmp_path / "o"
        code = main(
            ["run", "--config", str(cfg), "--input", str(points), "--out", str(out), "--no-texture"]
        )
        assert code == 0
        assert not (out / "diffuse.png").exists()

    def test_synth_subcommand(self, tmp_path, capsys):
        code = main(
            [
                "synth",
                "--scene",
                "plane",
                "--seed",
                "4",
                "--out",
                str(tmp_path),
                "--density",
                "0.5",
                "--extent",
                "30",
            ]
        )
        assert code == 0
        assert (tmp_path / "plane.xyz").exists()
        assert (tmp_path / "plane_truth.npz").exists()

    def test_bench_subcommand_prints_rates(self, plane_scene, capsys):
        points, _ = plane_scene
        code = main(["bench", "--input", str(points), "--cell-size", "1.0"])
        assert code == 0
        out = capsys.readouterr().out
        assert "points/s" in out and "cells/s" in out
