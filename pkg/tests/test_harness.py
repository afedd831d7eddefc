"""Config loading, file formats, experiment harness, and CLI tests."""

import json

import numpy as np
import pytest

from thermobs import cli, experiment, fileio
from thermobs.config import load_bundled, load_config, parse_config
from thermobs.errors import ConfigurationError, SchedulingError

COARSE = {
    "domain_cm": [2.0, 1.0, 1.0],
    "dx_cm": 0.1,
    "dt_s": 0.02,
    "horizon_s": 0.6,
    "initial_temp_K": 300.0,
    "material": {"rho_kg_m3": 700.0, "k_W_mK": 0.5934, "cp_J_kgK": 4000.0},
    "boundary": {"top": {"kind": "neumann", "ghost": "copy"},
                 "sides": {"kind": "dirichlet", "value_K": 300.0}},
    "source": {"sigma_cm": 0.2},
    "schedule": [
        {"t_start_s": 0.0, "t_end_s": 0.2, "start_cm": [0.5, 0.0, 0.0],
         "velocity_cm_s": [1.0, 0.0, 0.0], "power_W": 5.0},
        {"t_start_s": 0.5, "t_end_s": 0.6, "start_cm": [1.2, 0.0, 0.0],
         "velocity_cm_s": [1.0, 0.0, 0.0], "power_W": 5.0}
    ],
    "disturbance": {"eps_w2": 1e-4, "c_w": 200.0, "n_modes": 4,
                    "temporal_freqs_hz": [0.7, 1.3], "fill": 0.8},
    "sensors": {"every": 1, "noise_std_K": 0.0},
    "observer": {"a0_factor": 2.0, "gain": 50.0, "adaptation_gain": 0.5,
                 "adapt": True, "beta": 100.0, "history_len": 7},
    "solver": {"gs_tol_K": 1e-6, "gs_max_iters": 500},
    "seed": 7
}


def write_coarse(tmp_path, **overrides):
    cfg = json.loads(json.dumps(COARSE))
    cfg.update(overrides)
    path = tmp_path / "coarse.json"
    path.write_text(json.dumps(cfg))
    return path


@pytest.fixture(scope="module")
def coarse_cfg():
    return parse_config(json.loads(json.dumps(COARSE)))


class TestConfig:
    def test_bundled_two_cut_scenario(self):
        cfg = load_bundled()
        assert cfg.grid.node_counts == (81, 41, 41)
        assert cfg.horizon == 2.0
        assert cfg.solver.dt == 0.02
        assert cfg.material.diffusivity == pytest.approx(0.5934 / 2.8e6)
        assert cfg.observer.gain == 50.0

    def test_zero_dx_rejected_with_field_path(self, tmp_path):
        path = write_coarse(tmp_path, dx_cm=0.0)
        with pytest.raises(ConfigurationError, match="dx_cm"):
            load_config(path)

    def test_missing_field_names_path(self, tmp_path):
        cfg = json.loads(json.dumps(COARSE))
        del cfg["material"]
        path = tmp_path / "c.json"
        path.write_text(json.dumps(cfg))
        with pytest.raises(ConfigurationError, match="material"):
            load_config(path)

    def test_infeasible_cut_rejected(self, tmp_path):
        cfg = json.loads(json.dumps(COARSE))
        cfg["schedule"][1]["t_end_s"] = 5.0   # runs off the +x face
        path = tmp_path / "c.json"
        path.write_text(json.dumps(cfg))
        with pytest.raises(SchedulingError, match="A5"):
            load_config(path)

    def test_invalid_json_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigurationError):
            load_config(path)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config(tmp_path / "nope.json")


class TestFileFormats:
    def test_tf3d_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        values = rng.normal(size=(7, 5, 3))
        path = tmp_path / "f.tf3d"
        fileio.write_tf3d(path, values, 1.25)
        back, t = fileio.read_tf3d(path)
        assert t == 1.25
        assert np.array_equal(back, values)
        assert path.stat().st_size == 32 + values.size * 8

    def test_tf3d_magic_checked(self, tmp_path):
        path = tmp_path / "f.tf3d"
        path.write_bytes(b"XXXX" + b"\0" * 60)
        with pytest.raises(ConfigurationError):
            fileio.read_tf3d(path)

    def test_frame_csv_roundtrip(self, tmp_path):
        values = np.arange(12.0).reshape(3, 4) + 300.0
        path = tmp_path / "frame.csv"
        fileio.write_frame_csv(path, values, t=0.76, u=0.0, delta_eta=5e-4)
        back, t, u, de = fileio.read_frame_csv(path)
        assert np.array_equal(back, values)
        assert (t, u, de) == (0.76, 0.0, 5e-4)

    def test_pgm_uniform_for_constant_field(self, tmp_path):
        path = tmp_path / "img.pgm"
        fileio.write_pgm(path, np.full((4, 6), 300.0), 290.0, 310.0)
        data = path.read_bytes()
        header, _, payload = data.partition(b"255\n")
        assert payload == bytes([128]) * 24
        assert (tmp_path / "img.pgm.range.txt").exists()

    def test_pgm_degenerate_range_rejected(self, tmp_path):
        with pytest.raises(ConfigurationError):
            fileio.write_pgm(tmp_path / "img.pgm", np.zeros((2, 2)), 300.0, 300.0)


@pytest.fixture(scope="module")
def coarse_result(coarse_cfg):
    return experiment.run_experiment(coarse_cfg)


class TestExperiment:
    def test_rows_cover_horizon(self, coarse_cfg, coarse_result):
        rows = coarse_result.rows
        assert len(rows) == 31
        assert rows[0].t == 0.0
        assert rows[-1].t == pytest.approx(0.6)

    def test_norm_inequality(self, coarse_cfg, coarse_result):
        # err_inf >= err_l2 / sqrt(m(Omega)) holds with trapezoid weights.
        root_vol = np.sqrt(coarse_cfg.grid.volume)
        for row in coarse_result.rows:
            assert row.err_inf >= row.err_l2 / root_vol - 1e-15

    def test_estimates_only_in_power_gap(self, coarse_result):
        # History is 7 frames at 0.02 s; the gap starts at 0.2 s, so the
        # first full quiet window closes at 0.34 s.
        assert coarse_result.estimates
        for est in coarse_result.estimates:
            assert 0.33 <= est.t <= 0.501

    def test_determinism_byte_identical_csv(self, tmp_path, coarse_cfg):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        experiment.run_experiment(coarse_cfg, outdir=out1)
        experiment.run_experiment(coarse_cfg, outdir=out2)
        b1 = (out1 / "metrics.csv").read_bytes()
        b2 = (out2 / "metrics.csv").read_bytes()
        assert b1 == b2

    def test_sweep_replay_matches_independent_run(self, coarse_cfg, coarse_result):
        results = experiment.sweep(coarse_cfg, [coarse_cfg.observer.adaptation_gain])
        swept = results[coarse_cfg.observer.adaptation_gain]
        assert len(swept.rows) == len(coarse_result.rows)
        for r1, r2 in zip(swept.rows, coarse_result.rows):
            assert r1 == r2

    def test_sweep_repeated_gain_identical(self, coarse_cfg):
        results = experiment.sweep(coarse_cfg, [0.2])
        again = experiment.sweep(coarse_cfg, [0.2])
        for r1, r2 in zip(results[0.2].rows, again[0.2].rows):
            assert r1 == r2

    def test_empty_sweep_rejected(self, coarse_cfg):
        with pytest.raises(ConfigurationError):
            experiment.sweep(coarse_cfg, [])

    def test_metadata_written(self, tmp_path, coarse_cfg):
        out = tmp_path / "meta"
        experiment.run_experiment(coarse_cfg, outdir=out)
        text = (out / "run_metadata.csv").read_text()
        assert "eps_w2_certified" in text
        assert "grid_nodes,21x11x11" in text

    def test_gain_bound_check_fills_report_columns(self, coarse_cfg):
        import dataclasses

        cfg = dataclasses.replace(
            coarse_cfg,
            observer=dataclasses.replace(coarse_cfg.observer, bound_check=True),
        )
        result = experiment.run_experiment(cfg)
        checked = [r for r in result.rows if r.c_gamma is not None]
        assert checked
        assert any(r.bound_satisfied is not None for r in checked)

    def test_invalid_adaptation_gain_rejected(self, coarse_cfg, coarse_result):
        with pytest.raises(ConfigurationError):
            experiment.run_observer(coarse_cfg, coarse_result.trajectory,
                                    adaptation_gain=1.5)

    def test_frame_decimation_slows_estimator_clock(self, coarse_cfg, coarse_result):
        import dataclasses

        cfg = dataclasses.replace(
            coarse_cfg,
            observer=dataclasses.replace(coarse_cfg.observer, frame_decimation=2),
        )
        result = experiment.run_observer(cfg, coarse_result.trajectory)
        assert result.estimates
        # First full quiet window: 7 frames spaced 0.04 s from the 0.2 s gap start.
        assert min(e.t for e in result.estimates) >= 0.2 + 6 * 0.04 - 1e-9

    def test_slice_field_plane_parse(self, coarse_cfg):
        values = np.zeros(coarse_cfg.grid.node_counts)
        values[:, :, -1] = 7.0
        out = experiment.slice_field(values, coarse_cfg.grid, "z=0")
        assert np.all(out == 7.0)
        with pytest.raises(ConfigurationError):
            experiment.slice_field(values, coarse_cfg.grid, "z=5")
        with pytest.raises(ConfigurationError):
            experiment.slice_field(values, coarse_cfg.grid, "bogus")


class TestCli:
    def test_bad_config_exits_2(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{}")
        assert cli.main(["simulate", str(path)]) == 2
        assert "configuration error" in capsys.readouterr().err

    def test_simulate_then_estimate(self, tmp_path, capsys):
        cfg_path = write_coarse(tmp_path)
        out = tmp_path / "sim"
        assert cli.main(["simulate", str(cfg_path), "--out", str(out),
                         "--dump-every", "10"]) == 0
        frames = sorted((out / "frames").glob("frame_*.csv"))
        assert len(frames) == 31
        assert (out / "fields" / "plant_000000.tf3d").exists()
        assert cli.main(["estimate", str(out / "frames")]) == 0
        text = capsys.readouterr().out
        assert "ahat=" in text

    def test_observe_and_sweep(self, tmp_path, capsys):
        cfg_path = write_coarse(tmp_path)
        assert cli.main(["observe", str(cfg_path), "--L", "0.3",
                         "--out", str(tmp_path / "obs")]) == 0
        assert (tmp_path / "obs" / "metrics.csv").exists()
        assert cli.main(["sweep", str(cfg_path), "--L", "0,0.5",
                         "--out", str(tmp_path / "sw")]) == 0
        assert (tmp_path / "sw" / "sweep_metrics.csv").exists()

    def test_solver_failure_exits_3_with_partial_frames(self, tmp_path, capsys):
        cfg_path = write_coarse(
            tmp_path, solver={"gs_tol_K": 1e-14, "gs_max_iters": 1}
        )
        out = tmp_path / "partial"
        assert cli.main(["simulate", str(cfg_path), "--out", str(out)]) == 3
        assert "solver error" in capsys.readouterr().err
        assert list((out / "frames").glob("frame_*.csv"))

    def test_estimate_from_tf3d_dumps(self, tmp_path, capsys):
        cfg_path = write_coarse(tmp_path)
        out = tmp_path / "sim3"
        assert cli.main(["simulate", str(cfg_path), "--out", str(out),
                         "--dump-every", "1"]) == 0
        assert cli.main(["estimate", str(out / "fields"),
                         "--delta-eta", "0.001"]) == 0
        assert "ahat=" in capsys.readouterr().out

    def test_slice_command(self, tmp_path):
        cfg_path = write_coarse(tmp_path)
        out = tmp_path / "sim2"
        assert cli.main(["simulate", str(cfg_path), "--out", str(out),
                         "--dump-every", "30"]) == 0
        dump = out / "fields" / "plant_000030.tf3d"
        img = tmp_path / "top.pgm"
        assert cli.main(["slice", str(dump), "--plane", "z=0",
                         "--config", str(cfg_path), "--out", str(img)]) == 0
        assert img.exists()
