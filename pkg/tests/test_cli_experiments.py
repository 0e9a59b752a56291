"""Configuration parsing, preset orchestration, artifacts and the command line."""
import csv
import json

import numpy as np
import pytest

from sharpflow.analysis_harness import REPORT_COLUMNS, SWEEP_COLUMNS
from sharpflow.cli import main, solver_config
from sharpflow.config import DEFAULTS, PRESET_GRIDS, ConfigError, echo, parse_config
from sharpflow.experiments import EXIT_OK, EXIT_RUNTIME, EXIT_THRESHOLD, PRESETS, emit, preset_kwargs, run_preset
from sharpflow.interface_profile import Circle, ProfileParams, potential_field
from sharpflow.noise_engine import NoiseFamily, NoiseSpec
from sharpflow.sch_solver import Profile, SolverConfig, run
from sharpflow.trajectory_io import read_trajectory, write_trajectory


class TestParseConfig:
    def test_defaults(self):
        cfg = parse_config()
        assert {k: cfg[k] for k in DEFAULTS if k != "interface.center"} == {
            k: v for k, v in DEFAULTS.items() if k != "interface.center"}
        assert cfg["experiment.grid"] is None

    def test_echo_lists_every_key(self):
        out = echo(parse_config())
        assert all(k in out for k in DEFAULTS)

    @pytest.mark.parametrize("key, value", [
        ("solver.eps", -1.0), ("solver.eps", 0.6), ("noise.sigma", -0.5), ("noise.h", 0.0), ("noise.h", 2.0),
        ("noise.cutoff", 100), ("noise.cutoff", 2048), ("noise.family", "pink"), ("interface.radius", 0.7),
        ("experiment.replicas", 0), ("noise.seed", -3),
    ])
    def test_range_errors_name_the_key(self, key, value):
        with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
            parse_config(overrides={key: value})

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="solver.epsilon"):
            parse_config(overrides={"solver.epsilon": 0.1})

    def test_renorm_requires_divergence(self):
        with pytest.raises(ConfigError, match="renorm.mode"):
            parse_config(overrides={"renorm.mode": "pointwise"})

    def test_preset_grid(self):
        cfg = parse_config(overrides={"preset": "sup-bound"})
        np.testing.assert_allclose(cfg["experiment.grid"]["eps"], [1e-2, 10**-2.5, 1e-3, 10**-3.5, 1e-4])

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="preset"):
            parse_config(overrides={"preset": "nope"})

    def test_grid_is_derived(self):
        with pytest.raises(ConfigError, match="experiment.grid"):
            parse_config(overrides={"experiment.grid": {"eps": [1]}})

    def test_key_value_file(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("# demo\nsolver.eps = 0.05\nnoise.sigma = inf\nnoise.family = divergence\n"
                     "renorm.mode = average\ninterface.center = (0.4, 0.6)\ncheck.force_fail = true\n")
        cfg = parse_config(p)
        assert cfg["solver.eps"] == 0.05 and cfg["noise.sigma"] == float("inf")
        assert cfg["interface.center"] == (0.4, 0.6) and cfg["check.force_fail"] is True

    def test_json_file(self, tmp_path):
        p = tmp_path / "run.json"
        p.write_text(json.dumps({"solver": {"eps": 0.1, "T": 0.0}, "noise": {"cutoff": 32}}))
        cfg = parse_config(p)
        assert cfg["solver.eps"] == 0.1 and cfg["noise.cutoff"] == 32

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="does not exist"):
            parse_config(tmp_path / "absent.cfg")

    def test_malformed_line(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("solver.eps 0.1\n")
        with pytest.raises(ConfigError, match="bad.cfg:1"):
            parse_config(p)

    def test_solver_config_mapping(self):
        cfg = parse_config(overrides={"noise.family": "divergence", "renorm.mode": "pointwise", "noise.cutoff": 32,
                                      "solver.dt": 1e-6})
        scfg = solver_config(cfg)
        assert scfg.noise.family is NoiseFamily.DIVERGENCE and scfg.cutoff == 32 and scfg.dt == 1e-6
        assert solver_config(parse_config(overrides={"noise.family": "none"})).noise is None


class TestPresets:
    def test_table_covers_presets(self):
        assert set(PRESET_GRIDS) == set(PRESETS)

    def test_kwargs_from_config(self):
        cfg = parse_config(overrides={"experiment.replicas": 7, "noise.seed": 9, "experiment.theta": 0.25})
        kw = preset_kwargs("renorm-scaling", cfg, threads=2)
        assert kw == {"threads": 2, "seed": 9, "replicas": 7, "theta": 0.25}
        assert "replicas" not in preset_kwargs("profile-identity", cfg)

    def test_ou_variance_default(self, tmp_path):
        cfg = parse_config(overrides={"preset": "ou-variance"})
        assert run_preset("ou-variance", cfg, tmp_path) == EXIT_OK
        with open(tmp_path / "ou_variance_sweep.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == SWEEP_COLUMNS and len(rows) - 1 >= 5
        assert (tmp_path / "ou_variance_sweep.plt").exists()
        meta = json.loads((tmp_path / "metadata.json").read_text())
        assert meta["parameters"]["seed"] == 0 and meta["claim"] and "numpy" in meta["versions"]

    def test_forced_threshold_failure(self, tmp_path):
        cfg = parse_config(overrides={"check.force_fail": True})
        assert run_preset("profile-identity", cfg, tmp_path) == EXIT_THRESHOLD
        assert "FAIL  forced failure" in (tmp_path / "checks.txt").read_text()

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert run_preset("profile-identity", parse_config(), blocker / "out") == EXIT_RUNTIME

    def test_byte_identical_rerun(self, tmp_path):
        cfg = parse_config(overrides={"experiment.replicas": 200})
        for d in ("a", "b"):
            assert run_preset("ou-variance", cfg, tmp_path / d) == EXIT_OK
        for f in sorted((tmp_path / "a").glob("*.csv")):
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()
        ma = json.loads((tmp_path / "a" / "metadata.json").read_text())
        mb = json.loads((tmp_path / "b" / "metadata.json").read_text())
        ma.pop("timestamp"), mb.pop("timestamp")
        assert ma == mb

    def test_report_schema(self, tmp_path):
        out = PRESETS["stochastic-residual"](replicas=2, sigmas=(1.0, 2.0, 3.0), cutoff=32, eps=0.05, T=2e-4)
        emit(out, tmp_path)
        with open(tmp_path / "residual_report.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == REPORT_COLUMNS and len(rows) == 1 + 1 + 3 * 2
        for f in tmp_path.glob("*.csv"):
            assert f.read_text().splitlines()[0]


class TestTrajectoryIO:
    def test_roundtrip(self, tmp_path):
        geom = Circle((0.5, 0.5), 0.25)
        cfg = SolverConfig(eps=0.05, T=5e-5, dt=1e-5, cutoff=16, noise=NoiseSpec(cutoff=16), initial=Profile(geom),
                           cadence=2)
        rec = run(cfg)
        w_A = potential_field(geom, ProfileParams(0.05), 16)
        write_trajectory(tmp_path / "t", rec, w_A)
        back, w = read_trajectory(tmp_path / "t")
        assert back.times == rec.times and back.mass_series == rec.mass_series and back.meta == rec.meta
        np.testing.assert_array_equal(back.u_snapshots[-1].coeffs, rec.u_snapshots[-1].coeffs)
        np.testing.assert_array_equal(back.z_snapshots[-1].coeffs, rec.z_snapshots[-1].coeffs)
        np.testing.assert_array_equal(w.coeffs, w_A.coeffs)

    def test_not_a_trajectory(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_trajectory(tmp_path)


class TestCommandLine:
    def test_simulate_and_norms(self, tmp_path, capsys):
        out = tmp_path / "traj"
        code = main(["simulate", "--out", str(out), "--set", "solver.T=5e-5", "--set", "noise.cutoff=32",
                     "--set", "solver.eps=0.05", "--threads", "1"])
        assert code == 0
        text = capsys.readouterr().out
        assert "solver.eps = 0.05" in text and (out / "meta.json").exists()
        assert main(["norms", "--traj", str(out)]) == 0
        assert "L3(D_T)" in capsys.readouterr().out

    def test_env_overrides_out(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SHARPFLOW_OUT", str(tmp_path / "env"))
        assert main(["run", "--preset", "profile-identity", "--out", str(tmp_path / "flag"), "--threads", "1"]) == 0
        assert (tmp_path / "env" / "metadata.json").exists() and not (tmp_path / "flag").exists()

    def test_config_error_exit(self, tmp_path, capsys):
        assert main(["simulate", "--set", "solver.eps=-1", "--out", str(tmp_path)]) == EXIT_RUNTIME
        assert "solver.eps" in capsys.readouterr().err

    def test_check_subset(self, tmp_path, capsys):
        code = main(["check", "--preset", "profile-identity", "--out", str(tmp_path), "--threads", "1"])
        assert code == 0 and "PASS  profile-identity" in capsys.readouterr().out

    def test_seed_flag(self, tmp_path):
        assert main(["run", "--preset", "profile-identity", "--seed", "42", "--out", str(tmp_path), "--threads", "1"]) == 0
        meta = json.loads((tmp_path / "metadata.json").read_text())
        assert meta["config"]["noise.seed"] == 42
