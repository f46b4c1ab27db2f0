"""Config layering, run drivers and the command line."""
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from kglab import harness, kernels
from kglab.cli import main
from kglab.harness import ConfigError, RunConfig
from kglab.spectral import Field, GridSpec

DATA = Path(__file__).parent / "data"

SMALL = ["--box-period", "8*pi", "--plane-points", "32", "--mode-cutoff", "3",
         "--t-end", "3", "--dt", "0.25", "--diagnostics-every", "2", "--fit-t-min", "1"]


def small_cfg(tmp_path, **kw):
    base = dict(box_period=8 * math.pi, plane_points=32, mode_cutoff=3, t_end=3.0, dt=0.25,
                diagnostics_every=2, fit_t_min=1.0, output_dir=str(tmp_path / "out"))
    base.update(kw)
    return RunConfig(**base).validate()


class TestConfig:
    def test_defaults_are_valid(self):
        cfg = RunConfig().validate()
        assert cfg.grid().shape == (256, 256, 17)
        assert cfg.dt <= cfg.grid().h_max

    def test_layering(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("# experiment\nbox_period = 16*pi\nplane_points = 64\nepsilon0 = 2e-3\nt_end = 10  # short\n")
        env = {"KGLAB_EPSILON0": "5e-4", "KGLAB_T_END": "12", "OTHER": "x"}
        cfg = harness.load_config(str(p), {"t_end": "8", "seed": None}, environ=env)
        assert cfg.box_period == pytest.approx(16 * math.pi)
        assert cfg.epsilon0 == 5e-4
        assert cfg.t_end == 8.0

    def test_text_roundtrip(self):
        cfg = RunConfig(box_period=16 * math.pi, coeffs="u2", seed=4)
        assert RunConfig(**harness.parse_config_text(cfg.to_text())) == cfg

    @pytest.mark.parametrize("text", ["bogus = 1\n", "plane_points = many\n", "just words\n"])
    def test_bad_text(self, text):
        with pytest.raises(ConfigError):
            harness.parse_config_text(text)

    @pytest.mark.parametrize("kw", [{"t_end": 200.0}, {"dt": 1.0}, {"epsilon0": 0.0},
                                    {"diagnostics_every": 0}, {"plane_points": 7},
                                    {"coeffs": "no-such-preset"}, {"report_every": -1}])
    def test_invariants(self, kw):
        with pytest.raises(ConfigError):
            RunConfig(**kw).validate()

    def test_coefficient_file(self, tmp_path):
        from kglab.nonlinearity import preset

        p = tmp_path / "c.json"
        d = preset("mixed").to_dict()
        p.write_text(json.dumps({k: np.asarray(v).tolist() for k, v in d.items()}))
        c = RunConfig(coeffs=str(p)).nonlinearity()
        assert np.array_equal(c.g, preset("mixed").g)
        p.write_text("{}")
        with pytest.raises(ConfigError):
            RunConfig(coeffs=str(p)).nonlinearity()

    def test_eval_number(self):
        assert harness.eval_number("64 * pi") == pytest.approx(64 * math.pi)
        assert harness.eval_number("pi") == math.pi
        assert harness.eval_number("2.5") == 2.5


class TestSimulate:
    def test_deterministic_outputs(self, tmp_path):
        for name in ("a", "b"):
            assert main(["simulate", *SMALL, "--output-dir", str(tmp_path / name), "--seed", "3"]) == 0
        for f in ("series.csv", "norms.csv"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
        summary = json.loads((tmp_path / "a" / "summary.json").read_text())
        assert summary["fixed_point_residual"] == 0.0
        assert summary["realness_max"] < 1e-11

    def test_seed_changes_data(self, tmp_path):
        a = harness.initial_data(small_cfg(tmp_path, seed=0))[0]
        b = harness.initial_data(small_cfg(tmp_path, seed=5))[0]
        assert not np.allclose(a.coeffs, b.coeffs)

    def test_linear_flags(self, tmp_path):
        cfg = small_cfg(tmp_path, coeffs="zero", t_end=10.0, dt=0.25, diagnostics_every=4)
        res = harness.run_simulation(cfg)
        flags = res.summary["flags"]
        assert flags["energy_conserved"] and flags["profile_stationary"]
        assert res.summary["profile_drift_max"] < 1e-10

    def test_outputs_reparse(self, tmp_path):
        cfg = small_cfg(tmp_path, report_every=1)
        res = harness.run_simulation(cfg)
        harness.write_simulation(cfg, res)
        out = Path(cfg.output_dir)
        rows = list(harness.csv.DictReader((out / "series.csv").open()))
        assert tuple(rows[0]) == harness.SERIES_COLUMNS and len(rows) == len(res.series)
        from kglab.norms import NormReport

        norm_rows = list(harness.csv.DictReader((out / "norms.csv").open()))
        assert NormReport.from_flat(norm_rows[-1]).to_flat() == res.reports[-1].to_flat()
        assert RunConfig(**harness.parse_config_text((out / "config.txt").read_text())) == cfg

    def test_blowup_exit_and_snapshot(self, tmp_path, capsys):
        code = main(["simulate", *SMALL, "--epsilon0", "40", "--coeffs", "u2",
                     "--output-dir", str(tmp_path / "bad")])
        assert code == harness.EXIT_NUMERICAL
        err = capsys.readouterr().err
        assert "last good snapshot" in err
        assert (tmp_path / "bad" / "last_good.npz").exists()

    def test_config_error_exit(self, tmp_path):
        assert main(["simulate", "--t-end", "1000", "--output-dir", str(tmp_path)]) == harness.EXIT_CONFIG
        assert main(["simulate", "--config", str(tmp_path / "missing.cfg")]) == harness.EXIT_CONFIG

    def test_module_entry_point(self, tmp_path):
        r = subprocess.run([sys.executable, "-m", "kglab", "simulate", "--dt", "5"], capture_output=True,
                           text=True, cwd=tmp_path)
        assert r.returncode == harness.EXIT_CONFIG
        assert "dt must lie" in r.stderr


class TestNormReportCommand:
    def test_golden(self, tmp_path):
        out = tmp_path / "r.json"
        assert main(["norm-report", str(DATA / "golden_field.json"), "--out", str(out)]) == 0
        got = json.loads(out.read_text())
        want = json.loads((DATA / "golden_report.json").read_text())
        for k, v in want.items():
            assert got[k] == pytest.approx(v, rel=1e-10)

    def test_zero_field(self, tmp_path, capsys):
        g = GridSpec(box_period=4 * math.pi, plane_points=16, mode_cutoff=3)
        p = tmp_path / "zero.json"
        p.write_text(harness.field_file_text(Field.zeros(g), Field.zeros(g)))
        assert main(["norm-report", str(p)]) == 0
        d = json.loads(capsys.readouterr().out)
        assert all(v == 0 for k, v in d.items() if k not in ("z_k", "z_l"))

    @pytest.mark.parametrize("payload,where", [
        (b'{"grid": {"box_period": 1.0, "plane_points": 16, "mode_cutoff": 3}, "u": [1, 2', None),
        (b'\xff\xfe', 0),
        (b'[1, 2]', 0),
        (b'{"grid": {"box_period": 12.0, "plane_points": 16, "mode_cutoff": 3}, "t": 0, '
         b'"u": {"re": [[1.0]], "im": [[0.0]]}}', b'"u"'),
    ])
    def test_malformed_input(self, tmp_path, capsys, payload, where):
        p = tmp_path / "bad.json"
        p.write_bytes(payload)
        out = tmp_path / "report.json"
        assert main(["norm-report", str(p), "--out", str(out)]) == harness.EXIT_CONFIG
        assert not out.exists() and not (tmp_path / "report.json.tmp").exists()
        err = capsys.readouterr().err
        assert "byte offset" in err
        with pytest.raises(harness.FieldParseError) as e:
            harness.parse_field_file(payload)
        if isinstance(where, bytes):
            assert e.value.offset == payload.index(where)
        elif where is not None:
            assert e.value.offset == where

    def test_nonfinite_rejected(self):
        g = GridSpec(box_period=4 * math.pi, plane_points=16, mode_cutoff=3)
        text = harness.field_file_text(Field.zeros(g), Field.zeros(g)).replace("[[[0.0", "[[[NaN", 1)
        with pytest.raises(harness.FieldParseError):
            harness.parse_field_file(text.encode())


class TestDecayScan:
    def test_empty_list_is_usage_error(self, tmp_path):
        assert main(["decay-scan", *SMALL, "--epsilons", "", "--output-dir", str(tmp_path)]) == harness.EXIT_CONFIG
        assert main(["decay-scan", *SMALL, "--output-dir", str(tmp_path)]) == harness.EXIT_CONFIG

    def test_unsorted_or_nonpositive(self, tmp_path):
        cfg = small_cfg(tmp_path)
        with pytest.raises(ConfigError):
            harness.decay_scan(cfg, [1e-3, 4e-3, 2e-3])
        with pytest.raises(ConfigError):
            harness.decay_scan(cfg, [1e-3, -1e-3])

    def test_small_scan(self, tmp_path):
        out = tmp_path / "scan.csv"
        code = main(["decay-scan", *SMALL, "--epsilons", "4e-3,2e-3", "--output-dir", str(tmp_path),
                     "--out", str(out)])
        rows = list(harness.csv.DictReader(out.open()))
        assert [r["coeffs"] for r in rows] == ["mixed", "mixed", "zero"]
        e = [float(r["energy_exponent"]) for r in rows]
        assert e[0] > e[1] > 0 and abs(e[2]) < 1e-3
        assert code == 0

    def test_trend_check(self):
        good = [(4e-3, "mixed", 0.004, 0, 1), (2e-3, "mixed", 0.002, 0, 1), (1e-3, "mixed", 0.001, 0, 1),
                (1e-3, "zero", 0.0, 0, 1)]
        assert harness.check_scan_trend(good) == []
        one = [(4e-3, "mixed", 0.004, 0, 1), (2e-3, "mixed", 0.005, 0, 1), (1e-3, "mixed", 0.001, 0, 1)]
        assert harness.check_scan_trend(one) == []
        two = [(4e-3, "mixed", 0.001, 0, 1), (2e-3, "mixed", 0.002, 0, 1), (1e-3, "mixed", 0.003, 0, 1)]
        assert harness.check_scan_trend(two)
        bad_control = good[:-1] + [(1e-3, "zero", 0.01, 0, 1)]
        assert any("control" in p for p in harness.check_scan_trend(bad_control))


class TestKernelVerify:
    def test_uncorrupted_low_shell_passes(self, capsys):
        assert main(["kernel-verify", "--k-range", "-1", "--n-range", "0"]) == harness.EXIT_OK
        rows = kernels.reports_from_csv(capsys.readouterr().out)
        assert len(rows) == 7 and all(math.isfinite(r["ratio"]) for r in rows)

    def test_corrupted_bound_exits_nonzero(self, capsys):
        code = main(["kernel-verify", "--k-range", "-1", "--n-range", "0", "--corrupt-bound"])
        assert code == harness.EXIT_CERTIFICATION
        assert "stability" in capsys.readouterr().err

    def test_tolerance_study(self, tmp_path):
        a, _ = harness.kernel_verify([-1, 1], [0, 2], [1, 10, 50], 1e-5)
        b, _ = harness.kernel_verify([-1, 1], [0, 2], [1, 10, 50], 1e-6)
        for x, y in zip(a, b):
            assert x.ratio == pytest.approx(y.ratio, rel=5e-4)

    def test_csv_to_file(self, tmp_path):
        out = tmp_path / "k.csv"
        main(["kernel-verify", "--k-range", "0", "--n-range", "1", "--t-range", "1,2", "--out", str(out)])
        assert out.read_text().startswith("k,n,t,sup_abs,bound,ratio\n")

    def test_bad_range_is_usage_error(self):
        assert main(["kernel-verify", "--k-range", "a:b"]) == harness.EXIT_CONFIG
