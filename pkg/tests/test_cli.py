import json
import os
import stat

import numpy as np
import pytest

from mqlv.cli import main
from mqlv.vasicek import read_paths_csv, write_series_csv


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestGenerate:
    def test_writes_expected_row_count(self, tmp_path, capsys):
        out = tmp_path / "paths.csv"
        code, stdout, _ = run(capsys, "generate", "--paths", "50", "--seed", "1", "--out", str(out))
        assert code == 0
        assert "50 paths x 6 points" in stdout
        lines = out.read_text().splitlines()
        assert len(lines) == 1 + 50 * 6  # header + paths * (steps+1)

    def test_default_flags_full_size_row_count(self, tmp_path, capsys):
        # default parameters, 5 steps: 40000 paths -> 240000 data rows
        out = tmp_path / "full.csv"
        code, _, _ = run(capsys, "generate", "--paths", "40000", "--seed", "1", "--out", str(out))
        assert code == 0
        with open(out) as fh:
            n_lines = sum(1 for _ in fh)
        assert n_lines == 1 + 40000 * 6

    def test_zero_vol_paths_identical(self, tmp_path, capsys):
        out = tmp_path / "paths.csv"
        code, _, _ = run(capsys, "generate", "--sigma", "0", "--paths", "10", "--out", str(out))
        assert code == 0
        grid = read_paths_csv(out)
        assert np.all(grid.values == grid.values[0])

    def test_same_seed_identical_files(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run(capsys, "generate", "--paths", "40", "--seed", "3", "--out", str(a))[0] == 0
        assert run(capsys, "generate", "--paths", "40", "--seed", "3", "--out", str(b))[0] == 0
        assert a.read_bytes() == b.read_bytes()

    def test_unwritable_out_is_io_error(self, tmp_path, capsys):
        code, _, err = run(capsys, "generate", "--paths", "10", "--out", str(tmp_path / "nodir" / "x.csv"))
        assert code == 3
        assert "i/o error" in err


class TestProbability:
    def test_deep_in_the_money(self, capsys):
        code, stdout, _ = run(capsys, "probability", "--paths", "1200", "--strike", "0.0001", "--seed", "2")
        assert code == 0
        rec = json.loads(stdout.splitlines()[0])
        assert rec["probability"] == pytest.approx(1.0, abs=1e-4)

    def test_deep_out_of_the_money(self, capsys):
        code, stdout, _ = run(capsys, "probability", "--paths", "1200", "--strike", "10", "--seed", "2")
        assert code == 0
        rec = json.loads(stdout.splitlines()[0])
        assert rec["probability"] == pytest.approx(0.0, abs=1e-4)

    def test_reads_paths_file(self, tmp_path, capsys):
        out = tmp_path / "paths.csv"
        run(capsys, "generate", "--paths", "1500", "--seed", "4", "--out", str(out))
        code, stdout, _ = run(capsys, "probability", "--paths-file", str(out), "--strike", "1.0")
        assert code == 0
        rec = json.loads(stdout.splitlines()[0])
        assert rec["n_paths"] == 1500
        assert 0.3 < rec["probability"] < 0.7

    def test_output_dir_writes_fit_files(self, tmp_path, capsys):
        outdir = tmp_path / "fit"
        code, stdout, _ = run(
            capsys, "probability", "--paths", "1200", "--strike", "1.0", "--seed", "2",
            "--output-dir", str(outdir),
        )
        assert code == 0
        assert (outdir / "estimate.json").exists()
        assert (outdir / "fit_phi.csv").read_text().splitlines()[0].startswith("t,phi_0")
        assert (outdir / "fit_weights.csv").read_text().splitlines()[0] == "t,row,col,w_value"

    def test_record_echoes_flags(self, capsys):
        code, stdout, _ = run(
            capsys, "probability", "--paths", "1200", "--strike", "0.97",
            "--lambda", "0.002", "--dropout-p", "0.9", "--m-basis", "9", "--seed", "11",
        )
        assert code == 0
        rec = json.loads(stdout.splitlines()[0])
        assert rec["lambda"] == 0.002
        assert rec["dropout_p"] == 0.9
        assert rec["m_basis"] == 9
        assert rec["seed"] == 11


class TestBsm:
    def test_reference_value(self, capsys):
        code, stdout, _ = run(capsys, "bsm", "--s0", "1", "--k", "1.02", "--sigma", "0.15", "--r", "0", "--t", "0.5")
        assert code == 0
        rec = json.loads(stdout)
        assert rec["percent"] == pytest.approx(40.509, abs=0.05)

    def test_invalid_inputs_exit_2(self, capsys):
        code, _, err = run(capsys, "bsm", "--s0", "-1", "--k", "1", "--sigma", "0.15", "--t", "0.5")
        assert code == 2
        assert "numerical error" in err


class TestCalibrate:
    def test_constant_series_exits_2(self, tmp_path, capsys):
        f = tmp_path / "flat.csv"
        write_series_csv(np.arange(20) * 0.1, np.full(20, 2.0), f)
        code, _, err = run(capsys, "calibrate", "--series", str(f), "--dt", "0.1")
        assert code == 2
        assert "numerical error" in err

    def test_missing_series_exits_3(self, tmp_path, capsys):
        code, _, err = run(capsys, "calibrate", "--series", str(tmp_path / "none.csv"), "--dt", "0.1")
        assert code == 3

    def test_report_and_outputs(self, tmp_path, capsys):
        from mqlv.vasicek import VasicekParams, simulate

        grid = simulate(VasicekParams(0.5, 1.0, 0.2, 1.0), 100.0, 1000, 1, seed=5)
        f = tmp_path / "series.csv"
        write_series_csv(grid.times, grid.values[0], f)
        outdir = tmp_path / "cal"
        code, stdout, _ = run(capsys, "calibrate", "--series", str(f), "--dt", "0.1", "--output-dir", str(outdir))
        assert code == 0
        assert "kappa=" in stdout and "rmse(observed, regenerated)" in stdout
        assert (outdir / "report.txt").exists()
        assert (outdir / "regenerated.csv").exists()
        assert (outdir / "calibration.png").stat().st_size > 0


class TestCompareAndCurve:
    def test_compare_writes_outputs(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        cfg.write_text(
            f"[grid]\npaths = 1500\nseed = 2\n[strikes]\nvalues = 0.95, 1.00\n[output]\ndir = {tmp_path/'out'}\n"
        )
        code, stdout, _ = run(capsys, "compare", "--config", str(cfg))
        assert code == 0
        assert (tmp_path / "out" / "comparison.csv").exists()
        assert (tmp_path / "out" / "report.txt").exists()
        assert (tmp_path / "out" / "comparison.png").stat().st_size > 0
        lines = (tmp_path / "out" / "comparison.csv").read_text().splitlines()
        assert len(lines) == 1 + 2  # header + one row per strike

    def test_curve_writes_outputs(self, tmp_path, capsys):
        strikes = ", ".join(f"{k:.2f}" for k in np.linspace(0.8, 1.2, 21))
        cfg = tmp_path / "c.cfg"
        cfg.write_text(
            f"[grid]\npaths = 1500\nseed = 2\n[strikes]\nvalues = {strikes}\n[output]\ndir = {tmp_path/'out'}\n"
        )
        code, stdout, _ = run(capsys, "curve", "--config", str(cfg), "--threads", "2")
        assert code == 0
        assert "curve RMSE" in stdout
        assert (tmp_path / "out" / "curve.csv").exists()
        assert (tmp_path / "out" / "curve.png").stat().st_size > 0

    def test_bad_config_key_exits_1(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("[grid]\nstride = 5\n")
        code, _, err = run(capsys, "compare", "--config", str(cfg))
        assert code == 1
        assert "config error" in err

    def test_missing_config_exits_3(self, tmp_path, capsys):
        code, _, err = run(capsys, "compare", "--config", str(tmp_path / "none.cfg"))
        assert code == 3


class TestUsage:
    def test_no_command_prints_help(self, capsys):
        code, stdout, _ = run(capsys)
        assert code == 1
        assert "usage" in stdout

    def test_unknown_flag_exits_1(self, capsys):
        code, _, err = run(capsys, "generate", "--paths", "10", "--frobnicate", "1", "--out", "x.csv")
        assert code == 1
        assert "usage error" in err

    def test_missing_required_flag_exits_1(self, capsys):
        code, _, err = run(capsys, "probability", "--paths", "10")
        assert code == 1

    def test_bad_threads_exits_1(self, capsys):
        code, _, err = run(capsys, "generate", "--paths", "10", "--out", "x.csv", "--threads", "0")
        assert code == 1

    @pytest.mark.parametrize("cmd", ["generate", "calibrate", "probability", "bsm", "compare", "curve"])
    def test_help_lists_flags(self, cmd, capsys):
        with pytest.raises(SystemExit) as exc:
            main([cmd, "--help"])
        assert exc.value.code == 0
        stdout = capsys.readouterr().out
        assert "--" in stdout
        if cmd in ("generate", "probability"):
            assert "--seed" in stdout

    def test_env_threads_fallback(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("MQLV_THREADS", "2")
        out = tmp_path / "p.csv"
        code, _, _ = run(capsys, "generate", "--paths", "30", "--seed", "1", "--out", str(out))
        assert code == 0
        monkeypatch.setenv("MQLV_THREADS", "bogus")
        code, _, err = run(capsys, "generate", "--paths", "30", "--seed", "1", "--out", str(out))
        assert code == 1
        assert "MQLV_THREADS" in err

    def test_thread_count_invariant_output(self, tmp_path, capsys, monkeypatch):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run(capsys, "generate", "--paths", "64", "--seed", "9", "--out", str(a), "--threads", "1")[0] == 0
        assert run(capsys, "generate", "--paths", "64", "--seed", "9", "--out", str(b), "--threads", "4")[0] == 0
        assert a.read_bytes() == b.read_bytes()
