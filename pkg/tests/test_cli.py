import subprocess
import sys

import numpy as np
import pytest

from panelcd.cli import (
    CsvParseError,
    NonNumericError,
    UnbalancedPanelError,
    dump_panel_csv,
    emit_report,
    load_panel_csv,
    main,
    parse_args,
)
from panelcd import cd_stats
from panelcd.dgp import DgpConfig, generate_panel, make_rng


class TestParseArgs:
    def test_test_command(self):
        args = parse_args(
            ["test", "--data", "p.csv", "--model", "hetero", "--tests", "rlm,rlmpe", "--alpha", "0.05"]
        )
        assert args.command == "test"
        assert args.test_names == ("RLM", "RLM_PE")
        assert args.alpha == 0.05

    def test_simulate_command(self):
        args = parse_args(
            "simulate --dgp 1 --T 100 --n 100 --k 2 --errors normal --reps 2000 --seed 42".split()
        )
        assert args.command == "simulate"
        assert args.dgp_config.t == 100 and args.dgp_config.n == 100
        assert args.reps == 2000

    def test_dense_requires_h(self, capsys):
        with pytest.raises(SystemExit) as exc:
            parse_args("simulate --dgp 1 --T 50 --n 25 --alternative dense".split())
        assert exc.value.code == 2
        err = capsys.readouterr().err
        assert "--h" in err and "3" in err

    def test_h_only_with_dense(self):
        with pytest.raises(SystemExit) as exc:
            parse_args("simulate --dgp 1 --T 50 --n 25 --h 3".split())
        assert exc.value.code == 2

    def test_k_defaults_per_dgp(self):
        assert parse_args("simulate --dgp 2 --T 50 --n 25".split()).dgp_config.k == 3
        assert parse_args("simulate --dgp 4 --T 50 --n 25".split()).dgp_config.k == 0

    def test_unknown_test_name(self):
        with pytest.raises(SystemExit) as exc:
            parse_args("test --data p.csv --tests rlm,bogus".split())
        assert exc.value.code == 2


class TestLoadPanelCsv:
    def test_shuffled_rows_canonicalize(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text(
            "unit,time,y,x1\n"
            "b,2,4.0,0.4\n"
            "a,1,1.0,0.1\n"
            "b,3,5.0,0.5\n"
            "a,3,3.0,0.3\n"
            "b,1,0.0,0.9\n"
            "a,2,2.0,0.2\n",
            encoding="utf-8",
        )
        panel = load_panel_csv(str(f))
        assert panel.n == 2 and panel.t == 3 and panel.k == 2
        assert panel.unit_ids == ("a", "b") and panel.time_ids == ("1", "2", "3")
        np.testing.assert_array_equal(panel.y[0], [1.0, 2.0, 3.0])
        np.testing.assert_array_equal(panel.x[0, :, 1], [0.1, 0.2, 0.3])
        assert np.all(panel.x[:, :, 0] == 1.0)

    def test_numeric_label_sorting(self, tmp_path):
        f = tmp_path / "p.csv"
        rows = ["unit,time,y"]
        for u in ("10", "2", "1"):
            for t in ("1", "2"):
                rows.append(f"{u},{t},1.5")
        f.write_text("\n".join(rows) + "\n", encoding="utf-8")
        panel = load_panel_csv(str(f))
        assert panel.unit_ids == ("1", "2", "10")

    def test_missing_row_is_unbalanced(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text(
            "unit,time,y\na,1,1.0\na,2,2.0\nb,1,3.0\n",
            encoding="utf-8",
        )
        with pytest.raises(UnbalancedPanelError, match="unit b: 1/2"):
            load_panel_csv(str(f))

    def test_non_numeric_cell(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("unit,time,y\na,1,oops\na,2,2.0\n", encoding="utf-8")
        with pytest.raises(NonNumericError, match="line 2"):
            load_panel_csv(str(f))

    def test_duplicate_row(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("unit,time,y\na,1,1.0\na,1,2.0\n", encoding="utf-8")
        with pytest.raises(CsvParseError, match="duplicate"):
            load_panel_csv(str(f))

    def test_bad_header(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("id,period,value\na,1,1.0\n", encoding="utf-8")
        with pytest.raises(CsvParseError, match="header"):
            load_panel_csv(str(f))

    def test_round_trip_is_bitwise(self, tmp_path):
        gen = generate_panel(DgpConfig(dgp=1, t=15, n=5, k=3, seed=21), make_rng(21))
        out = tmp_path / "dump.csv"
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            dump_panel_csv(gen.panel, fh)
        loaded = load_panel_csv(str(out))
        assert np.array_equal(loaded.y, gen.panel.y)
        assert np.array_equal(loaded.x, gen.panel.x)
        assert loaded.unit_ids == gen.panel.unit_ids
        assert loaded.time_ids == gen.panel.time_ids


class TestEmitReport:
    def _result(self, p):
        return cd_stats.TestResult(
            name="RLM", statistic=1.2345, null_dist="normal", df=None,
            sided="upper", p_value=p, reject=p < 0.05, alpha=0.05,
        )

    def test_table_rounds_p_to_two_decimals(self):
        text = emit_report([self._result(0.04999)], "table", t_eff=50, n=10)
        assert "0.05" in text

    def test_csv_keeps_full_precision(self):
        text = emit_report([self._result(0.04999)], "csv", t_eff=50, n=10)
        assert "0.04999" in text

    def test_single_result_is_one_row(self):
        text = emit_report([self._result(0.2)], "csv", t_eff=50, n=10)
        lines = text.strip().split("\n")
        assert len(lines) == 2
        assert lines[0].startswith("cell_T,cell_n,dist,alternative,test,statistic")


class TestEndToEnd:
    def test_test_command_runs(self, tmp_path, capsys):
        data = tmp_path / "p.csv"
        gen = generate_panel(DgpConfig(dgp=1, t=30, n=8, k=2, seed=3), make_rng(3))
        with open(data, "w", encoding="utf-8", newline="\n") as fh:
            dump_panel_csv(gen.panel, fh)
        code = main(["test", "--data", str(data), "--tests", "rlm,rlmpe,cdp"])
        assert code == 0
        out = capsys.readouterr().out
        assert "RLM" in out and "RLM_PE" in out

    def test_fixed_and_dynamic_models(self, tmp_path, capsys):
        for dgp, model, consumed in ((3, "fixed", 0), (4, "dynamic", 1)):
            data = tmp_path / f"dgp{dgp}.csv"
            k = 2 if dgp == 3 else 0
            gen = generate_panel(DgpConfig(dgp=dgp, t=30, n=8, k=k, seed=4), make_rng(4))
            with open(data, "w", encoding="utf-8", newline="\n") as fh:
                dump_panel_csv(gen.panel, fh)
            code = main(
                ["test", "--data", str(data), "--model", model, "--tests", "rlm,lmadj"]
            )
            assert code == 0
            out = capsys.readouterr().out
            assert f"T_eff={30 - consumed}" in out
            if model == "fixed":
                assert "unsupported" in out

    def test_missing_file_is_runtime_error(self, capsys):
        assert main(["test", "--data", "/nonexistent/p.csv"]) == 1
        assert "error" in capsys.readouterr().err

    def test_simulate_csv_output_is_stable(self, tmp_path):
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        argv = [
            "simulate", "--dgp", "1", "--T", "20", "--n", "6", "--k", "2",
            "--reps", "10", "--seed", "5", "--tests", "rlm", "--format", "csv",
        ]
        assert main(argv + ["--output", str(out1)]) == 0
        assert main(argv + ["--output", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_dump_dgp_writes_csv(self, tmp_path):
        out = tmp_path / "panel.csv"
        code = main(
            ["dump-dgp", "--dgp", "4", "--T", "12", "--n", "4", "--seed", "2", "--output", str(out)]
        )
        assert code == 0
        header = out.read_text(encoding="utf-8").splitlines()[0]
        assert header == "unit,time,y"

    def test_exit_code_2_via_subprocess(self):
        proc = subprocess.run(
            [sys.executable, "-m", "panelcd", "simulate", "--dgp", "9", "--T", "20", "--n", "6"],
            capture_output=True,
        )
        assert proc.returncode == 2

    def test_module_entry_point_runs(self, tmp_path):
        proc = subprocess.run(
            [
                sys.executable, "-m", "panelcd", "simulate", "--dgp", "1", "--T", "20",
                "--n", "6", "--reps", "4", "--seed", "1", "--tests", "rlm", "--format", "csv",
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert proc.stdout.startswith("cell_T,cell_n")
