import csv
from dataclasses import replace

import pytest

from mclsquad.bench import read_csv
from mclsquad.cli import main, parse_n_grid


def test_parse_n_grid_comma_list():
    assert parse_n_grid("50,200,100") == [50, 100, 200]
    assert parse_n_grid(" 10, 10 ,20,") == [10, 20]


def test_parse_n_grid_logspace():
    assert parse_n_grid("logspace:100:100000:4") == [100, 1000, 10000, 100000]
    assert parse_n_grid("logspace:10:1000:3") == [10, 100, 1000]


@pytest.mark.parametrize(
    "bad",
    [
        "",
        "0,10",
        "ten",
        "logspace:100:10",
        "logspace:0:100:3",
        "logspace:100:10:3",
        "logspace:10:100:1",
    ],
)
def test_parse_n_grid_rejects_malformed(bad):
    with pytest.raises(ValueError):
        parse_n_grid(bad)


def _run_ok(tmp_path, capsys, extra=()):
    out = tmp_path / "rows.csv"
    code = main(
        [
            "run",
            "--problem", "runge1d",
            "--method", "mc",
            "--N", "40,80",
            "--seeds", "2",
            "--out", str(out),
            *extra,
        ]
    )
    return code, out, capsys.readouterr()


def test_main_writes_csv_and_reports_row_count(tmp_path, capsys):
    code, out, captured = _run_ok(tmp_path, capsys)
    assert code == 0
    assert "wrote 4 rows" in captured.out
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "method"
    assert len(rows) == 1 + 4


def test_main_unknown_problem_is_usage_error(tmp_path, capsys):
    code = main(
        [
            "run",
            "--problem", "nosuch",
            "--method", "mc",
            "--N", "40",
            "--out", str(tmp_path / "x.csv"),
        ]
    )
    assert code == 1
    assert "unknown problem" in capsys.readouterr().err


def test_main_usage_errors(tmp_path, capsys):
    assert main([]) == 1
    assert main(["run", "--problem", "runge1d", "--method", "mc",
                 "--N", "logspace:5:2:3", "--out", str(tmp_path / "x.csv")]) == 1
    assert main(["run", "--problem", "runge1d", "--method", "bogus",
                 "--N", "40", "--out", str(tmp_path / "x.csv")]) == 1
    capsys.readouterr()


def test_main_cell_failure_exit_code(tmp_path, capsys):
    out = tmp_path / "rows.csv"
    code = main(
        [
            "run",
            "--problem", "runge1d",
            "--method", "mcls",
            "--degree", "9",
            "--N", "5,100",
            "--out", str(out),
        ]
    )
    captured = capsys.readouterr()
    assert code == 2
    assert "FAIL" in captured.err and "N=5" in captured.err
    assert "wrote 1 rows" in captured.out  # the viable cell still lands


def test_main_emits_gnuplot_and_figure(tmp_path, capsys):
    gp = tmp_path / "conv.gp"
    png = tmp_path / "conv.png"
    code, _, _ = _run_ok(tmp_path, capsys, extra=["--gnuplot", str(gp), "--plot", str(png)])
    assert code == 0
    assert "set logscale xy" in gp.read_text()
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_main_output_is_deterministic_outside_wall_times(tmp_path, capsys):
    out_a = tmp_path / "a.csv"
    out_b = tmp_path / "b.csv"
    argv = [
        "run",
        "--problem", "genz1",
        "--dim", "2",
        "--method", "mcls",
        "--degree", "3",
        "--N", "60,120",
        "--seeds", "2",
        "--seed0", "9",
    ]
    assert main(argv + ["--out", str(out_a)]) == 0
    assert main(argv + ["--out", str(out_b)]) == 0
    capsys.readouterr()
    rows_a = [replace(r, wall_ms=0.0) for r in read_csv(str(out_a)).rows]
    rows_b = [replace(r, wall_ms=0.0) for r in read_csv(str(out_b)).rows]
    assert rows_a == rows_b
