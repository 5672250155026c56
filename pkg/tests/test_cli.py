import csv
import io
import subprocess
import sys

import pytest
import scipy.io

from parfem.cli import build_parser, main


def test_parser_has_all_commands():
    parser = build_parser()
    for cmd in ("solve", "classify", "bench", "export"):
        args = parser.parse_args([cmd, "--ranks", "2", "--dimension", "2"])
        assert args.command == cmd and args.ranks == 2


def test_solve_prints_errors(capsys, tmp_path):
    out = tmp_path / "solve.csv"
    rc = main(["solve", "--dimension", "2", "--n-coarse", "2", "--levels", "2", "--steps", "2",
               "-o", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "l2_error=" in text and "dofs=25" in text
    assert next(csv.DictReader(io.StringIO(out.read_text())))["ranks"] == "1"


def test_classify_to_file(tmp_path):
    out = tmp_path / "classes.csv"
    assert main(["classify", "--dimension", "2", "--n-coarse", "4", "--ranks", "3",
                 "--levels", "2", "-o", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert {r["level"] for r in rows} == {"0", "1"}
    assert {r["rank"] for r in rows} == {"0", "1", "2", "all"}


def test_bench_with_reference(tmp_path):
    ref = tmp_path / "ref.csv"
    base = ["--dimension", "2", "--n-coarse", "2", "--levels", "2", "--steps", "1"]
    assert main(["bench", *base, "-o", str(ref)]) == 0
    cur = tmp_path / "cur.csv"
    assert main(["bench", *base, "--ranks", "2", "--reference", str(ref), "-o", str(cur)]) == 0
    row = next(csv.DictReader(cur.open()))
    assert row["reference_ranks"] == "1" and float(row["ideal_speedup"]) == 2.0


def test_bench_missing_reference_exit_code(tmp_path, capsys):
    rc = main(["bench", "--dimension", "2", "--n-coarse", "2", "--levels", "1", "--steps", "1",
               "--reference", str(tmp_path / "missing.csv")])
    assert rc == 1
    assert "not found" in capsys.readouterr().err


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "x.cfg"
    cfg.write_text("colour=blue\n")
    assert main(["solve", "--config", str(cfg)]) == 2
    assert main(["solve", "--config", str(tmp_path / "none.cfg")]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_export_writes_matrixmarket(tmp_path, capsys):
    out = tmp_path / "sys.mtx"
    assert main(["export", "--dimension", "2", "--n-coarse", "2", "--levels", "2", "--ranks", "2",
                 "-o", str(out)]) == 0
    assert scipy.io.mmread(out).shape == (25, 25)
    assert scipy.io.mmread(tmp_path / "sys_rhs.mtx").shape == (25, 1)
    assert str(out) in capsys.readouterr().out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "parfem.cli", "--help"], capture_output=True,
                         text=True, check=False)
    assert res.returncode == 0 and "solve" in res.stdout


def test_unknown_command_exits():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
