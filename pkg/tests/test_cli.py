import json
import subprocess
import sys

import pytest

from gwlimits.cli import fmt, run


def cli(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    lines = out.splitlines()
    return code, [l for l in lines if not l.startswith("#")], lines, err


def test_law_rows(capsys):
    code, rows, lines, _ = cli(capsys, "law", "--dist", "0:0.25,2:0.75", "--n", "2")
    assert code == 0
    assert lines[0].startswith("# seed=0")
    assert rows == ["a,prob", "0,0.296875", "2,0.28125", "4,0.421875"]


def test_law_exact_column(capsys):
    _, rows, _, _ = cli(capsys, "law", "--dist", "0:1/4,2:3/4", "--n", "2", "--exact")
    assert rows[1] == "0,0.296875,19/64"


def test_norming_table(capsys):
    code, rows, _, _ = cli(capsys, "norming", "--dist", "geometric:0.75,0.5", "--N", "10", "--check")
    assert code == 0
    assert rows[0] == "n,c_n,ratio,residual"
    assert len(rows) == 12
    assert rows[1].endswith(",,")
    assert all(float(r.split(",")[3]) < 1e-13 for r in rows[2:])


def test_missing_dist_is_usage_error(capsys):
    code, _, _, err = cli(capsys, "law", "--n", "2")
    assert code == 2
    assert "--dist" in err


def test_bad_subcommand_and_flags(capsys):
    assert run(["nonsense"]) == 2
    assert run(["law", "--dist", "0:0.5,2:0.9", "--n", "2"]) == 2
    assert run(["density", "--dist", "0:0.25,2:0.75"]) == 2
    capsys.readouterr()


def test_density_and_rho(capsys):
    _, rows, _, _ = cli(capsys, "density", "--dist", "geometric:0.75,0.5", "--c0", repr(2.0),
                        "--x", "1,2")
    assert rows[0] == "x,value,err"
    _, rows, lines, _ = cli(capsys, "rho", "--dist", "0:0.25,2:0.75", "--theta", "1", "--r", "2")
    assert rows[0] == "s_1,s_2,prob"
    assert any(l.startswith("# c0=") for l in lines)
    assert sum(float(r.split(",")[2]) for r in rows[1:]) == pytest.approx(1.0, abs=1e-6)


def test_sample_ndjson_is_seeded(capsys):
    args = ["sample", "--dist", "0:0.25,2:0.75", "--family", "kesten", "--depth", "3",
            "--count", "4", "--seed", "7"]
    _, a, _, _ = cli(capsys, *args)
    _, b, _, _ = cli(capsys, *args)
    assert a == b and len(a) == 4
    obj = json.loads(a[0])
    assert set(obj) == {"deg", "types"}


def test_ratio_and_converge(capsys):
    _, rows, _, _ = cli(capsys, "ratio", "--dist", "0:0.25,2:0.75", "--n", "6", "--h", "1",
                        "--k", "2", "--a", "10")
    assert float(rows[1].split(",")[4]) == pytest.approx(4 / 3, rel=1e-13)
    code, rows, _, _ = cli(capsys, "converge", "--dist", "0:0.25,2:0.75", "--regime", "low",
                           "--const", "2", "--nmin", "18", "--nmax", "20", "--tol", "1e-4")
    assert code == 0
    assert rows[0] == "n,a_n,H_n,limit,rel_dev"
    code, _, _, _ = cli(capsys, "converge", "--dist", "0:0.25,2:0.75", "--regime", "low",
                        "--const", "2", "--nmin", "3", "--nmax", "3", "--tol", "1e-4")
    assert code == 1


def test_subcritical_exit_code(capsys):
    code, rows, _, _ = cli(capsys, "subcritical", "--dist", "geometric:0.5,0.75")
    assert code == 0
    assert rows[1].endswith(",true")


def test_asymptotics_rows(capsys):
    _, rows, _, _ = cli(capsys, "asymptotics", "--dist", "0:0.25,2:0.75", "--kind", "right",
                        "--x", "6,8")
    assert rows[0] == "x,approx,exact_or_fourier,log_ratio"
    assert all(abs(float(r.split(",")[3]) - 1) < 1e-3 for r in rows[1:])


def test_out_file(tmp_path, capsys):
    p = tmp_path / "law.csv"
    assert run(["law", "--dist", "0:0.25,2:0.75", "--n", "1", "--out", str(p)]) == 0
    assert capsys.readouterr().out == ""
    assert p.read_text().splitlines()[1:] == ["a,prob", "0,0.25", "2,0.75"]


def test_float_format():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(3) == "3"
    assert fmt(float("inf")) == "inf"


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "gwlimits.cli", "law", "--dist", "1:0.5,2:0.5", "--n", "1"],
                         capture_output=True, text=True, check=True)
    assert res.stdout.splitlines()[1:] == ["a,prob", "1,0.5", "2,0.5"]
