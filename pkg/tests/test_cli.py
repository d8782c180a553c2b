import csv
import io
import subprocess
import sys

import pytest

from growthlab.cli import parse_primes, run


def invoke(*argv):
    out = io.StringIO()
    code = run(list(argv) + ["--deterministic"], stdout=out)
    return code, out.getvalue()


def table(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def test_order():
    code, text = invoke("order", "--n", "2", "--p", "7")
    assert code == 0
    assert text.splitlines()[0] == "# growthlab order"
    assert table(text) == [{"n": "2", "q": "7", "order": "336"}]


def test_diameter_sl2_f3():
    code, text = invoke("diameter", "--n", "2", "--p", "3", "--gens", "elementary")
    assert code == 0
    assert table(text)[0]["diameter"] == "4"


def test_lp_split_torus():
    code, text = invoke("lp", "--n", "2", "--p", "101", "--variety", "split-torus", "--set", "full-group", "--m", "1")
    row = table(text)[0]
    assert code == 0
    assert row["intersection"] == "100"
    assert row["predicted"] == "0.333333"
    assert abs(float(row["observed"]) - 1 / 3) < 0.002


def test_extension_field_order():
    code, text = invoke("order", "--n", "2", "--p", "3", "--k", "2")
    assert table(text)[0]["order"] == "720"


@pytest.mark.parametrize(
    "argv,expected",
    [
        (["order", "--p", "x"], 1),
        (["nonsense"], 1),
        (["diameter", "--p", "7", "--gens", "1,2"], 1),
        (["order", "--p", "8"], 2),
        (["diameter", "--p", "7", "--gens", "1,1,0,1"], 2),
        (["diameter", "--n", "3", "--p", "31"], 3),
    ],
)
def test_exit_codes(argv, expected, capsys):
    code, _ = invoke(*argv)
    assert code == expected
    assert "error" in capsys.readouterr().err


def test_timestamp_only_without_deterministic():
    out = io.StringIO()
    run(["order", "--p", "5"], stdout=out)
    assert any(ln.startswith("# timestamp") for ln in out.getvalue().splitlines())
    _, text = invoke("order", "--p", "5")
    assert not any(ln.startswith("# timestamp") for ln in text.splitlines())


def test_parse_primes():
    assert parse_primes("11..23") == [11, 13, 17, 19, 23]
    assert parse_primes("5,7") == [5, 7]


def test_output_file(tmp_path):
    path = tmp_path / "out.csv"
    code, text = invoke("order", "--p", "5", "-o", str(path))
    assert code == 0
    assert path.read_text().endswith("2,5,120\n")


def test_console_script_runs():
    res = subprocess.run(
        [sys.executable, "-m", "growthlab", "order", "--p", "3", "--deterministic"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert res.returncode == 0
    assert res.stdout.strip().endswith("2,3,24")
