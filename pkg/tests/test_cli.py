import json
import subprocess
import sys

import pytest

from supyao import cli


def run(argv, capsys):
    code = cli.main(argv)
    return code, capsys.readouterr()


def test_exact_prints_formula(capsys):
    code, out = run(["exact", "--n", "3"], capsys)
    assert code == 0
    assert "0.6563910842" in out.out


def test_exact_simulated(capsys):
    code, out = run(["exact", "--n", "2", "--simulate"], capsys)
    assert code == 0 and "175/256" in out.out and "dual-branch=0.6835937500" in out.out


def test_run_json_report(capsys, tmp_path):
    path = tmp_path / "r.json"
    code, _ = run(["run", "yao-attack", "--nx", "1", "--ny", "1", "--fn", "and",
                   "--trials", "400", "--seed", "42", "--out", str(path)], capsys)
    d = json.loads(path.read_text())
    assert code == 0
    assert d["experiment"] == "yao-attack" and d["seed"] == 42
    gen = next(e for e in d["estimates"] if e["name"] == "generation_rate")
    assert abs(gen["value"] - 175 / 256) < 0.08


def test_run_csv(capsys):
    code, out = run(["run", "yao-honest", "--trials", "50", "--format", "csv"], capsys)
    assert code == 0 and out.out.startswith("experiment,name,value")


def test_run_otp(capsys):
    code, out = run(["run", "otp", "--n", "3", "--trials", "20"], capsys)
    d = json.loads(out.out)
    assert code == 0
    assert d["estimates"][0]["value"] < 1e-9


def test_truth_table_file(capsys, tmp_path):
    tt = tmp_path / "f.txt"
    tt.write_text("0 0 0\n0 1 1\n1 0 1\n1 1 1\n")
    code, out = run(["run", "yao-attack", "--truth-table", str(tt), "--trials", "100"], capsys)
    assert code in (0, 1)
    assert json.loads(out.out)["config"]["truth_table"] == str(tt)


def test_dump_garble(capsys):
    code, out = run(["dump-garble", "--fn", "xor", "--seed", "1"], capsys)
    d = json.loads(out.out)
    assert code == 0 and len(d["entries"]) == 4


def test_sweep(capsys):
    code, out = run(["sweep", "--trials", "300", "--p-values", "0", "4", "20"], capsys)
    d = json.loads(out.out)
    assert code == 0 and any("degenerate" in n for n in d["notes"])


@pytest.mark.parametrize("argv", [["run", "nope"], ["frobnicate"], ["run", "otp", "--trials", "x"], []])
def test_usage_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code == 2


def test_bad_inputs_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 0 0\n0 1 7\n")
    assert run(["run", "yao-attack", "--truth-table", str(bad)], capsys)[0] == 2
    assert run(["run", "yao-attack", "--fn", "nand"], capsys)[0] == 2
    assert run(["run", "yao-attack", "--trials", "0"], capsys)[0] == 2
    assert run(["exact", "--n", "0"], capsys)[0] == 2
    assert run(["run", "yao-attack", "--truth-table", str(tmp_path / "missing")], capsys)[0] == 2


def test_verify_subset(capsys):
    code, out = run(["verify", "--only", "1", "7"], capsys)
    assert code == 0
    assert out.out.count("[PASS]") == 4


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "supyao", "exact", "--n", "1"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "0.75" in res.stdout
