import json
import os
import re
import subprocess
import sys

import pytest

from pirldc.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_qdecode(capsys):
    code, out, _ = run(capsys, "qdecode", "--b", "1", "--f", "6", "--a0", "0", "--a1", "1")
    assert code == 0
    obj = json.loads(out)
    assert obj["schema"] == 1
    assert obj["prob_correct"] == pytest.approx(0.75)


def test_bound_cor53(capsys):
    code, out, _ = run(capsys, "bound", "--formula", "cor53", "--params", "b=3")
    assert code == 0
    assert json.loads(out)["exponent"] == 0.25


def test_bound_thm45(capsys):
    code, out, _ = run(capsys, "bound", "--formula", "thm45", "--params", "n=1000,ell=4,b=1,c=3,eps=0.5")
    obj = json.loads(out)
    assert code == 0 and obj["intermediates"]["u"] == 5


def test_exit_codes(capsys):
    assert run(capsys, "frobnicate")[0] == 2
    code, _, err = run(capsys, "run", "--scheme", "square", "--index", "1", "--bogus")
    assert code == 2 and "--bogus" in err
    code, _, err = run(capsys, "bound", "--formula", "thm45", "--params", "n=0,ell=4,b=1,c=3,eps=0.5")
    assert code == 1 and "error" in err
    code, _, _ = run(capsys, "run", "--scheme", "square", "--x", "0110", "--index", "9")
    assert code == 1
    code, _, _ = run(capsys, "run", "--scheme", "square", "--db", "/nonexistent/db.txt", "--index", "1")
    assert code == 1
    assert run(capsys, "qdecode", "--b", "2", "--f", "6", "--a0", "0", "--a1", "1")[0] == 1


def test_run_is_deterministic_given_seed(capsys):
    argv = ["run", "--scheme", "cube", "--n", "27", "--index", "14", "--seed", "42"]
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert a == b
    obj = json.loads(a)
    assert obj["correct"] and obj["seed"] == 42 and obj["transcript"]["index"] == 14


def test_run_records_a_fresh_seed(capsys):
    _, out, _ = run(capsys, "run", "--scheme", "square", "--n", "16", "--index", "2")
    assert isinstance(json.loads(out)["seed"], int)


def test_out_and_manifest(tmp_path, capsys):
    target = tmp_path / "t.json"
    assert run(capsys, "ldc-trial", "--scheme", "square", "--n", "16", "--delta", "0.0625", "--trials", "200", "--seed", "3", "--out", str(target))[0] == 0
    first = target.read_bytes()
    manifest = json.loads((tmp_path / "t.json.manifest.json").read_text())
    assert manifest["seed"] == 3 and manifest["subcommand"] == "ldc-trial"
    assert "started" in manifest and len(manifest["output_sha256"]) == 64
    run(capsys, "ldc-trial", "--scheme", "square", "--n", "16", "--delta", "0.0625", "--trials", "200", "--seed", "3", "--out", str(target))
    assert target.read_bytes() == first


def test_audit(capsys):
    code, out, _ = run(capsys, "audit", "--scheme", "square", "--n", "16")
    obj = json.loads(out)
    assert code == 0 and obj["private"] and obj["max_tvd"] == "0"
    code, out, _ = run(capsys, "audit", "--scheme", "cube", "--n", "8", "--server", "1", "--i-a", "1", "--i-b", "8")
    assert json.loads(out)["pairs"] == [{"server": 1, "i_a": 1, "i_b": 8, "tvd": "0"}]


def test_codegen_reduce_roundtrip(tmp_path, capsys):
    path = tmp_path / "code.json"
    assert run(capsys, "codegen", "--scheme", "square", "--n", "4", "--out", str(path))[0] == 0
    obj = json.loads(path.read_text())
    assert obj["m"] == 8 and obj["c_star"] == 2
    code, out, _ = run(capsys, "reduce", "--code", str(path), "--x", "0110", "--index", "3", "--all-r")
    rep = json.loads(out)
    assert code == 0
    assert rep["sieve"]["stage1"] == pytest.approx(1.0)
    assert rep["sieve"]["stage2"] == pytest.approx(2 / 3)
    assert rep["multi_copy"]["overall"] == pytest.approx(0.7222222222)
    code, out, _ = run(capsys, "reduce", "--code", str(path), "--x", "0110", "--index", "3", "--r", "1")
    rep = json.loads(out)
    assert len(rep["runs"]) == 1 and "sieve" not in rep
    assert rep["runs"][0]["success"] == pytest.approx(0.75)


def test_bound_table(capsys):
    code, out, _ = run(capsys, "bound-table")
    lines = out.splitlines()
    assert code == 0 and lines[0].startswith("formula,n,ell,b")
    assert any(line.startswith("thm55,") for line in lines)
    _, js, _ = run(capsys, "bound-table", "--json")
    assert json.loads(js)["schema"] == 1


def _start_server(db, listen_port=0):
    proc = subprocess.Popen(
        [sys.executable, "-m", "pirldc", "serve", "--scheme", "square", "--db", str(db), "--listen", f"127.0.0.1:{listen_port}"],
        stderr=subprocess.PIPE,
        text=True,
    )
    line = proc.stderr.readline()
    m = re.search(r"listening on ([\d.]+):(\d+)", line)
    if not m:
        proc.kill()
        raise AssertionError(f"server did not start: {line!r}")
    return proc, f"{m.group(1)}:{m.group(2)}"


def test_serve_and_get_subprocesses(tmp_path):
    db = tmp_path / "db.txt"
    bits = "0110100110010111"
    db.write_text(f"16\n{bits}\n")
    p0, e0 = _start_server(db)
    p1, e1 = _start_server(db)
    try:
        for i in (1, 7, 16):
            res = subprocess.run(
                [sys.executable, "-m", "pirldc", "get", "--index", str(i), "--s0", e0, "--s1", e1, "--seed", "5"],
                capture_output=True,
                text=True,
                timeout=30,
                env={**os.environ, "PIR_TIMEOUT_MS": "5000"},
            )
            assert res.returncode == 0, res.stderr
            assert json.loads(res.stdout)["bit"] == int(bits[i - 1])
    finally:
        for p in (p0, p1):
            p.terminate()
            p.wait(10)


def test_get_with_server_down(capsys):
    code, _, err = run(capsys, "get", "--index", "1", "--s0", "127.0.0.1:1", "--s1", "127.0.0.1:1")
    assert code == 1 and "failed" in err
