import io
import json
import subprocess
import sys

import numpy as np
import pytest

from mdensemble.cli import cli_main
from mdensemble.container import Node, write_tree


def run(*argv):
    out = io.StringIO()
    code = cli_main(list(argv), out=out)
    return code, out.getvalue()


@pytest.fixture(scope="module")
def t_nxp(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "t.nxp"
    code, _ = run("generate", "--experiments", "10", "--events", "500", "--out", str(path))
    assert code == 0
    return str(path)


def test_census(t_nxp):
    code, out = run("inspect", t_nxp, "--census")
    assert code == 0
    assert "total 11000" in out.splitlines()


def test_index_dump(t_nxp):
    code, out = run("inspect", t_nxp, "--index")
    assert code == 0
    lines = out.splitlines()
    assert "NXpositioner\t/MDEventWorkspace/experiment0/goniometer" in lines
    assert all(len(line.split("\t")) == 2 for line in lines)


def test_plain_inspect(t_nxp):
    code, out = run("inspect", t_nxp)
    assert code == 0
    assert "schema: ok" in out


def test_load_verify(t_nxp):
    code, out = run("load", t_nxp, "--mode", "indexed", "--verify")
    assert code == 0
    assert "verify: ok" in out


def test_load_invalid_file(tmp_path):
    path = tmp_path / "bad.nxp"
    write_tree(Node.group(""), path)
    assert run("load", str(path), "--mode", "naive")[0] == 1


def test_slice_csv(t_nxp, tmp_path):
    out_path = tmp_path / "s.csv"
    code, _ = run("slice", t_nxp, "--dims", "Qx,Qz", "--bins", "8x6", "--range=-8:8,-8:8", "--out", str(out_path))
    assert code == 0
    grid = np.loadtxt(out_path, delimiter=",")
    assert grid.shape == (8, 6)
    first = out_path.read_text().splitlines()[0].split(",")[0]
    assert len(first.replace(".", "").replace("e+0", "").lstrip("0")) <= 6


def test_slice_stdout(t_nxp):
    code, out = run("slice", t_nxp, "--dims", "0,3", "--bins", "2x2", "--range=-8:8,-10:60")
    assert code == 0
    assert len(out.splitlines()) == 2


def test_bench_json(t_nxp, tmp_path):
    path = tmp_path / "r.json"
    code, out = run("bench", t_nxp, "--reps", "1", "--warmup", "0", "--out", str(path))
    assert code == 0
    data = json.loads(path.read_text())
    assert set(data["modes"]) == {"naive", "indexed"}
    assert "speedup" in out


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    [],
    ["inspect"],
    ["inspect", "x.nxp", "--bogus"],
    ["load", "x.nxp", "--mode", "fast"],
    ["slice", "x.nxp", "--dims", "Qx", "--bins", "2x2", "--range", "0:1,0:1"],
    ["generate", "--experiments", "-1", "--out", "x.nxp"],
    ["bench", "x.nxp", "--reps", "0", "--out", "r.csv"],
])
def test_usage_errors(argv):
    assert run(*argv)[0] == 2


def test_missing_file(tmp_path):
    assert run("inspect", str(tmp_path / "missing.nxp"))[0] == 1


def test_corrupt_file(tmp_path):
    path = tmp_path / "c.nxp"
    path.write_bytes(b"XXXX" + b"\0" * 20)
    assert run("inspect", str(path))[0] == 1


def test_module_entry_point(t_nxp):
    proc = subprocess.run([sys.executable, "-m", "mdensemble", "inspect", t_nxp, "--census"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "total 11000" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "mdensemble", "nope"], capture_output=True, text=True)
    assert proc.returncode == 2
