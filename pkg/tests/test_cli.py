import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import grid_hat
from hstv.cli import main
from hstv.htv import htv_cpwl
from hstv.mesh import CpwlFunction, load_mesh, save_mesh, uniform_diagonal_mesh


@pytest.fixture
def hat_file(tmp_path):
    path = tmp_path / "hat.json"
    save_mesh(grid_hat(4, 2, 2), path)
    return path


@pytest.fixture
def two_hat_file(tmp_path):
    mesh = uniform_diagonal_mesh(6)
    vals = np.zeros(mesh.n_vertices)
    vals[2 * 7 + 2] = 2.0
    vals[4 * 7 + 2] = 5.0
    path = tmp_path / "two.json"
    save_mesh(CpwlFunction(mesh, vals), path)
    return path


def test_version_runs_as_script():
    out = subprocess.run(
        [sys.executable, "-m", "hstv.cli", "--version"],
        capture_output=True, text=True,
    )
    assert out.returncode == 0
    assert out.stdout.startswith("hstv ")


def test_htv_total_and_csv(hat_file, tmp_path, capsys):
    rc = main(["htv", str(hat_file), "--p", "1"])
    assert rc == 0
    total_line = capsys.readouterr().out.strip()
    assert total_line.startswith("htv_total=")
    total = float(total_line.split("=", 1)[1])
    g = load_mesh(hat_file)
    assert total == htv_cpwl(g).total

    out_csv = tmp_path / "edges.csv"
    rc = main(["htv", str(hat_file), "--p", "inf", "--report", "csv",
               "--out", str(out_csv)])
    assert rc == 0
    capsys.readouterr()
    lines = out_csv.read_text().strip().split("\n")
    assert lines[0] == "edge,x1,y1,x2,y2,jump_norm,length,contribution"
    contribs = [float(l.split(",")[-1]) for l in lines[1:]]
    assert abs(sum(contribs) - total) <= 1e-10
    # every cell parses as a plain number (no stray numpy scalar reprs)
    for line in lines[1:]:
        for cell in line.split(",")[1:]:
            float(cell)


def test_approx_csv_and_determinism(tmp_path, capsys):
    args = ["approx", "--field", "quadratic:iso", "--N", "0", "--K", "0..2",
            "--ref-resolution", "64", "--out", str(tmp_path / "a.csv")]
    assert main(args) == 0
    first = (tmp_path / "a.csv").read_bytes()
    args[-1] = str(tmp_path / "b.csv")
    assert main(args) == 0
    assert first == (tmp_path / "b.csv").read_bytes()
    lines = first.decode().strip().split("\n")
    assert len(lines) == 4


def test_approx_reference_row(tmp_path):
    out = tmp_path / "t.csv"
    rc = main(["approx", "--field", "quadratic:iso", "--N", "1", "--K", "1..5",
               "--out", str(out)])
    assert rc == 0
    lines = out.read_text().strip().split("\n")
    assert len(lines) == 6  # header + 5 rows
    last = lines[-1].split(",")
    htv_val = float(last[5])
    assert abs(htv_val - 2.0) <= 0.05 * 2.0


def test_approx_emits_artifacts(tmp_path):
    rc = main(["approx", "--field", "rotated-quadratic:2,1,0.4636",
               "--N", "0", "--K", "1", "--ref-resolution", "64",
               "--out", str(tmp_path / "t.csv"),
               "--emit-mesh", str(tmp_path / "m"),
               "--emit-svg", str(tmp_path / "s")])
    assert rc == 0
    g = load_mesh(tmp_path / "m" / "mesh_K1.json")
    assert g.mesh.covers_bbox_exactly()
    svg = (tmp_path / "s" / "mesh_K1.svg").read_text()
    assert svg.count("<polygon") == g.mesh.n_triangles


def test_extremal_test_verdicts(hat_file, two_hat_file, capsys):
    assert main(["extremal", "test", str(hat_file)]) == 0
    assert capsys.readouterr().out.strip() == "extremal (dim=1)"
    assert main(["extremal", "test", str(two_hat_file)]) == 0
    assert capsys.readouterr().out.strip() == "not extremal (dim=2)"


def test_extremal_decompose(two_hat_file, tmp_path, capsys):
    out = tmp_path / "decomp.json"
    rc = main(["extremal", "decompose", str(two_hat_file), "--tol", "1e-8",
               "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert len(doc["components"]) == 2
    assert len(doc["coefficients"]) == 2
    assert float(doc["residual"]) <= 1e-8
    total = float(doc["total"])
    assert abs(sum(float(c) for c in doc["coefficients"]) - total) <= 1e-8
    for comp in doc["components"]:
        g = load_mesh_from_doc(comp)
        assert abs(htv_cpwl(g).total - 1.0) <= 1e-9


def load_mesh_from_doc(doc):
    from hstv.mesh import cpwl_from_document

    return cpwl_from_document(doc)


def test_mesh_render(hat_file, tmp_path):
    out = tmp_path / "hat.svg"
    assert main(["mesh", "render", str(hat_file), "--out", str(out)]) == 0
    assert out.read_text().startswith("<svg")


def test_exit_codes(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["htv", "x.json", "--frobnicate"])
    assert exc.value.code == 2
    assert main(["htv", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["htv", str(bad)]) == 1
    capsys.readouterr()


def test_threads_env_validation(hat_file, monkeypatch, capsys):
    monkeypatch.setenv("HTV_THREADS", "4")
    assert main(["htv", str(hat_file)]) == 0
    capsys.readouterr()
    monkeypatch.setenv("HTV_THREADS", "0")
    with pytest.raises(SystemExit) as exc:
        main(["htv", str(hat_file)])
    assert exc.value.code == 2
    monkeypatch.setenv("HTV_THREADS", "lots")
    with pytest.raises(SystemExit):
        main(["htv", str(hat_file)])
