import csv
import shutil
import subprocess
import textwrap
from pathlib import Path

import numpy as np
import pytest

from flexofpm.cli import main
from flexofpm.io import read_domain

from test_config import PATCH

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

ANNULUS = textwrap.dedent("""
    [geometry]
    outline = annulus
    generator = polar
    r_inner = 10e-6
    r_outer = 20e-6
    nx = 4
    ny = 10

    [material]
    E_young = 139e9
    nu = 0.3
    l = 0
    mu11 = 0
    mu12 = 0
    mu44 = 0
    k11 = 1e-9
    k33 = 1e-9
    e15 = 0
    e31 = 0
    e33 = 0

    [bc]
    inner.ur = 0.045e-6
    inner.phi = 0
    outer.ur = 0.05e-6
    outer.phi = 1
    start.un = 0
    start.dt = 0
    end.un = 0
    end.dt = 0

    [numerics]
    eta11 = 1e10*E
    eta12 = 1e10*E
    eta13 = 1e10*k33
    eta21 = 2*E
    eta22 = 100*E
    eta23 = 0

    [reference]
    oracle = lame
""")


def _write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text + "\n[output]\ndirectory = out\n")
    return p


def _copy_shipped(tmp_path, name):
    dst = tmp_path / name
    shutil.copy(CONFIGS / name, dst)
    return dst


class TestRun:
    def test_patch_writes_three_files(self, tmp_path, capsys):
        cfg = _write(tmp_path, PATCH)
        assert main(["run", str(cfg)]) == 0
        out = tmp_path / "out"
        assert sorted(p.name for p in out.iterdir()) == ["gauss.csv", "nodal.csv", "partition.vtk"]
        with open(out / "nodal.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["point_id", "x", "y", "u1", "u2", "phi"] and len(rows) == 37
        assert "wrote" in capsys.readouterr().out

    def test_shipped_cylinder_config(self, tmp_path, capsys):
        cfg = _copy_shipped(tmp_path, "cylinder.cfg")
        assert main(["run", str(cfg)]) == 0
        out = tmp_path / "out" / "cylinder"
        assert {p.name for p in out.iterdir()} == {"gauss.csv", "nodal.csv", "partition.vtk"}
        text = capsys.readouterr().out
        assert "e_u = " in text and "e_phi = " in text

    def test_shipped_pyramid_config(self, tmp_path):
        cfg = _copy_shipped(tmp_path, "pyramid.cfg")
        assert main(["run", str(cfg)]) == 0
        nodal = np.loadtxt(tmp_path / "out" / "pyramid" / "nodal.csv", delimiter=",", skiprows=1)
        assert nodal.shape == (306, 6)

    def test_check_symmetry(self, tmp_path, capsys):
        assert main(["run", "--check-symmetry", str(_write(tmp_path, PATCH))]) == 0
        line = next(ln for ln in capsys.readouterr().out.splitlines() if "symmetry" in ln)
        assert float(line.rsplit("=", 1)[1]) <= 1e-12

    def test_missing_material_key(self, tmp_path, capsys):
        text = PATCH.replace("k11 = 1e-9\n", "")
        assert main(["run", str(_write(tmp_path, text))]) == 2
        assert "'k11'" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "nope.cfg")]) == 2
        assert "cannot read" in capsys.readouterr().err

    def test_numerical_failure_exit_code(self, tmp_path, capsys):
        # only tractions: rigid modes remain
        text = PATCH.replace("bottom.u = 0 0\n", "").replace("bottom.phi = 0\n", "")
        assert main(["run", str(_write(tmp_path, text))]) == 1
        assert "underconstrained" in capsys.readouterr().err

    @pytest.mark.parametrize("value", ["zero", "0", "-2"])
    def test_bad_thread_count(self, tmp_path, monkeypatch, capsys, value):
        monkeypatch.setenv("FPM_THREADS", value)
        assert main(["run", str(_write(tmp_path, PATCH))]) == 2
        assert "FPM_THREADS" in capsys.readouterr().err

    def test_console_script(self, tmp_path):
        exe = shutil.which("fpm")
        if exe is None:
            pytest.skip("console script not installed")
        text = PATCH.replace("e33 = 0\n", "")
        proc = subprocess.run([exe, "run", str(_write(tmp_path, text))], capture_output=True, text=True)
        assert proc.returncode == 2 and "'e33'" in proc.stderr


class TestConverge:
    def test_single_level(self, tmp_path, capsys):
        cfg = _write(tmp_path, ANNULUS)
        assert main(["converge", str(cfg), "--levels", "1"]) == 0
        with open(tmp_path / "out" / "convergence.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["level", "npoints", "e_u", "e_phi"]
        assert len(rows) == 2 and rows[1][1] == "40"
        assert float(rows[1][2]) < 1e-2

    def test_three_levels_monotone(self, tmp_path):
        cfg = _write(tmp_path, ANNULUS)
        out = tmp_path / "conv.csv"
        assert main(["converge", str(cfg), "--levels", "3", "--out", str(out)]) == 0
        e_u = np.loadtxt(out, delimiter=",", skiprows=1, usecols=2)
        assert np.all(np.diff(e_u) < 0)

    def test_needs_reference(self, tmp_path, capsys):
        assert main(["converge", str(_write(tmp_path, PATCH)), "--levels", "1"]) == 2
        assert "reference" in capsys.readouterr().err

    def test_levels_positive(self, tmp_path):
        assert main(["converge", str(_write(tmp_path, ANNULUS)), "--levels", "0"]) == 2


class TestBenchCommand:
    def test_pyramid(self, tmp_path, capsys):
        out = tmp_path / "b.csv"
        assert main(["bench", "pyramid", "--grid", "10", "9", "--out", str(out)]) == 0
        text = capsys.readouterr().out
        assert "bottom potential V" in text
        with open(out) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["benchmark", "npoints", "e_u", "e_phi", "assemble_s", "solve_s", "nnz"]
        assert rows[1][:2] == ["pyramid", "90"]

    def test_partition_flag_only_for_block(self, capsys):
        assert main(["bench", "pyramid", "--partition", "voronoi"]) == 2


class TestExportDomain:
    def test_round_trip(self, tmp_path):
        cfg = _write(tmp_path, PATCH)
        dom = tmp_path / "d.txt"
        assert main(["export-domain", str(cfg), "-o", str(dom)]) == 0
        back = read_domain(dom)
        # a config reading the exported file rebuilds the same edge graph
        text = PATCH.replace("outline = rectangle", f"outline = file\ndomain_file = {dom}")
        cfg2 = _write(tmp_path, text, "again.cfg")
        dom2 = tmp_path / "d2.txt"
        assert main(["export-domain", str(cfg2), "-o", str(dom2)]) == 0
        assert dom2.read_bytes() == dom.read_bytes()
        assert back.npoints == 36

    def test_file_outline_runs(self, tmp_path):
        cfg = _write(tmp_path, PATCH)
        dom = tmp_path / "d.txt"
        main(["export-domain", str(cfg), "-o", str(dom)])
        text = PATCH.replace("outline = rectangle", f"outline = file\ndomain_file = {dom}")
        assert main(["run", str(_write(tmp_path, text, "file.cfg"))]) == 0
        a = np.loadtxt(tmp_path / "out" / "nodal.csv", delimiter=",", skiprows=1)
        assert a.shape == (36, 6)
