import json

import numpy as np
import pytest

from netforms.cli import main
from netforms.io import atomic_write_json


@pytest.fixture
def star_file(tmp_path):
    path = tmp_path / "net.json"
    assert main(["build", "--space", "star", "--N", "3", "--k", "2",
                 "--a", "1.0,0.5,2.0", "--out", str(path)]) == 0
    return path


class TestBuild:
    def test_star_roundtrip(self, star_file):
        obj = json.loads(star_file.read_text())
        assert len(obj["vertices"]) == 7
        assert "geometry" in obj and "mu" in obj

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        args = ["build", "--space", "gasket", "--level", "2", "--out"]
        assert main(args + [str(a)]) == 0
        assert main(args + [str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_stdout_mode(self, capsys):
        assert main(["build", "--space", "path", "--k", "2"]) == 0
        obj = json.loads(capsys.readouterr().out)
        assert obj["vertices"] == ["x0", "x1/2", "x1"]


class TestMetrics:
    def test_resistance_csv(self, star_file, tmp_path):
        out = tmp_path / "table.csv"
        assert main(["metrics", "--input", str(star_file), "--kind", "resistance",
                     "--pairs", "p,q1", "--out", str(out)]) == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "x,y,value,solver_iterations,certified_gap"
        x, y, value, iters, gap = lines[1].split(",")
        assert (x, y) == ("p", "q1")
        assert float(value) == pytest.approx(1.0, abs=1e-10)

    def test_intrinsic_csv_with_measure_file(self, star_file, tmp_path):
        obj = json.loads(star_file.read_text())
        m_path = tmp_path / "m.json"
        atomic_write_json(str(m_path), obj["mu"])
        out = tmp_path / "intr.csv"
        assert main(["metrics", "--input", str(star_file), "--kind", "intrinsic",
                     "--m", str(m_path), "--pairs", "p,q2", "--out", str(out)]) == 0
        lines = out.read_text().strip().splitlines()
        value = float(lines[1].split(",")[2])
        assert value == pytest.approx(np.sqrt(0.5), abs=1e-6)
        assert float(lines[1].split(",")[4]) < 1e-7

    def test_all_pairs(self, star_file, tmp_path):
        out = tmp_path / "all.csv"
        assert main(["metrics", "--input", str(star_file), "--kind",
                     "sqrt_resistance", "--out", str(out)]) == 0
        assert len(out.read_text().strip().splitlines()) == 1 + 7 * 6 // 2


class TestDirac:
    def test_spectrum_report(self, star_file, tmp_path):
        out = tmp_path / "spectrum.json"
        assert main(["dirac", "--input", str(star_file), "--mu", "uniform",
                     "--check", "spectral-structure", "--out", str(out)]) == 0
        obj = json.loads(out.read_text())
        assert obj["spectrum"]["pass"] is True
        vals = obj["spectrum"]["eigenvalues"]
        assert vals == sorted(vals)
        assert obj["spectrum"]["kernel_dimension"] == 1   # tree

    def test_gasket_with_kusuoka(self, tmp_path):
        out = tmp_path / "spec.json"
        assert main(["dirac", "--space", "gasket", "--level", "1",
                     "--mu", "kusuoka", "--out", str(out)]) == 0
        obj = json.loads(out.read_text())
        assert obj["spectrum"]["cycle_space_dimension"] == 4


class TestConnes:
    def test_single_network_report(self, star_file, tmp_path):
        out = tmp_path / "connes.json"
        assert main(["connes", "--input", str(star_file), "--pairs", "p,q1",
                     "--out", str(out)]) == 0
        obj = json.loads(out.read_text())
        assert obj["distances"][0]["x"] == "p"
        assert all(s["pass"] for s in obj["bracket_samples"])

    def test_refinement_report(self, tmp_path):
        out = tmp_path / "refine.json"
        assert main(["connes", "--space", "path", "--pairs", "x0,x1",
                     "--refine", "4,16", "--out", str(out)]) == 0
        obj = json.loads(out.read_text())
        levels = obj["coincidence"]["details"]["levels"]
        assert [lv["k"] for lv in levels] == [4, 16]

    def test_refine_requires_tree_space(self, star_file):
        assert main(["connes", "--input", str(star_file), "--space", "file",
                     "--pairs", "p,q1", "--refine", "4,16"]) == 2


class TestVerifyAndReport:
    def test_verify_happy_path(self, tmp_path, capsys):
        out = tmp_path / "suite.json"
        code = main(["verify", "--space", "star", "--N", "3", "--k", "4",
                     "--seed", "7", "--out", str(out)])
        assert code == 0
        printed = capsys.readouterr().out
        assert "PASS" in printed and "FAIL" not in printed
        obj = json.loads(out.read_text())
        assert obj["failures"] == 0
        assert obj["seed"] == 7

    def test_report_bundle(self, tmp_path):
        out = tmp_path / "bundle.json"
        assert main(["report", "--space", "gasket", "--level", "1",
                     "--mu", "kusuoka", "--seed", "3", "--out", str(out)]) == 0
        obj = json.loads(out.read_text())
        assert {"resistance_table", "spectrum", "bracket_samples",
                "kernel_dimensions", "config", "tolerances"} <= set(obj)


class TestErrors:
    def test_malformed_json_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"vertices": [,]}')
        assert main(["metrics", "--input", str(bad)]) == 2
        err = capsys.readouterr().err
        assert "line" in err and "column" in err

    def test_schema_violation(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"vertices": ["a"], "edges": [], "bogus": 1}))
        assert main(["metrics", "--input", str(bad)]) == 2
        assert "unknown fields" in capsys.readouterr().err

    def test_unknown_tolerance(self, star_file):
        assert main(["metrics", "--input", str(star_file),
                     "--tol", "nope=1"] ) == 2

    def test_disconnected_network(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"vertices": ["a", "b"], "edges": []}))
        assert main(["metrics", "--input", str(bad)]) == 2
        assert "disconnected" in capsys.readouterr().err
