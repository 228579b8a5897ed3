import json
from pathlib import Path

import numpy as np

from hessneumann.cli import main

REPO = Path(__file__).resolve().parent.parent


def write_problem(tmp_path, doc, name="prob.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def small_paraboloid_doc(m=9):
    return {
        "n": 3,
        "k": 2,
        "beta": 1.0,
        "box": {"lo": [0.0, 0.0, 0.0], "hi": [1.0, 1.0, 1.0], "m": m},
        "psi": {"kind": "constant", "value": 12.0},
        "phi": {"kind": "expression", "expr": "0.5 + 0.5*((x1-0.5)^2 + (x2-0.5)^2 + (x3-0.5)^2)"},
    }


class TestVerifyLemmas:
    def test_small_run_clean_and_deterministic(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        args = ["verify-lemmas", "--n-max", "3", "--samples", "2000", "--seed", "5"]
        assert main(args + ["--out", str(out_a)]) == 0
        assert main(args + ["--out", str(out_b)]) == 0
        assert (out_a / "summary.csv").read_bytes() == (out_b / "summary.csv").read_bytes()
        names = sorted(p.name for p in out_a.glob("*.json"))
        # n in {2, 3}: 3 pure families over 3 (n,k) pairs, 2 quotient families
        # over the single (3, 2, 1) triple
        assert len(names) == 3 * 3 + 2
        doc = json.loads((out_a / "ellipticity-ratio_n3_k2.json").read_text())
        assert doc["violations"] == 0 and doc["samples"] == 2000

    def test_empty_sweep_usage_error(self, tmp_path):
        assert main(["verify-lemmas", "--samples", "0", "--out", str(tmp_path)]) == 2

    def test_bad_n_max(self, tmp_path):
        assert main(["verify-lemmas", "--n-max", "9", "--out", str(tmp_path)]) == 2


class TestSolve:
    def test_bundled_paraboloid_small(self, tmp_path):
        prob = write_problem(tmp_path, small_paraboloid_doc())
        out = tmp_path / "out"
        code = main(["solve", "--problem", str(prob), "--out", str(out), "--dump-field"])
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["converged"] is True
        assert report["residual_norm"] < 1e-9
        assert (out / "solution.csv").exists() and (out / "solution.bin").exists()
        from hessneumann.fieldio import read_field_binary

        n, m, values = read_field_binary(out / "solution.bin")
        assert (n, m) == (3, 9)
        # unique solution is the centered paraboloid
        pts = np.stack(np.meshgrid(*(np.linspace(0, 1, 9),) * 3, indexing="ij"), axis=-1)
        exact = 0.5 * ((pts - 0.5) ** 2).sum(axis=-1)
        assert np.abs(values - exact).max() < 1e-9

    def test_beta_validation(self, tmp_path):
        doc = small_paraboloid_doc()
        doc["beta"] = -1.0
        assert main(["solve", "--problem", str(write_problem(tmp_path, doc)), "--out", str(tmp_path)]) == 2

    def test_negative_psi_rejected(self, tmp_path):
        doc = small_paraboloid_doc()
        doc["psi"] = {"kind": "constant", "value": -3.0}
        assert main(["solve", "--problem", str(write_problem(tmp_path, doc)), "--out", str(tmp_path)]) == 2

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{", encoding="utf-8")
        assert main(["solve", "--problem", str(path), "--out", str(tmp_path)]) == 2

    def test_missing_file(self, tmp_path):
        assert main(["solve", "--problem", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == 2

    def test_nonconvergence_exit_code(self, tmp_path):
        doc = small_paraboloid_doc()
        doc["psi"] = {"kind": "constant", "value": 40.0}
        prob = write_problem(tmp_path, doc)
        out = tmp_path / "out"
        code = main(["solve", "--problem", str(prob), "--out", str(out), "--max-iter", "1"])
        assert code == 1
        report = json.loads((out / "report.json").read_text())
        assert report["converged"] is False and report["continuation"]

    def test_bundled_problem_files_load(self):
        from hessneumann.problem import load_problem

        for name in ("paraboloid-17.json", "psi-zero-17.json"):
            spec = load_problem(REPO / "problems" / name)
            assert spec.grid.m == 17 and spec.op.k == 2


class TestMmsStudy:
    def test_paraboloid_exact(self, tmp_path):
        code = main(["mms-study", "--case", "paraboloid", "--grids", "9,17", "--out", str(tmp_path)])
        assert code == 0
        rows = (tmp_path / "mms_paraboloid.csv").read_text().strip().splitlines()
        assert rows[0] == "m,h,error_inf,observed_order"
        assert all(line.endswith(",exact") for line in rows[1:])

    def test_2d_order(self, tmp_path):
        code = main(["mms-study", "--case", "perturbed-paraboloid-2d", "--grids", "9,17,33", "--out", str(tmp_path)])
        assert code == 0
        rows = (tmp_path / "mms_perturbed-paraboloid-2d.csv").read_text().strip().splitlines()
        final_order = float(rows[-1].rsplit(",", 1)[1])
        assert final_order >= 1.7

    def test_unknown_case(self, tmp_path):
        assert main(["mms-study", "--case", "nope", "--out", str(tmp_path)]) == 2

    def test_bad_grids(self, tmp_path):
        assert main(["mms-study", "--case", "paraboloid", "--grids", "9", "--out", str(tmp_path)]) == 2
        assert main(["mms-study", "--case", "paraboloid", "--grids", "a,b", "--out", str(tmp_path)]) == 2


class TestSampleCone:
    def test_deterministic_csv(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["sample-cone", "--n", "3", "--k", "2", "--count", "50", "--seed", "42"]
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        lines = a.read_text().strip().splitlines()
        assert lines[0] == "index,eta1,eta2,eta3"
        assert len(lines) == 51

    def test_samples_are_in_cone(self, tmp_path):
        out = tmp_path / "s.csv"
        assert main(["sample-cone", "--n", "4", "--k", "3", "--count", "20", "--seed", "1", "--out", str(out)]) == 0
        data = np.loadtxt(out, delimiter=",", skiprows=1)[:, 1:]
        from hessneumann.symfun import in_gamma

        assert in_gamma(data, 3).all()

    def test_bad_count(self):
        assert main(["sample-cone", "--n", "3", "--k", "2", "--count", "0"]) == 2

    def test_bad_cone_index(self):
        assert main(["sample-cone", "--n", "3", "--k", "5", "--count", "5"]) == 2


class TestParser:
    def test_unknown_command_exits_2(self, capsys):
        assert main(["frobnicate"]) == 2
        capsys.readouterr()

    def test_missing_required_flag(self, capsys):
        assert main(["solve"]) == 2
        capsys.readouterr()
