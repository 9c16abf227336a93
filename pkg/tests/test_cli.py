import csv
import hashlib
import json
import math
import subprocess
import sys
from fractions import Fraction as F

import pytest

from privht.cli import EXIT_BUDGET, EXIT_INVALID, EXIT_OK, EXIT_UNDEFINED, main
from privht.io import hypotheses_to_dict, load_hypotheses

THREE_POINT_JSON = {"alphabet_x": ["0", "1"], "alphabet_y": ["0", "1"],
                    "p0": [["1/3", "1/3"], ["0", "1/3"]], "p1": [["2/3", "0"], ["0", "1/3"]]}


@pytest.fixture
def hyp_file(tmp_path):
    path = tmp_path / "h.json"
    path.write_text(json.dumps(THREE_POINT_JSON))
    return path


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return path


class TestHypothesisFiles:
    def test_round_trip(self, hyp_file, three_point):
        h = load_hypotheses(hyp_file)
        assert h == three_point
        assert hypotheses_to_dict(h)["p1"][0][0] == "2/3"

    def test_decimal_entries(self, tmp_path):
        doc = {"p0": [["0.25", "0.25"], ["0.25", "0.25"]], "p1": [[0.5, 0], [0, 0.5]]}
        h = load_hypotheses(write(tmp_path, "d.json", doc))
        assert h.p0[0, 0] == F(1, 4) and h.p1[1, 1] == F(1, 2) and h.exact

    def test_bad_entry_has_field_path(self, tmp_path, capsys):
        doc = dict(THREE_POINT_JSON, p1=[["2/3", "zero"], ["0", "1/3"]])
        code = main(["region", "--hypotheses", str(write(tmp_path, "b.json", doc)), "--alpha", "0"])
        assert code == EXIT_INVALID
        assert "$.p1[0][1]" in capsys.readouterr().err

    def test_not_normalized(self, tmp_path, capsys):
        doc = dict(THREE_POINT_JSON, p0=[["1/3", "1/3"], ["0", "1/2"]])
        assert main(["region", "--hypotheses", str(write(tmp_path, "b.json", doc))]) == EXIT_INVALID
        assert "$.p0" in capsys.readouterr().err

    def test_missing_file(self, capsys):
        assert main(["region", "--hypotheses", "/nonexistent/h.json"]) == EXIT_INVALID


class TestRegion:
    def test_boundary_csv(self, tmp_path, hyp_file):
        out = tmp_path / "boundary.csv"
        assert main(["region", "--hypotheses", str(hyp_file), "--alpha", "0:0.3:0.1", "--out", str(out)]) == EXIT_OK
        rows = list(csv.DictReader(out.open()))
        assert list(rows[0]) == ["alpha", "beta_star", "binding_condition", "witness_q", "seed"]
        betas = [float(r["beta_star"]) for r in rows]
        assert all(a >= b for a, b in zip(betas, betas[1:]))
        assert abs(betas[0] - 2 / 3) < 1e-3 and rows[0]["binding_condition"] == "II"
        manifest = json.loads((tmp_path / "boundary.csv.manifest.json").read_text())
        assert manifest["seed"] == 0
        assert manifest["output"]["sha256"] == hashlib.sha256(out.read_bytes()).hexdigest()
        assert manifest["inputs"]["hypotheses"]["sha256"] == hashlib.sha256(hyp_file.read_bytes()).hexdigest()

    def test_beyond_cap_row(self, capsys):
        assert main(["region", "--alpha", "0.7"]) == EXIT_OK
        row = list(csv.DictReader(capsys.readouterr().out.splitlines()))[0]
        assert row["beta_star"] == "undefined" and row["witness_q"] != "none"

    def test_identical_config_identical_output(self, tmp_path):
        outs = []
        for i in range(2):
            out = tmp_path / f"b{i}.csv"
            main(["region", "--alpha", "0:0.2:0.1", "--out", str(out)])
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_parallel_matches_serial(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["region", "--alpha", "0:0.3:0.1", "--out", str(a)])
        main(["region", "--alpha", "0:0.3:0.1", "--jobs", "2", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_bad_grid(self, capsys):
        assert main(["region", "--alpha", "0:1:-1"]) == EXIT_INVALID


class TestEvaluate:
    def test_records(self, tmp_path):
        out = tmp_path / "stats.json"
        assert main(["evaluate", "--alpha", "0.1", "--beta", "0.2", "--n-range", "2:8", "--out", str(out)]) == EXIT_OK
        doc = json.loads(out.read_text())
        assert [r["n"] for r in doc["records"]] == list(range(2, 9))
        for r in doc["records"]:
            delta = F(r["delta_exact"])
            assert delta == 0 or -math.log2(delta) / r["n"] >= 0.1
            assert set(r["per_theta"]) == {"0", "1"}
        assert doc["exponent_fits"]["mu_exact"]["slope"] > 0

    def test_clash_outside_region(self, capsys):
        assert main(["evaluate", "--alpha", "0.6", "--beta", "0.1", "--n-range", "1:6"]) == EXIT_UNDEFINED
        assert "both hypotheses" in capsys.readouterr().err

    def test_bad_range(self):
        assert main(["evaluate", "--alpha", "0.1", "--beta", "0.1", "--n-range", "a:b"]) == EXIT_INVALID


class TestProtocolCommands:
    def test_audit_secure_and(self, tmp_path, capsys):
        proto = write(tmp_path, "p.json", {"construction": "secure-eval",
                                           "tables": {"A": [[0, 0], [0, 1]], "B": [[0, 0], [0, 1]]}})
        assert main(["audit", "--protocol", str(proto), "--n", "1"]) == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["definition"] == "strict" and "mu" in doc

    def test_audit_malformed_json(self, tmp_path, capsys):
        proto = write(tmp_path, "p.json", '{"schedule": ["A",\n  ]}')
        assert main(["audit", "--protocol", str(proto), "--n", "1"]) == EXIT_INVALID
        assert "line 2" in capsys.readouterr().err

    def test_audit_schema_error(self, tmp_path, capsys):
        proto = write(tmp_path, "p.json", {"input_sizes": [2, 2], "schedule": ["X"],
                                           "next_message": {}, "decisions": {"A": {}, "B": {}}})
        assert main(["audit", "--protocol", str(proto), "--n", "1"]) == EXIT_INVALID
        assert "$.schedule[0]" in capsys.readouterr().err

    def test_budget_exit(self, tmp_path):
        proto = write(tmp_path, "p.json", {"construction": "achievability-secure-eval", "alpha": 0.4, "beta": 0.25})
        assert main(["audit", "--protocol", str(proto), "--n", "2", "--budget", "1000"]) == EXIT_BUDGET

    def test_simulate_exact(self, tmp_path, capsys):
        proto = write(tmp_path, "p.json", {"construction": "reveal-equality"})
        assert main(["simulate", "--protocol", str(proto), "--n", "1", "--preset", "diagonal"]) == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["error"]["A|theta=0"] == "1/2"

    def test_simulate_sampled_is_seeded(self, tmp_path, capsys):
        proto = write(tmp_path, "p.json", {"construction": "coin-flip"})
        args = ["simulate", "--protocol", str(proto), "--n", "1", "--mode", "sampled", "--seed", "7",
                "--samples", "500"]
        main(args)
        first = capsys.readouterr().out
        main(args)
        assert capsys.readouterr().out == first
        assert json.loads(first)["note"].startswith("sampled")

    def test_reduce_and(self, tmp_path, capsys):
        proto = write(tmp_path, "p.json", {"construction": "reveal-equality"})
        assert main(["reduce-and", "--protocol", str(proto), "--n", "3"]) == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["measured"]["err_max"] == "1/8"
        assert F(doc["measured"]["tv_B"]) >= F(7, 8)
        assert doc["within_tau"]

    def test_converse_with_tables(self, capsys):
        assert main(["converse", "--q", "counts=4,0;0,2", "--theta", "1"]) == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["s_fraction"]["fraction"] == "1"

    def test_converse_bob_side(self, capsys):
        assert main(["converse", "--q", "counts=0,1;0,0", "--theta", "1", "--side", "B"]) == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        # a single (0, 1) sample sits closer to the null, so the table never claims the alternate
        assert doc["own_counts"] == [0, 1] and doc["s_fraction"]["fraction"] == "0"
        assert [r["sequence"] for r in doc["posterior_shifts"]] == ["1"]

    def test_converse_shape_mismatch(self):
        assert main(["converse", "--q", "counts=1,0,0;0,1,0"]) == EXIT_INVALID


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "privht.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "privht" in res.stdout
