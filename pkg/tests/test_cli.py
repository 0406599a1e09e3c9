import csv
import io
import json
import math
import shutil
import subprocess
import sys

import pytest

from bsplan import cli
from bsplan.errors import NumericalInstabilityError

from conftest import TABLE8

PLAN_ARGS = ["--n", "4", "--h", "0.3", "--k", "3"]


def run_json(tmp_path, argv, name="out.json"):
    out = tmp_path / name
    assert cli.main(argv + ["--out", str(out)]) == 0
    return json.loads(out.read_text())


def write_counts(tmp_path, rows, name="d.csv"):
    p = tmp_path / name
    lines = ["interval,cause_1,cause_2"] + [f"{i + 1},{a},{b}" for i, (a, b) in enumerate(rows)]
    p.write_text("\n".join(lines) + "\n")
    return str(p)


def write_config(tmp_path, name="cfg.json", **cost_changes):
    raw = cli.load_config("example1").as_dict()
    raw["costs"].update(cost_changes)
    p = tmp_path / name
    p.write_text(json.dumps(raw))
    return str(p)


@pytest.fixture(scope="module")
def design_report(tmp_path_factory):
    path = tmp_path_factory.mktemp("design") / "design.json"
    assert cli.main(["design", "--decision", "reliability", "--out", str(path)]) == 0
    return path


class TestDesign:
    def test_table1(self, design_report):
        rep = json.loads(design_report.read_text())
        assert (rep["plan"]["n"], round(rep["plan"]["h"], 2), rep["plan"]["k"]) == (4, 0.3, 3)
        assert rep["rule"] == {"kind": "reliability", "r0": 0.76}
        assert rep["risk"]["total_risk"] == pytest.approx(33.90826, abs=1e-5)

    def test_round_trip(self, design_report, tmp_path):
        rep = json.loads(design_report.read_text())
        again = run_json(tmp_path, ["evaluate", "--report", str(design_report)])
        assert again["risk"]["total_risk"] == pytest.approx(rep["risk"]["total_risk"], abs=1e-9)

    def test_no_sampling(self, tmp_path):
        rep = run_json(tmp_path, ["design", "--config", write_config(tmp_path, c_reject=20.0)])
        assert rep["no_sampling"] and rep["risk"]["total_risk"] == 20.0

    def test_text_summary(self, design_report, capsys):
        text = cli.text_summary(json.loads(design_report.read_text()))
        assert "risk.total_risk" in text and "plan.n" in text


class TestEvaluate:
    def test_table1(self, tmp_path):
        rep = run_json(tmp_path, ["evaluate", "--decision", "reliability", "--r0", "0.76"] + PLAN_ARGS)
        assert rep["risk"]["total_risk"] == pytest.approx(33.90826, abs=1e-5)
        assert rep["risk"]["p_accept"] == pytest.approx(0.489, abs=1e-3)

    def test_time_cost_variant(self, tmp_path):
        cfg = write_config(tmp_path, c_time=0.5)
        rep = run_json(tmp_path, ["evaluate", "--config", cfg, "--decision", "reliability", "--r0", "0.76",
                                  "--n", "5", "--h", "0.29", "--k", "2"])
        assert rep["risk"]["total_risk"] == pytest.approx(34.04424, abs=1e-5)

    def test_no_sampling(self, tmp_path):
        rep = run_json(tmp_path, ["evaluate", "--n", "0"])
        assert rep["risk"]["total_risk"] == 40.0

    def test_epochs(self, tmp_path):
        a = run_json(tmp_path, ["evaluate"] + PLAN_ARGS, "a.json")
        b = run_json(tmp_path, ["evaluate", "--n", "4", "--epochs", "0.3,0.6,0.9"], "b.json")
        assert a["risk"]["total_risk"] == pytest.approx(b["risk"]["total_risk"], rel=1e-12)

    def test_approx_needs_threshold(self, tmp_path):
        assert cli.main(["evaluate", "--decision", "approx"] + PLAN_ARGS) == 2


class TestDecide:
    @pytest.mark.parametrize("row, r_hat, phi, verdict", [
        (0, 0.971, 8.439, "accept"),
        (5, 0.693, 53.155, "reject"),
    ])
    def test_table8(self, tmp_path, row, r_hat, phi, verdict):
        data = write_counts(tmp_path, TABLE8[row])
        for kind in (["--decision", "bayes"], ["--decision", "reliability", "--r0", "0.76"]):
            rep = run_json(tmp_path, ["decide", "--data", data] + kind + PLAN_ARGS)
            assert rep["r_hat"] == pytest.approx(r_hat, abs=1e-3)
            assert rep["phi"] == pytest.approx(phi, abs=0.01)
            assert rep["verdict"] == verdict

    def test_no_failures(self, tmp_path):
        rep = run_json(tmp_path, ["decide", "--data", write_counts(tmp_path, [[0, 0]] * 3)] + PLAN_ARGS)
        assert rep["no_failure_fallback"]
        assert rep["r_hat"] == pytest.approx(math.exp(-0.1 / (4 * 0.9)), rel=1e-12)

    @pytest.mark.parametrize("text", [
        "interval,cause_1\n1,0\n",                                   # wrong number of causes
        "interval,cause_1,cause_2\n1,0,0\n2,0,0\n3,0,0\n4,0,0\n",     # more rows than inspections
        "interval,cause_1,cause_2\n2,0,0\n1,0,0\n",                   # out of order
        "interval,cause_1,cause_2\n1,3,3\n",                          # more failures than units
        "interval,cause_1,cause_2\n1,x,0\n",
    ])
    def test_bad_counts(self, tmp_path, text):
        p = tmp_path / "bad.csv"
        p.write_text(text)
        assert cli.main(["decide", "--data", str(p)] + PLAN_ARGS) == 2


class TestSimulate:
    def test_table1(self, tmp_path):
        rep = run_json(tmp_path, ["simulate", "--reps", "100000", "--seed", "1"] + PLAN_ARGS)
        oc = rep["oc"]["p_accept"]
        assert abs(oc["mean"] - 0.4888324103141328) < 3 * oc["se"]

    def test_byte_identical(self, tmp_path):
        argv = ["simulate", "--reps", "5000", "--seed", "3"] + PLAN_ARGS
        cli.main(argv + ["--out", str(tmp_path / "a.json")])
        cli.main(argv + ["--out", str(tmp_path / "b.json")])
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_single_rep(self, tmp_path):
        rep = run_json(tmp_path, ["simulate", "--reps", "1"] + PLAN_ARGS)
        assert rep["se_defined"] is False and rep["oc"]["p_accept"]["se"] is None


class TestTables:
    def test_table8(self, capsys):
        assert cli.main(["tables", "8"]) == 0
        rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
        assert [round(float(r["r_hat"]), 3) for r in rows] == [0.971, 0.973, 0.860, 0.754, 0.693, 0.693]
        assert [float(r["phi"]) for r in rows] == pytest.approx([8.439, 6.063, 22.219, 42.531, 55.898, 53.155],
                                                                abs=0.01)

    def test_table1(self, tmp_path):
        assert cli.main(["tables", "1", "--out", str(tmp_path)]) == 0
        rows = list(csv.DictReader((tmp_path / "table1.csv").open()))
        assert [r["type"] for r in rows] == ["I", "II"]
        for r in rows:
            assert float(r["risk"]) == pytest.approx(33.90826, abs=1e-4)

    def test_unknown(self, capsys):
        assert cli.main(["tables", "9"]) == 2
        assert "unknown table" in capsys.readouterr().err


class TestConfig:
    def test_negative_eta(self, tmp_path, capsys):
        raw = cli.load_config("example1").as_dict()
        raw["prior"]["eta"] = -1.0
        p = tmp_path / "c.json"
        p.write_text(json.dumps(raw))
        assert cli.main(["design", "--config", str(p)]) == 2
        assert "prior.eta" in capsys.readouterr().err

    @pytest.mark.parametrize("mutate, fragment", [
        (lambda r: r["costs"].pop("t0"), "t0"),
        (lambda r: r["prior"].update(beta=1), "beta"),
        (lambda r: r.update(extra={}), "extra"),
        (lambda r: r["costs"].update(c_lin=[4.0], c_quad=[[4.0]]), "causes"),
        (lambda r: r["costs"].update(c_lin=[4.0]), "c_quad"),
    ])
    def test_diagnostics(self, tmp_path, capsys, mutate, fragment):
        raw = cli.load_config("example1").as_dict()
        mutate(raw)
        p = tmp_path / "c.json"
        p.write_text(json.dumps(raw))
        assert cli.main(["evaluate", "--config", str(p)] + PLAN_ARGS) == 2
        assert fragment in capsys.readouterr().err

    def test_bad_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{")
        assert cli.main(["evaluate", "--config", str(p)] + PLAN_ARGS) == 2

    def test_missing_file(self):
        assert cli.main(["evaluate", "--config", "/nonexistent/x.json"] + PLAN_ARGS) == 2

    def test_bundled_round_trip(self):
        for name in ("example1", "example2"):
            cfg = cli.load_config(name)
            assert cli.config_from_dict(cfg.as_dict()).as_dict() == cfg.as_dict()


class TestExitCodes:
    def test_usage_error(self):
        assert cli.main(["design", "--decision", "nope"]) == 2

    def test_missing_plan(self):
        assert cli.main(["evaluate"]) == 2

    def test_numerical_failure(self, monkeypatch, capsys):
        def boom(*args, **kwargs):
            raise NumericalInstabilityError("cancellation")
        monkeypatch.setattr(cli, "bayes_risk", boom)
        assert cli.main(["evaluate"] + PLAN_ARGS) == 3
        assert "numerical failure" in capsys.readouterr().err

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "bsplan", "tables", "9"], capture_output=True, text=True)
        assert proc.returncode == 2

    @pytest.mark.skipif(shutil.which("bsplan") is None, reason="console script not installed")
    def test_console_script(self):
        proc = subprocess.run(["bsplan", "evaluate", "--n", "0"], capture_output=True, text=True)
        assert proc.returncode == 0 and "total_risk" in proc.stdout
