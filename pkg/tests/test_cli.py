import json
import subprocess
import sys

import pytest

from lcgeom.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, main, validate

SQUARE = {"variant": "pla", "dim": 2, "C": [[1, 0], [-1, 0], [0, 1], [0, -1]], "d": [1, 1, 1, 1]}
GAUSS = {"variant": "gaussian", "dim": 2}


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def small_config(**extra):
    cfg = {
        "seed": 11,
        "budget": 4000,
        "functions": {"g": GAUSS, "sq": SQUARE},
        "tasks": [
            {"compute": "quermassintegral", "f": "g", "j": 1},
            {"compute": "john_function", "f": "sq"},
            {"check": "t3", "inputs": ["g", "g"], "params": {"k": 1}},
            {"check": "sobolev", "inputs": ["sq"]},
            {"check": "alexandrov_norm", "inputs": ["sq"], "params": {"k": 1}},
        ],
    }
    cfg.update(extra)
    return cfg


class TestValidate:
    def test_clean(self):
        assert validate(small_config()) == []

    def test_empty_tasks_is_a_warning(self):
        diags = validate(small_config(tasks=[]))
        assert [d.level for d in diags] == ["warning"]

    def test_psd_violation_names_the_matrix(self):
        cfg = small_config()
        cfg["functions"]["bad"] = {"variant": "gaussian", "dim": 2, "precision": [[1, 2], [2, 1]]}
        (d,) = validate(cfg)
        assert d.level == "error" and d.path == "$.functions.bad" and "precision" in d.message

    def test_unknown_check_names_the_field(self):
        cfg = small_config(tasks=[{"check": "t42", "inputs": ["g"]}])
        (d,) = validate(cfg)
        assert d.path == "$.tasks[0].check" and "t42" in d.message

    def test_undefined_function_and_missing_argument(self):
        cfg = small_config(tasks=[{"compute": "quermassintegral", "f": "nope"}])
        paths = sorted(d.path for d in validate(cfg))
        assert paths == ["$.tasks[0].f", "$.tasks[0].j"]

    def test_all_errors_reported_together(self):
        cfg = small_config(seed=-1, budget=0)
        assert {d.path for d in validate(cfg)} == {"$.seed", "$.budget"}

    def test_exit_codes(self, tmp_path, capsys):
        assert main(["validate", write(tmp_path, "ok.json", small_config())]) == EXIT_OK
        bad = small_config(tasks=[{"check": "t42", "inputs": ["g"]}])
        assert main(["validate", write(tmp_path, "bad.json", bad)]) == EXIT_CONFIG
        (tmp_path / "broken.json").write_text('{"seed": 1,\n  "tasks": [}')
        assert main(["validate", str(tmp_path / "broken.json")]) == EXIT_CONFIG
        assert "broken.json:2:" in capsys.readouterr().out


def test_run_is_deterministic_across_jobs(tmp_path):
    cfg = write(tmp_path, "cfg.json", small_config())
    out = tmp_path / "out"
    assert main(["run", cfg, "--out", str(out)]) == EXIT_OK
    assert main(["run", cfg, "--out", str(out), "--jobs", "2"]) == EXIT_OK
    for name in ("summary.csv", "computations.csv", "report.json"):
        assert (out / "run-001" / name).read_bytes() == (out / "run-002" / name).read_bytes()
    report = json.loads((out / "run-001" / "report.json").read_text())
    assert report["counts"]["pass"] == 3
    rows = (out / "run-001" / "computations.csv").read_text().splitlines()
    assert rows[1].split(",")[4].startswith("3.937")


def test_failed_or_errored_task_sets_exit_status(tmp_path):
    big = {"variant": "pla", "dim": 2, "C": SQUARE["C"], "d": [2, 2, 2, 2]}
    cfg = small_config(functions={"big": big, "sq": SQUARE},
                       tasks=[{"check": "t1", "inputs": ["big", "sq"]}])
    out = tmp_path / "out"
    assert main(["run", write(tmp_path, "c.json", cfg), "--out", str(out)]) == EXIT_FAIL
    report = json.loads((out / "run-001" / "report.json").read_text())
    assert report["counts"]["error"] == 1
    assert "HypothesisError" in report["checks"][0]["error"]


def test_compute_and_check_commands(tmp_path, capsys):
    fn = write(tmp_path, "g.json", GAUSS)
    assert main(["compute", "lp_norm", "--fn", fn, "--arg", "p=2"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["estimate"]["value"] == pytest.approx(1.7724538509055159)
    assert main(["check", "t3", "--fn", fn, "--fn", fn, "--param", "k=1"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["verdict"] == "pass"
    assert main(["compute", "quermassintegral", "--fn", fn]) == EXIT_CONFIG
    assert main(["check", "zz", "--fn", fn]) == EXIT_CONFIG


def test_console_entry_point(tmp_path):
    cfg = write(tmp_path, "cfg.json", small_config(tasks=[]))
    res = subprocess.run([sys.executable, "-m", "lcgeom.cli", "validate", cfg], capture_output=True, text=True)
    assert res.returncode == 0
    assert "warning" in res.stdout
