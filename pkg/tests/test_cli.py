import io
import json
import unittest
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path
from tempfile import TemporaryDirectory

from okmeans.cli import main
from okmeans.datasets import load_csv

RECIPE = """\
name = cli-smoke
dataset = planted
planted_k = 2
cluster_size = 40
planted_z = 4
separation = 10
data_seed = 3
k = 2
methods = okmeans:c=3, kmeanspp
seeds = 0-1
executor = thread
workers = 2
format = csv
"""


def _run(*argv: str) -> tuple[int, str, str]:
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


class TestTheory(unittest.TestCase):
    def test_single_c(self) -> None:
        code, out, _ = _run("theory", "--c-list", "3")
        self.assertEqual(code, 0)
        lines = out.splitlines()
        self.assertEqual(lines[0], "c,phi,psi,zeta,root_phi,root_psi")
        self.assertTrue(lines[1].startswith("3,9,"))

    def test_invalid_c(self) -> None:
        code, _, err = _run("theory", "--c-list", "1")
        self.assertEqual(code, 2)
        self.assertEqual(json.loads(err)["error_type"], "ContractViolation")


class TestRun(unittest.TestCase):
    def test_json_report_is_reproducible(self) -> None:
        with TemporaryDirectory() as d:
            cfg = Path(d) / "smoke.cfg"
            cfg.write_text(RECIPE, encoding="utf-8")
            first = _run("run", str(cfg), "--quiet", "--no-timing", "--format", "json")
            second = _run("run", str(cfg), "--quiet", "--no-timing", "--format", "json")
        self.assertEqual(first[0], 0)
        self.assertEqual(first[1], second[1])
        payload = json.loads(first[1])
        self.assertEqual([r["method"] for r in payload["rows"]], ["OKMeans(c=3)", "KMeans++"])
        self.assertEqual(payload["rows"][0]["recall_mean"], 1.0)

    def test_format_flag_beats_set(self) -> None:
        with TemporaryDirectory() as d:
            cfg = Path(d) / "smoke.cfg"
            cfg.write_text(RECIPE, encoding="utf-8")
            code, out, _ = _run("run", str(cfg), "--quiet", "--set", "format=json", "--format", "markdown")
        self.assertEqual(code, 0)
        self.assertTrue(out.startswith("> "))

    def test_output_file(self) -> None:
        with TemporaryDirectory() as d:
            cfg = Path(d) / "smoke.cfg"
            cfg.write_text(RECIPE, encoding="utf-8")
            report = Path(d) / "reports" / "smoke.csv"
            code, out, _ = _run("run", str(cfg), "--quiet", "--output", str(report))
            self.assertEqual(code, 0)
            self.assertIn("Methods: success=2 failed=0", out)
            self.assertTrue(report.read_text(encoding="utf-8").startswith("method,dataset,"))

    def test_failed_method_exits_one(self) -> None:
        with TemporaryDirectory() as d:
            cfg = Path(d) / "smoke.cfg"
            cfg.write_text(
                RECIPE + "methods = baseline:name=bad\nbaseline.bad = okmeans.nope:missing\n", encoding="utf-8"
            )
            code, _, err = _run("run", str(cfg), "--quiet")
        self.assertEqual(code, 1)
        self.assertEqual(json.loads(err.splitlines()[-1])["event"], "method_failed")

    def test_bad_config_exits_two(self) -> None:
        with TemporaryDirectory() as d:
            cfg = Path(d) / "bad.cfg"
            cfg.write_text("dataset = planted\nmethods = okmeans:c=1\nk = 2\n", encoding="utf-8")
            code, _, err = _run("run", str(cfg), "--quiet")
        self.assertEqual(code, 2)
        payload = json.loads(err)
        self.assertEqual(payload["error_type"], "ConfigValidationError")
        self.assertEqual(payload["command"], "run")

    def test_missing_config_exits_two(self) -> None:
        code, _, err = _run("run", "/nonexistent/okmeans.cfg", "--quiet")
        self.assertEqual(code, 2)
        self.assertEqual(json.loads(err)["error_type"], "FileNotFoundError")


class TestInject(unittest.TestCase):
    def test_round_trip(self) -> None:
        with TemporaryDirectory() as d:
            src = Path(d) / "raw.csv"
            src.write_text("".join(f"{i},{2 * i},{i % 2}\n" for i in range(40)), encoding="utf-8")
            dst = Path(d) / "prepared.csv"
            code, out, _ = _run(
                "inject", str(src), str(dst), "--has-labels", "--normalize", "--fraction", "0.1", "--xi", "5"
            )
            self.assertEqual(code, 0)
            self.assertIn("outliers=4", out)
            data = load_csv(dst, has_labels=True, header=True, has_mask=True)
        self.assertEqual(data.n, 44)
        self.assertEqual(data.n_true_outliers, 4)

    def test_fraction_needs_xi(self) -> None:
        with TemporaryDirectory() as d:
            src = Path(d) / "raw.csv"
            src.write_text("1,2\n3,4\n", encoding="utf-8")
            code, _, err = _run("inject", str(src), str(Path(d) / "o.csv"), "--fraction", "0.1")
        self.assertEqual(code, 2)
        self.assertEqual(json.loads(err)["error_type"], "ConfigValidationError")


class TestOracleSweep(unittest.TestCase):
    def test_small_sweep_within_bounds(self) -> None:
        code, out, _ = _run("oracle-sweep", "--trials", "5", "--quiet")
        self.assertEqual(code, 0)
        summary = json.loads(out)
        self.assertTrue(summary["within_bounds"])
        self.assertEqual(summary["trials"], 5)
        self.assertAlmostEqual(summary["bound_okmeans"], 9.0, places=9)
