import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from autorho import cli
from autorho.cli import build_from_args, build_parser, main
from autorho.eigext import all_eigenvalues, build_E
from autorho.errors import ConvergenceFailure
from autorho.interval import redf

from helpers import bimodal_data


def write_csv(path, cols):
    names = list(cols)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*cols.values()):
            w.writerow(row)
    return str(path)


def truth(x):
    return np.sin(2 * np.pi * x)


@pytest.fixture
def sine_csv(tmp_path):
    rng = np.random.default_rng(0)
    x = np.sort(rng.uniform(0, 1, 200))
    y = truth(x) + rng.normal(0, 0.2, x.size)
    return write_csv(tmp_path / "sine.csv", {"x": x, "y": y})


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestInterval:
    def test_schema_and_containment(self, sine_csv, capsys):
        code, out, _ = run(["interval", "-i", sine_csv], capsys)
        assert code == 0
        rep = json.loads(out)
        for key in ("schema", "rho_lo", "rho_hi", "kind", "kappa", "q", "lambda_max",
                    "lambda_min", "lambda_mean", "singular", "rho_star_max", "rho_hat_max"):
            assert key in rep
        assert rep["schema"] == 1 and rep["kind"] == "heuristic"
        prob = build_from_args(build_parser().parse_args(["interval", "-i", sine_csv]))[0]
        lam = all_eigenvalues(build_E(prob.L, prob.penalty))
        q = lam.size
        assert rep["q"] == q
        assert redf(rep["rho_lo"], lam) >= 0.99 * q - 1e-9
        assert redf(rep["rho_star_max"], lam) <= 0.01 * q + 1e-9

    def test_kappa_narrows(self, sine_csv, capsys):
        wide = json.loads(run(["interval", "-i", sine_csv, "--kappa", "0.01"], capsys)[1])
        narrow = json.loads(run(["interval", "-i", sine_csv, "--kappa", "0.25"], capsys)[1])
        assert narrow["rho_hi"] - narrow["rho_lo"] < wide["rho_hi"] - wide["rho_lo"]

    @pytest.mark.parametrize("mode", ["exact", "wide", "heuristic"])
    def test_modes(self, sine_csv, capsys, mode):
        rep = json.loads(run(["interval", "-i", sine_csv, "--mode", mode], capsys)[1])
        assert rep["kind"] == mode

    def test_csv_format(self, sine_csv, capsys):
        code, out, _ = run(["interval", "-i", sine_csv, "--format", "csv"], capsys)
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and len(rows) == 1 and rows[0]["kind"] == "heuristic"

    def test_dates(self, tmp_path, capsys):
        days = [f"2021-01-{d:02d}" for d in range(1, 32)] + [f"2021-02-{d:02d}" for d in range(1, 29)]
        days = [d for i, d in enumerate(days) if i % 7 != 3]
        y = np.random.default_rng(1).poisson(5, len(days))
        path = write_csv(tmp_path / "d.csv", {"date": days, "deaths": y})
        code, out, _ = run(["interval", "-i", path, "--x-col", "date", "--y-col", "deaths"], capsys)
        rep = json.loads(out)
        assert code == 0 and rep["x_origin"] == "2021-01-01"
        assert rep["knots"][-1] == 58.0

    def test_weights_column(self, tmp_path, capsys):
        x = np.linspace(0, 1, 80)
        path = write_csv(tmp_path / "w.csv", {"x": x, "y": np.cos(x), "w": np.full(80, 2.0)})
        assert run(["interval", "-i", path, "--w-col", "w"], capsys)[0] == 0


class TestErrors:
    def test_malformed(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("x,y\n1,2\n2,abc\n3,4\n")
        out_path = tmp_path / "out.json"
        code, out, err = run(["interval", "-i", str(path), "-o", str(out_path)], capsys)
        assert code == 3 and out == "" and "non-numeric" in err
        assert not out_path.exists()

    def test_missing_column(self, sine_csv, capsys):
        assert run(["interval", "-i", sine_csv, "--y-col", "z"], capsys)[0] == 3

    def test_missing_file(self, tmp_path, capsys):
        assert run(["interval", "-i", str(tmp_path / "none.csv")], capsys)[0] == 3

    def test_too_many_knots(self, sine_csv, capsys):
        assert run(["interval", "-i", sine_csv, "--knots", "250"], capsys)[0] == 3

    def test_bad_order(self, sine_csv, capsys):
        assert run(["interval", "-i", sine_csv, "-m", "4"], capsys)[0] == 3

    def test_constant_x(self, tmp_path, capsys):
        path = write_csv(tmp_path / "c.csv", {"x": [1.0] * 10, "y": range(10)})
        assert run(["interval", "-i", path], capsys)[0] == 3

    def test_usage(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["interval"])
        assert info.value.code == 2
        with pytest.raises(SystemExit) as info:
            main(["fit", "-i", "x.csv", "--kappa", "0.7"])
        assert info.value.code == 2

    def test_numerical_failure(self, sine_csv, capsys, monkeypatch):
        def fail(*args, **kwargs):
            raise ConvergenceFailure("forced")
        monkeypatch.setattr(cli, "auto_interval", fail)
        code, out, err = run(["interval", "-i", sine_csv], capsys)
        assert code == 4 and out == "" and "numerical" in err


class TestFit:
    def test_recovers_truth(self, sine_csv, capsys):
        code, out, _ = run(["fit", "-i", sine_csv], capsys)
        rep = json.loads(out)
        assert code == 0 and set(rep["fits"]) == {"gcv", "reml"}
        x = np.array(rep["data"]["x"])
        for crit in ("gcv", "reml"):
            fit = np.array(rep["data"][f"fit_{crit}"])
            assert np.sqrt(np.mean((fit - truth(x)) ** 2)) < 0.2
        assert len(rep["dense"]["x"]) == 200

    def test_constant(self, tmp_path, capsys):
        x = np.linspace(0, 10, 60)
        path = write_csv(tmp_path / "k.csv", {"x": x, "y": np.full(60, 3.5)})
        code, out, _ = run(["fit", "-i", path, "--criterion", "gcv"], capsys)
        rep = json.loads(out)
        assert code == 0
        np.testing.assert_allclose(rep["data"]["fit_gcv"], 3.5, atol=1e-6)

    def test_csv_and_summary(self, sine_csv, tmp_path, capsys):
        summary = tmp_path / "s.json"
        code, out, _ = run(["fit", "-i", sine_csv, "--format", "csv", "--summary", str(summary)],
                           capsys)
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0
        assert sum(r["kind"] == "data" for r in rows) == 200
        assert sum(r["kind"] == "grid" for r in rows) == 200
        assert "fits" in json.loads(summary.read_text())

    def test_matches_curves_and_interval(self, sine_csv, capsys):
        fit = json.loads(run(["fit", "-i", sine_csv], capsys)[1])
        iv = json.loads(run(["interval", "-i", sine_csv], capsys)[1])
        curves = list(csv.DictReader(io.StringIO(run(["curves", "-i", sine_csv], capsys)[1])))
        for key in ("rho_lo", "rho_hi"):
            assert fit["interval"][key] == iv[key]
        for crit in ("gcv", "reml"):
            row = curves[fit["fits"][crit]["index"]]
            assert float(row[crit]) == fit["fits"][crit]["value"]
            assert float(row["rho"]) == fit["fits"][crit]["rho"]

    def test_deterministic(self, sine_csv, capsys):
        assert run(["fit", "-i", sine_csv], capsys)[1] == run(["fit", "-i", sine_csv], capsys)[1]


class TestCurves:
    def test_rows_and_monotone(self, sine_csv, capsys):
        code, out, _ = run(["curves", "-i", sine_csv, "--grid", "37"], capsys)
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and len(rows) == 37
        edf = np.array([float(r["edf"]) for r in rows])
        assert np.all(np.diff(edf) <= 0)

    def test_two_minima(self, tmp_path, capsys):
        x, y = bimodal_data()
        path = write_csv(tmp_path / "b.csv", {"x": x, "y": y})
        out = run(["curves", "-i", path, "--format", "json"], capsys)[1]
        from autorho.gridsearch import count_local_minima
        assert count_local_minima(json.loads(out)["gcv"]) >= 2

    def test_grid_too_small(self, sine_csv):
        with pytest.raises(SystemExit):
            main(["curves", "-i", sine_csv, "--grid", "1"])


class TestSimulateAndBench:
    def test_simulate_json(self, capsys):
        code, out, _ = run(["simulate", "-p", "20", "--reps", "3", "--scenario", "1", "4"], capsys)
        rep = json.loads(out)
        assert code == 0 and [r["scenario"] for r in rep["reports"]] == [1, 4]
        assert all(min(r["p_star"]) >= 0.99 - 1e-9 for r in rep["reports"])

    def test_simulate_csv(self, tmp_path, capsys):
        path = tmp_path / "sim.csv"
        code, _, _ = run(["simulate", "-p", "20", "--reps", "2", "--scenario", "2",
                          "--format", "csv", "-o", str(path)], capsys)
        rows = list(csv.DictReader(path.open()))
        assert code == 0 and len(rows) == 2 and rows[0]["scenario"] == "2"

    def test_bench(self, capsys):
        code, out, _ = run(["bench", "--p-list", "20,40", "--reps", "1", "--grid", "3",
                            "--format", "csv"], capsys)
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and [r["p"] for r in rows] == ["20", "40"]

    def test_bench_text(self, capsys):
        code, out, _ = run(["bench", "--p-list", "20,40", "--reps", "1", "--grid", "3"], capsys)
        assert code == 0 and "log-log slope" in out


def test_module_entry_point(sine_csv):
    res = subprocess.run([sys.executable, "-m", "autorho", "interval", "-i", sine_csv],
                         capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["schema"] == 1
