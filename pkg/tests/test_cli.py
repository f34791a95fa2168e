"""Command line: outputs, manifests, configuration and exit codes."""

import json
import math

import numpy as np
import pytest

from minpulse import analytic, cli


def read_csv(path):
    lines = path.read_text().strip().split("\n")
    return lines[0].split(","), [line.split(",") for line in lines[1:]]


def read_manifest(path):
    return json.loads(path.with_suffix(".manifest.json").read_text())


def test_two_control_smoke(tmp_path):
    out = tmp_path / "run.csv"
    assert cli.run(["two-control", "--n", "3", "--output", str(out)]) == 0
    columns, rows = read_csv(out)
    assert columns == ["interval", "start", "duration", "value"]
    assert len(rows) == 3
    manifest = read_manifest(out)
    assert manifest["convergence"]["converged"] is True
    assert np.isclose(manifest["results"]["t_f"], 2.752923524622865,
                      atol=1e-9)
    assert manifest["results"]["gap"] > 0.0
    assert str(out) in manifest["outputs"]
    values = [float(row[3]) for row in rows]
    assert values == pytest.approx([5 * math.pi / 12, math.pi / 4,
                                    math.pi / 12])


def test_reruns_are_byte_identical(tmp_path):
    first = tmp_path / "a.csv"
    second = tmp_path / "b.csv"
    for out in (first, second):
        assert cli.run(["two-control", "--n", "4", "--output",
                        str(out)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_linear_closed_form(tmp_path):
    out = tmp_path / "linear.csv"
    assert cli.run(["linear", "--omega", "0.5", "--n", "4", "--output",
                    str(out)]) == 0
    manifest = read_manifest(out)
    assert np.isclose(manifest["results"]["t_f"], 16 * math.asin(0.0625),
                      rtol=1e-15)
    assert manifest["results"]["endpoint_error"] <= 1e-12
    columns, rows = read_csv(out)
    assert len(rows) == 4
    phases = analytic.linear_discrete(0.5, 4).phases
    assert [float(row[3]) for row in rows] == pytest.approx(list(phases))


def test_json_format(tmp_path):
    out = tmp_path / "linear.json"
    assert cli.run(["linear", "--omega", "0.5", "--n", "4", "--format",
                    "json", "--output", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["columns"] == ["interval", "start", "duration", "value"]
    assert len(payload["rows"]) == 4
    phases = analytic.linear_discrete(0.5, 4).phases
    assert [row[3] for row in payload["rows"]] == pytest.approx(list(phases))


def test_grape_scan(tmp_path):
    out = tmp_path / "scan.csv"
    assert cli.run(["grape", "--n", "3", "--t-start", "2.74", "--t-stop",
                    "2.76", "--t-step", "0.005", "--starts", "8",
                    "--output", str(out)]) == 0
    columns, rows = read_csv(out)
    assert columns == ["t_f", "distance"]
    assert len(rows) == 5
    manifest = read_manifest(out)
    minimum = manifest["results"]["minimum_time"]
    assert minimum is not None
    assert 2.7529 <= minimum <= 2.7601
    distances = {float(row[0]): float(row[1]) for row in rows}
    assert distances[2.75] > 1e-6
    assert distances[minimum] <= 1e-6


def test_sweep_with_fits(tmp_path):
    out = tmp_path / "sweep.csv"
    assert cli.run(["sweep", "--family", "two-control", "--n-start", "5",
                    "--n-stop", "12", "--output", str(out)]) == 0
    columns, rows = read_csv(out)
    assert columns == ["N", "T", "delta_T", "t_f", "gap", "converged"]
    assert len(rows) == 8
    gaps = [float(row[4]) for row in rows]
    assert all(g > 0 for g in gaps)
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert all(row[5] == "true" for row in rows)
    manifest = read_manifest(out)
    for model in ("exponential", "polynomial"):
        fit = manifest["results"][f"fit_{model}"]
        assert fit["rows_used"] == 8
        assert 0.0 < fit["r_squared"] <= 1.0
    assert manifest["results"]["fit_exponential"]["slope"] < 0.0


def test_sweep_too_short_for_fit_still_succeeds(tmp_path):
    out = tmp_path / "short.csv"
    assert cli.run(["sweep", "--family", "two-control", "--n-start", "3",
                    "--n-stop", "7", "--n-step", "2", "--output",
                    str(out)]) == 0
    manifest = read_manifest(out)
    assert "error" in manifest["results"]["fit_exponential"]


def test_sweep_free_tail_mode(tmp_path):
    out = tmp_path / "free.csv"
    assert cli.run(["sweep", "--family", "two-control", "--mode",
                    "free-tail", "--n-start", "4", "--n-stop", "8",
                    "--output", str(out)]) == 0
    columns, rows = read_csv(out)
    assert len(rows) == 5
    reference = analytic.two_control_continuous().t_f
    assert all(float(row[3]) >= reference - 1e-12 for row in rows)


def test_adjoint_map_writes_curve_file(tmp_path):
    out = tmp_path / "map.csv"
    assert cli.run(["adjoint-map", "--n", "3", "--grid-size", "24",
                    "--output", str(out)]) == 0
    columns, rows = read_csv(out)
    assert columns == ["theta", "phi", "distance"]
    assert len(rows) == 24 * 24
    curve = tmp_path / "map_curve.csv"
    assert curve.exists()
    curve_columns, curve_rows = read_csv(curve)
    assert curve_columns == ["theta", "phi"]
    assert len(curve_rows) > 0
    manifest = read_manifest(out)
    assert manifest["results"]["min_distance"] < 0.1
    assert str(curve) in manifest["outputs"]


def test_nmr_microsecond_table(tmp_path):
    out = tmp_path / "nmr.csv"
    assert cli.run(["nmr", "--nu", "100000", "--output", str(out)]) == 0
    columns, rows = read_csv(out)
    assert columns == ["label", "n", "t_f_normalized", "time_microseconds"]
    assert rows[0][0] == "continuous"
    assert float(rows[0][3]) == pytest.approx(4.330127018922194, abs=1e-9)
    assert rows[1][0] == "discrete"
    assert float(rows[1][3]) == pytest.approx(4.335819943014719, abs=1e-6)


def test_config_file_merging(tmp_path):
    out = tmp_path / "conf.csv"
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"subcommand": "linear", "omega": 0.5,
                                  "n": 100}))
    assert cli.run(["linear", "--config", str(config), "--n", "4",
                    "--output", str(out)]) == 0
    manifest = read_manifest(out)
    assert manifest["config"]["n"] == 4
    assert manifest["config"]["omega"] == 0.5


def test_config_errors(tmp_path):
    out = tmp_path / "x.csv"
    bad_field = tmp_path / "bad.json"
    bad_field.write_text(json.dumps({"omege": 0.5}))
    assert cli.run(["linear", "--omega", "0.5", "--config", str(bad_field),
                    "--output", str(out)]) == 2
    malformed = tmp_path / "broken.json"
    malformed.write_text("{not json")
    assert cli.run(["linear", "--omega", "0.5", "--config", str(malformed),
                    "--output", str(out)]) == 2
    mismatched = tmp_path / "mismatched.json"
    mismatched.write_text(json.dumps({"subcommand": "nmr"}))
    assert cli.run(["linear", "--omega", "0.5", "--config", str(mismatched),
                    "--output", str(out)]) == 2
    assert cli.run(["linear", "--omega", "0.5"]) == 2
    assert cli.run(["linear", "--n", "4", "--output", str(out)]) == 2


def test_solver_failure_exit_code(tmp_path):
    out = tmp_path / "fail.csv"
    code = cli.run(["two-control", "--mode", "free-tail", "--period",
                    "0.5464064289825025", "--output", str(out)])
    assert code == 1
    assert not out.exists()


def test_help_and_bad_subcommand(capsys):
    assert cli.run(["--help"]) == 0
    assert "two-control" in capsys.readouterr().out
    assert cli.run(["frobnicate"]) == 2


def test_workers_environment(tmp_path, monkeypatch):
    out = tmp_path / "scan.csv"
    monkeypatch.setenv("MINPULSE_WORKERS", "oops")
    assert cli.run(["grape", "--n", "3", "--t-start", "2.755", "--t-stop",
                    "2.76", "--t-step", "0.005", "--starts", "4",
                    "--output", str(out)]) == 2
    monkeypatch.setenv("MINPULSE_WORKERS", "2")
    assert cli.run(["grape", "--n", "3", "--t-start", "2.755", "--t-stop",
                    "2.76", "--t-step", "0.005", "--starts", "4",
                    "--output", str(out)]) == 0


def test_fit_convergence_validation():
    rows = [(n, 2.73 + 1.0 / n) for n in range(5, 10)]
    fit = cli.fit_convergence(rows, 2.72, "exponential")
    assert fit.rows_used == 5
    with pytest.raises(ValueError):
        cli.fit_convergence(rows, 2.72, "quadratic")
    from minpulse.errors import InsufficientDataError
    with pytest.raises(InsufficientDataError):
        cli.fit_convergence(rows[:3], 2.72, "exponential")
