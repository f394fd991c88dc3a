import csv
import json

import pytest
from click.testing import CliRunner

import gradflow
from gf_report import CheckReport
from gf_verify import ContractionReport
from gradflow import cli


@pytest.fixture
def run(tmp_path):
    def invoke(*arguments):
        return CliRunner().invoke(cli, ["--log-level", "ERROR", *arguments, "--output-directory", str(tmp_path)])

    return invoke


def read_rows(path):
    with open(path, newline="") as stream:
        return list(csv.DictReader(stream))


def test_help():
    result = CliRunner().invoke(cli, ["verify", "--help"])

    assert result.exit_code == 0
    assert "--kernel-p" in result.output
    assert "--preset" in result.output


def test_verify_smoke(run, tmp_path):
    result = run("verify", "--preset", "theorem1-smoke")

    assert result.exit_code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["total"] == 15
    assert summary["fail"] == 0
    assert len(read_rows(tmp_path / "report.csv")) == 15
    assert len(json.loads((tmp_path / "report.json").read_text())) == 15


def test_verify_is_reproducible(tmp_path):
    outputs = []

    for name in ("first", "second"):
        directory = tmp_path / name
        result = CliRunner().invoke(cli, ["verify", "--preset", "theorem1-smoke", "--ensemble-count", "2", "--output-directory", str(directory)])
        assert result.exit_code == 0
        outputs.append((directory / "report.csv").read_text())

    assert outputs[0] == outputs[1]


def test_heat_smoke(run, tmp_path):
    result = run("verify", "--preset", "theorem2-smoke", "--ensemble-count", "2", "--output-formats", "json")

    assert result.exit_code == 0
    assert (tmp_path / "report.json").exists()
    assert not (tmp_path / "report.csv").exists()


def test_kernel_identity(run, tmp_path):
    result = run("kernel-check", "--preset", "kernel-identity")

    assert result.exit_code == 0
    rows = read_rows(tmp_path / "certificates.csv")
    assert rows
    assert all(abs(float(_["mass"]) - 1.0) <= 1e-10 for _ in rows)
    assert all(float(_["min_value"]) >= -1e-12 for _ in rows)


def test_missing_coefficient_file(run, tmp_path):
    result = run("kernel-check", "--preset", "kernel-identity", "--kernel-coefficient-file", str(tmp_path / "missing.txt"))

    assert result.exit_code == 2
    assert not (tmp_path / "certificates.csv").exists()
    assert not (tmp_path / "report.csv").exists()
    assert "error" in json.loads((tmp_path / "summary.json").read_text())


def test_invalid_p(run, tmp_path):
    result = run("verify", "--p", "1.5")

    assert result.exit_code == 2
    assert "p must exceed 2" in json.loads((tmp_path / "summary.json").read_text())["error"]


def test_unknown_config_key(run, tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("[grid]\nwidth = 3\n")

    result = run("verify", "--config", str(path))

    assert result.exit_code == 2


def test_run_flow(run, tmp_path):
    result = run("run-flow", "--grid-n", "32", "--time-t-max", "1.0", "--time-ratio", "1.5", "--time-t-min", "0.001")

    assert result.exit_code == 0
    trace = read_rows(tmp_path / "trace.csv")
    maximal = read_rows(tmp_path / "maximal.csv")
    states = read_rows(tmp_path / "states.csv")

    assert float(trace[0]["t"]) == 0.0
    assert len(maximal) == 32
    assert len(states) == 32 * len(trace)
    assert all(float(_["m"]) >= float(_["f"]) for _ in maximal)
    assert [_["check"] for _ in read_rows(tmp_path / "report.csv")] == ["contraction", "energy-ledger", "positivity", "boundedness"]


def test_failed_secondary_check_sets_the_exit_status(run, tmp_path, monkeypatch):
    ledger = CheckReport("energy-ledger", False, -1.0)
    row = ContractionReport("pflow-bumps-1d-n32-p4-s0", "contraction", True, 0.1, secondary=(ledger,))
    monkeypatch.setitem(gradflow.COMMANDS, "verify", lambda config: ([row], {}))

    result = run("verify")

    assert result.exit_code == 1
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["secondary_fail"] == 1
    assert read_rows(tmp_path / "report.csv")[0]["secondary"] == "energy-ledger:fail"


@pytest.mark.slow
def test_default_ensemble_is_deterministic(tmp_path):
    outputs = []

    for name in ("first", "second"):
        directory = tmp_path / name
        result = CliRunner().invoke(cli, ["verify", "--preset", "default-ensemble", "--ensemble-seed", "42", "--output-directory", str(directory)])
        assert result.exit_code == 0
        outputs.append(((directory / "report.csv").read_bytes(), (directory / "report.json").read_bytes()))

    assert outputs[0] == outputs[1]
