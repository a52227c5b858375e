import json

from typer.testing import CliRunner

from main import app
from modules.report import read_report

runner = CliRunner()

SMALL_ACTIVATION = [
    "--set", "b_min=-1",
    "--set", "b_max=1",
    "--set", "b_step=1",
    "--set", "samples=1000",
    "--set", "chains=4",
    "--set", "chain_block=2",
    "--set", "burn_in=5",
]


def run_activation(tmp_path, name, *extra):
    path = tmp_path / name
    result = runner.invoke(app, ["activation", "--out", str(path), *SMALL_ACTIVATION, *extra])
    return result, path


def test_activation_writes_csv(tmp_path):
    result, path = run_activation(tmp_path, "act.csv", "--seed", "12")
    assert result.exit_code == 0, result.output
    table = read_report(str(path))
    assert table["columns"][:4] == ["kind", "process", "epsilon", "b"]
    assert len(table["rows"]) == 3
    config = json.loads(table["header"][1][len("# config: "):])
    assert config["seed"] == 12
    assert config["samples"] == 1000


def test_results_do_not_depend_on_threads(tmp_path):
    first, one = run_activation(tmp_path, "one.csv", "--threads", "1")
    second, many = run_activation(tmp_path, "many.csv", "--threads", "3")
    assert first.exit_code == second.exit_code == 0
    assert one.read_text() == many.read_text()


def test_config_file_and_seed_environment(tmp_path, monkeypatch):
    conf = tmp_path / "run.conf"
    conf.write_text("process=lm1\nseed=4\n")
    monkeypatch.setenv("LANGEVIN_SEED", "8")
    result, path = run_activation(tmp_path, "env.csv", "--config", str(conf))
    assert result.exit_code == 0, result.output
    config = json.loads(read_report(str(path))["header"][1][len("# config: "):])
    assert config["process"] == "lm1"
    assert config["seed"] == 8


def test_config_error_exit_code(tmp_path):
    result = runner.invoke(app, ["ising", "--set", "colour=red"])
    assert result.exit_code == 2
    assert "error: kind=config_error" in result.output


def test_parameter_error_exit_code(tmp_path):
    result, _ = run_activation(tmp_path, "bad.csv", "--set", "process=heat")
    assert result.exit_code == 2
    assert "error: kind=parameter_error" in result.output


def test_defaults_command():
    result = runner.invoke(app, ["defaults", "ising"])
    assert result.exit_code == 0
    assert "L = 4" in result.output
    assert "methods = metropolis,dlm,gibbs,lm2" in result.output
    assert runner.invoke(app, ["defaults", "train"]).exit_code == 2
