import io

import numpy as np
import pytest

from modules import __version__
from modules.config import command_defaults, config_digest
from modules.report import CsvReport, format_value, read_report


def test_format_value():
    assert format_value(None) == ""
    assert format_value(True) == "true"
    assert format_value(0.1) == "0.1"
    assert format_value(float("-inf")) == "-inf"
    assert format_value(float("nan")) == "nan"
    assert format_value(np.float64(1.0 / 3.0)) == "0.3333333333"
    assert format_value(np.int64(7)) == "7"
    assert format_value("lm2") == "lm2"


def test_report_header_and_rows(tmp_path):
    config = dict(command_defaults("activation"), seed=3)
    report = CsvReport("activation", config, ["process", "b", "p"])
    report.add(["gibbs", -1.0, 0.25])
    report.extend([["gibbs", 0.0, 0.5], ["gibbs", 1.0, None]])
    with pytest.raises(ValueError):
        report.add(["gibbs", 2.0])

    path = tmp_path / "out" / "activation.csv"
    assert report.write(str(path)) == str(path)
    table = read_report(str(path))
    assert table["header"][0] == f"# langevin-machine {__version__} activation"
    assert table["header"][1].startswith("# config: {")
    assert table["header"][2] == f"# digest: {config_digest(config)}"
    assert table["columns"] == ["process", "b", "p"]
    assert table["rows"][2] == ["gibbs", "1", ""]


def test_report_to_stream():
    report = CsvReport("trajectory", {"seed": 0}, ["t"])
    report.add([0.02])
    stream = io.StringIO()
    assert report.write(stream=stream) == "<stdout>"
    assert stream.getvalue().endswith("t\n0.02\n")
