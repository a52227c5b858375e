"""
CSV result files.
Every file starts with '#' header lines carrying the library version, the
command, the resolved config as sorted JSON and its digest.
"""

import csv
import io
import math
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence, TextIO

from . import __version__
from .config import canonical_json, config_digest


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".10g")
    if hasattr(value, "item"):
        return format_value(value.item())
    return str(value)


class CsvReport:
    """Collects rows of one result table and writes them with the config header."""

    def __init__(self, command: str, config: Dict[str, Any], columns: Sequence[str]):
        """
        Initialize the report.

        Args:
            command: Subcommand that produced the rows
            config: Resolved configuration, seed included
            columns: Column names
        """
        self.command = command
        self.config = config
        self.columns = list(columns)
        self.rows: List[List[str]] = []

    @property
    def digest(self) -> str:
        return config_digest(self.config)

    def header_lines(self) -> List[str]:
        return [
            f"# langevin-machine {__version__} {self.command}",
            f"# config: {canonical_json(self.config)}",
            f"# digest: {self.digest}",
        ]

    def add(self, row: Iterable[Any]) -> None:
        row = [format_value(value) for value in row]
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} fields, table has {len(self.columns)} columns")
        self.rows.append(row)

    def extend(self, rows: Iterable[Iterable[Any]]) -> None:
        for row in rows:
            self.add(row)

    def render(self) -> str:
        buffer = io.StringIO()
        for line in self.header_lines():
            buffer.write(line + "\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.columns)
        writer.writerows(self.rows)
        return buffer.getvalue()

    def write(self, path: Optional[str] = None, stream: Optional[TextIO] = None) -> str:
        """
        Writes the table to a file, or to the stream when no path is given.

        Returns:
            Where the table went
        """
        text = self.render()
        if path:
            directory = os.path.dirname(os.path.abspath(path))
            os.makedirs(directory, exist_ok=True)
            with open(path, "w", newline="") as f:
                f.write(text)
            return path
        if stream is not None:
            stream.write(text)
            stream.flush()
        return "<stdout>"


def read_report(path: str) -> Dict[str, Any]:
    """
    Reads a result file back.

    Returns:
        Dictionary with 'header' lines, 'columns' and 'rows' (strings)
    """
    with open(path, "r", newline="") as f:
        lines = f.read().splitlines()
    header = [line for line in lines if line.startswith("#")]
    body = [line for line in lines if not line.startswith("#")]
    table = list(csv.reader(body))
    return {"header": header, "columns": table[0] if table else [], "rows": table[1:]}
