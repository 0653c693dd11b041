"""Reading the delimited artifacts written by the simulation CLI.

Files start with a ``#`` metadata block (``# key = value`` lines, first
line carrying the producer version), then a comma-separated header and
data rows.  Readers validate only the columns they need and tolerate any
extras, so the two packages stay coupled through the documented schema
alone.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


class SchemaError(Exception):
    """Input file does not carry the expected tabular schema."""


@dataclass(frozen=True)
class Table:
    """One parsed artifact: metadata block, header, rows as string dicts."""

    meta: dict
    header: tuple
    rows: tuple

    def column(self, name: str, where=None) -> np.ndarray:
        """Float values of one column, optionally filtered by row."""
        picked = [r[name] for r in self.rows
                  if (where is None or where(r)) and r.get(name)]
        return np.array([float(v) for v in picked])


#: columns each renderer relies on (artifacts may carry more)
TRACE_COLUMNS = ("time_us", "S_z_NV", "I_x_C1", "I_z_C1", "E_N", "order")
HISTOGRAM_COLUMNS = ("row", "density_ppb", "f_bath")
BENCHMARK_COLUMNS = ("row", "err_gcce0", "err_gcce2")


def read_table(path: str) -> Table:
    meta: dict = {}
    data_lines: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    meta[key.strip()] = value.strip()
                elif body:
                    meta.setdefault("producer", body)
            elif line.strip():
                data_lines.append(line)
    if not data_lines:
        raise SchemaError(f"{path}: no tabular content to plot")
    reader = csv.reader(data_lines)
    header = tuple(next(reader))
    rows = tuple(dict(zip(header, row)) for row in reader)
    if not rows:
        raise SchemaError(f"{path}: header without data rows")
    return Table(meta=meta, header=header, rows=rows)


def require_columns(table: Table, needed, label: str) -> None:
    missing = [c for c in needed if c not in table.header]
    if missing:
        raise SchemaError(
            f"not a {label} table: missing column(s) "
            f"{', '.join(missing)}; found: {', '.join(table.header)}")


def is_benchmark(table: Table) -> bool:
    return all(c in table.header for c in BENCHMARK_COLUMNS)
