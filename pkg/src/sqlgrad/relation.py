"""In-memory named relations and typed CSV loading."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .errors import CsvTypeError, SchemaMismatch
from .sqlast import CreateTable


@dataclass
class Relation:
    name: str
    columns: tuple[tuple[str, str], ...]   # (name, type in {int,double,string})
    rows: list[tuple]

    def column_names(self) -> tuple[str, ...]:
        return tuple(c for c, _ in self.columns)

    def column_index(self, name: str) -> int:
        for i, (c, _) in enumerate(self.columns):
            if c == name:
                return i
        raise KeyError(f"relation {self.name!r} has no column {name!r}")

    def project(self, names: list[str] | tuple[str, ...]) -> list[tuple]:
        idx = [self.column_index(n) for n in names]
        return [tuple(row[i] for i in idx) for row in self.rows]

    def distinct(self, column: str) -> list:
        i = self.column_index(column)
        return sorted({row[i] for row in self.rows})


def _convert(text: str, col_type: str, row: int, column: str):
    if col_type == "string":
        return text
    try:
        if col_type == "int":
            return int(text)
        return float(text)
    except ValueError:
        raise CsvTypeError(f"{text!r} is not a valid {col_type}", row, column) from None


def load_csv(path: str | Path, schema: CreateTable) -> Relation:
    """Load a comma-separated UTF-8 file whose header matches `schema`."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(f"{path}: empty file, expected a header row") from None
        expected = list(schema.column_names())
        if header != expected:
            raise SchemaMismatch(
                f"{path}: header {header} does not match schema columns {expected}")
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if len(raw) != len(expected):
                raise SchemaMismatch(
                    f"{path}: row {lineno} has {len(raw)} cells, expected {len(expected)}")
            rows.append(tuple(
                _convert(cell, col_type, lineno, col_name)
                for cell, (col_name, col_type) in zip(raw, schema.columns)))
    return Relation(schema.name, schema.columns, rows)


def write_csv(path: str | Path, columns: list[str], rows: list[tuple]):
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)
