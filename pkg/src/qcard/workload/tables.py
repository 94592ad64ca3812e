"""CSV-backed tables, the schema catalog, and exact selectivity scans."""
from __future__ import annotations

import csv
import logging
import operator
from dataclasses import dataclass
from pathlib import Path

from ..errors import IngestionError, WorkloadError
from .parser import FilterPredicate

log = logging.getLogger(__name__)

_COMPARE = {
    "=": operator.eq,
    "<>": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}


def _parse_int(text: str):
    return int(text)


def _infer_type(values: list[str]) -> str:
    present = [v for v in values if v != ""]
    for name, conv in (("int", _parse_int), ("float", float)):
        try:
            for v in present:
                conv(v)
        except ValueError:
            continue
        return name
    return "text"


_CONVERT = {"int": int, "float": float, "text": str}


@dataclass
class Table:
    """Column-major table. Empty CSV cells become None and never satisfy a predicate."""

    name: str
    columns: list[str]
    types: list[str]
    data: dict[str, list]

    @property
    def n_rows(self) -> int:
        return len(self.data[self.columns[0]]) if self.columns else 0

    @classmethod
    def from_csv(cls, path: str | Path, name: str | None = None) -> "Table":
        path = Path(path)
        try:
            with path.open(newline="", encoding="utf-8") as fh:
                reader = csv.reader(fh)
                header = next(reader, None)
                rows = [row for row in reader if row]
        except OSError as exc:
            raise IngestionError(f"cannot read table {path}: {exc}") from exc
        if not header:
            raise IngestionError(f"{path}: missing header row")
        for n, row in enumerate(rows, start=2):
            if len(row) != len(header):
                raise IngestionError(f"{path}:{n}: expected {len(header)} fields, got {len(row)}")
        raw = {col: [row[i] for row in rows] for i, col in enumerate(header)}
        types = [_infer_type(raw[col]) for col in header]
        data = {
            col: [None if v == "" else _CONVERT[t](v) for v in raw[col]]
            for col, t in zip(header, types)
        }
        return cls(name or path.stem, list(header), types, data)

    def column_type(self, column: str) -> str:
        try:
            return self.types[self.columns.index(column)]
        except ValueError:
            raise IngestionError(f"table {self.name!r} has no column {column!r}") from None


def _check_constant(table: Table, pred: FilterPredicate):
    ctype = table.column_type(pred.column)
    const = pred.constant
    if ctype == "text":
        if not isinstance(const, str):
            raise IngestionError(f"{pred}: column {pred.table}.{pred.column} is text, constant is numeric")
        return const
    if isinstance(const, str):
        raise IngestionError(f"{pred}: column {pred.table}.{pred.column} is {ctype}, constant is a string")
    if ctype == "int" and not isinstance(const, int):
        raise IngestionError(f"{pred}: column {pred.table}.{pred.column} is int, constant {const!r} is not")
    return const


def compute_selectivity(table: Table, predicates: list[FilterPredicate]) -> float:
    """Fraction of rows passing every predicate, by full scan.

    Strings compare by exact equality and by lexicographic code-point order
    for the range operators.
    """
    checks = []
    for pred in predicates:
        const = _check_constant(table, pred)
        checks.append((table.data[pred.column], _COMPARE[pred.op], const))
    n = table.n_rows
    if n == 0:
        log.warning("table %s is empty; selectivity defined as 1.0", table.name)
        return 1.0
    if not checks:
        return 1.0
    passing = 0
    for row in range(n):
        for column, cmp, const in checks:
            value = column[row]
            if value is None or not cmp(value, const):
                break
        else:
            passing += 1
    return passing / n


@dataclass(frozen=True)
class TableInfo:
    name: str
    id: int
    columns: tuple[str, ...] = ()
    types: tuple[str, ...] = ()


@dataclass(frozen=True)
class SchemaCatalog:
    tables: tuple[TableInfo, ...]

    def __post_init__(self):
        ids = sorted(t.id for t in self.tables)
        if ids != list(range(1, len(ids) + 1)):
            raise WorkloadError(f"table ids must be exactly 1..{len(ids)}, got {ids}")
        names = [t.name for t in self.tables]
        if len(set(names)) != len(names):
            raise WorkloadError("duplicate table names in catalog")

    @property
    def table_count(self) -> int:
        return len(self.tables)

    def id_of(self, name: str) -> int:
        for t in self.tables:
            if t.name == name:
                return t.id
        raise WorkloadError(f"unknown table {name!r}")

    @property
    def names(self) -> list[str]:
        return [t.name for t in sorted(self.tables, key=lambda t: t.id)]

    @classmethod
    def from_tables(cls, tables: list[Table]) -> "SchemaCatalog":
        ordered = sorted(tables, key=lambda t: t.name)
        return cls(tuple(
            TableInfo(t.name, i, tuple(t.columns), tuple(t.types)) for i, t in enumerate(ordered, start=1)
        ))

    @classmethod
    def anonymous(cls, count: int, names: list[str] | None = None) -> "SchemaCatalog":
        if names is not None and len(names) != count:
            raise WorkloadError(f"header lists {len(names)} table names for {count} tables")
        names = names or [f"table{i}" for i in range(1, count + 1)]
        return cls(tuple(TableInfo(n, i) for i, n in enumerate(names, start=1)))
