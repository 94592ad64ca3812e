"""Query feature records and the two on-disk workload formats.

Digested format (UTF-8, one JSON object per line)::

    {"schema_table_count": 6, "tables": ["cast_info", ...]}      <- header, "tables" optional
    {"id": "q1", "slots": [[1, 0.25], [4, 1.0]], "true_card": 1520, "classical_card": 880}
    ...

``classical_card`` may be omitted or null. Slots are written in ascending
table-id order and selectivities as shortest round-trip floats, so
load -> export -> load is lossless.

SQL+data layout::

    <dir>/<table>.csv    header row, then data
    <dir>/queries.sql    one statement per line; blank lines and "--" comments skipped
    <dir>/truths.csv     header "line,true_card[,classical_card]"; line is the
                         1-based line number of the statement in queries.sql

Queries ingested from SQL get the id ``q<line>``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import IngestionError, WorkloadError
from .parser import parse_query
from .tables import SchemaCatalog, Table, compute_selectivity

FORMATS = ("digested", "sql+data")


@dataclass(frozen=True)
class QueryFeature:
    query_id: str
    slots: tuple[tuple[int, float], ...]
    true_cardinality: int
    classical_estimate: int | None = None

    def __post_init__(self):
        slots = tuple(sorted((int(t), float(s)) for t, s in self.slots))
        object.__setattr__(self, "slots", slots)
        ids = [t for t, _ in slots]
        if len(set(ids)) != len(ids):
            raise WorkloadError(f"query {self.query_id}: duplicate table id in slots {ids}")
        for t, s in slots:
            if t < 1:
                raise WorkloadError(f"query {self.query_id}: table id {t} must be >= 1")
            if not 0.0 <= s <= 1.0:
                raise WorkloadError(f"query {self.query_id}: selectivity {s} outside [0, 1]")
        _check_card(self.query_id, "true_card", self.true_cardinality)
        if self.classical_estimate is not None:
            _check_card(self.query_id, "classical_card", self.classical_estimate)

    @property
    def true_log(self) -> float:
        return math.log(self.true_cardinality)

    @property
    def classical_log(self) -> float | None:
        return None if self.classical_estimate is None else math.log(self.classical_estimate)


def _check_card(qid, name, value):
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise WorkloadError(f"query {qid}: {name} must be an integer >= 1, got {value!r}")


@dataclass
class Workload:
    queries: list[QueryFeature]
    catalog: SchemaCatalog
    rejects: list[tuple[str, str]] = field(default_factory=list)

    @property
    def table_count(self) -> int:
        return self.catalog.table_count

    @property
    def max_slots(self) -> int:
        return max((len(q.slots) for q in self.queries), default=0)

    def validate(self, n_qubits: int | None = None, require_classical: bool = False) -> None:
        T = self.table_count
        for q in self.queries:
            if n_qubits is not None and len(q.slots) > n_qubits:
                raise WorkloadError(
                    f"query {q.query_id} joins {len(q.slots)} tables but the encoding has {n_qubits} slots"
                )
            for t, _ in q.slots:
                if t > T:
                    raise WorkloadError(f"query {q.query_id}: table id {t} exceeds schema table count {T}")
            if require_classical and q.classical_estimate is None:
                raise WorkloadError(f"query {q.query_id} has no classical estimate (needed for correction)")


def _as_int(value):
    if isinstance(value, float) and value.is_integer():
        return int(value)
    return value


def read_digested(path: str | Path) -> Workload:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise WorkloadError(f"cannot read workload {path}: {exc}") from exc
    records = []
    for n, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append((n, json.loads(line)))
        except json.JSONDecodeError as exc:
            raise WorkloadError(f"{path}:{n}: invalid JSON ({exc.msg})") from None
    if not records or "schema_table_count" not in records[0][1]:
        raise WorkloadError(f"{path}: first record must be a header with schema_table_count")
    header = records[0][1]
    catalog = SchemaCatalog.anonymous(int(header["schema_table_count"]), header.get("tables"))
    queries, seen = [], set()
    for n, rec in records[1:]:
        try:
            qid = str(rec["id"])
            q = QueryFeature(
                qid,
                tuple((t, s) for t, s in rec["slots"]),
                _as_int(rec["true_card"]),
                _as_int(rec.get("classical_card")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise WorkloadError(f"{path}:{n}: malformed record ({exc!r})") from None
        if qid in seen:
            raise WorkloadError(f"{path}:{n}: duplicate query id {qid!r}")
        seen.add(qid)
        queries.append(q)
    wl = Workload(queries, catalog)
    wl.validate()
    return wl


def dump_digested(workload: Workload) -> str:
    header = {"schema_table_count": workload.table_count, "tables": workload.catalog.names}
    lines = [json.dumps(header)]
    for q in workload.queries:
        rec = {"id": q.query_id, "slots": [[t, s] for t, s in q.slots], "true_card": q.true_cardinality}
        if q.classical_estimate is not None:
            rec["classical_card"] = q.classical_estimate
        lines.append(json.dumps(rec))
    return "\n".join(lines) + "\n"


def write_digested(path: str | Path, workload: Workload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_digested(workload), encoding="utf-8")
    return path


def _read_truths(path: Path) -> dict[int, tuple[int, int | None]]:
    if not path.exists():
        raise WorkloadError(f"missing truths file {path}")
    out = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or not {"line", "true_card"} <= set(reader.fieldnames):
            raise WorkloadError(f"{path}: header must contain line,true_card[,classical_card]")
        for row in reader:
            try:
                classical = row.get("classical_card") or None
                out[int(row["line"])] = (int(row["true_card"]), None if classical is None else int(classical))
            except ValueError as exc:
                raise WorkloadError(f"{path}: bad row {row} ({exc})") from None
    return out


def ingest_sql_dir(directory: str | Path, strict: bool = True) -> Workload:
    """Parse ``queries.sql`` against the CSV tables in ``directory``.

    With ``strict`` the first bad query raises; otherwise bad queries are
    collected in ``Workload.rejects`` as ``(query_id, message)`` pairs.
    """
    directory = Path(directory)
    qpath = directory / "queries.sql"
    if not qpath.exists():
        raise WorkloadError(f"missing {qpath}")
    tables = {p.stem: Table.from_csv(p) for p in sorted(directory.glob("*.csv")) if p.name != "truths.csv"}
    catalog = SchemaCatalog.from_tables(list(tables.values()))
    statements = [
        (n, line.strip())
        for n, line in enumerate(qpath.read_text(encoding="utf-8").splitlines(), start=1)
        if line.strip() and not line.strip().startswith("--")
    ]
    if not statements:
        raise WorkloadError(f"{qpath}: no queries")
    truths = _read_truths(directory / "truths.csv")
    queries, rejects = [], []
    for n, sql in statements:
        qid = f"q{n}"
        try:
            parsed = parse_query(sql)
            slots = []
            for name in parsed.tables:
                if name not in tables:
                    raise IngestionError(f"no data file for table {name!r}")
                sel = compute_selectivity(tables[name], parsed.filters_for(name))
                slots.append((catalog.id_of(name), sel))
            if n not in truths:
                raise WorkloadError(f"no true cardinality for line {n} in truths.csv")
            true_card, classical = truths[n]
            queries.append(QueryFeature(qid, tuple(slots), true_card, classical))
        except WorkloadError as exc:
            if strict:
                raise type(exc)(f"query {qid}: {exc}") from exc
            rejects.append((qid, str(exc)))
    return Workload(queries, catalog, rejects)


def load_workload(path: str | Path, format: str = "digested", n_qubits: int | None = None,
                  require_classical: bool = False) -> Workload:
    if format == "digested":
        wl = read_digested(path)
    elif format == "sql+data":
        wl = ingest_sql_dir(path, strict=True)
    else:
        raise WorkloadError(f"unknown workload format {format!r}; choose from {FORMATS}")
    if not wl.queries:
        raise WorkloadError(f"{path}: workload has no queries")
    wl.validate(n_qubits=n_qubits, require_classical=require_classical)
    return wl
