"""Workload ingestion: SQL subset parsing, selectivity scans, and workload files."""
from .io import (
    FORMATS,
    QueryFeature,
    Workload,
    dump_digested,
    ingest_sql_dir,
    load_workload,
    read_digested,
    write_digested,
)
from .parser import FilterPredicate, JoinCondition, ParsedQuery, parse_query
from .tables import SchemaCatalog, Table, TableInfo, compute_selectivity

__all__ = [
    "FORMATS",
    "FilterPredicate",
    "JoinCondition",
    "ParsedQuery",
    "QueryFeature",
    "SchemaCatalog",
    "Table",
    "TableInfo",
    "Workload",
    "compute_selectivity",
    "dump_digested",
    "ingest_sql_dir",
    "load_workload",
    "parse_query",
    "read_digested",
    "write_digested",
]
