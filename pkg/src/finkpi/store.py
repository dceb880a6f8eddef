"""Embedded relational KPI store: schema-guaranteed persistence, read-only
SQL execution, schema-card export, and an append-only JSONL audit log.
"""

from __future__ import annotations

import json
import sqlite3
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from decimal import Decimal
from pathlib import Path

from .rules import KpiRecord
from .sqlgrammar import SqlSyntaxError, parse_select
from .taxonomy import MetricTaxonomy, default_taxonomy
from .validation import validate_schema

SCHEMA_VERSION = 1

_WRITE_VERBS = {"INSERT", "UPDATE", "DELETE", "DROP", "CREATE", "ALTER",
                "PRAGMA", "ATTACH", "DETACH", "VACUUM", "REPLACE", "BEGIN",
                "COMMIT", "ROLLBACK"}


class StoreError(Exception):
    pass


class IoError(StoreError):
    pass


class SchemaVersionMismatch(StoreError):
    pass


class GateViolation(StoreError):
    def __init__(self, violations: list[tuple[str, list[str]]]):
        self.violations = violations
        detail = "; ".join(f"{metric}: {', '.join(names)}"
                           for metric, names in violations)
        super().__init__(
            f"{len(violations)} record(s) failed the schema gate ({detail})")


class NonSelectRejected(StoreError):
    pass


class ExecutionError(StoreError):
    pass


@dataclass(frozen=True)
class ColumnInfo:
    name: str
    logical_type: str
    unit_semantics: str
    aliases: tuple[str, ...] = ()


@dataclass(frozen=True)
class SchemaCard:
    table: str
    columns: tuple[ColumnInfo, ...]
    sample_rows: tuple[tuple, ...]
    schema_version: int

    def column(self, name: str) -> ColumnInfo | None:
        for col in self.columns:
            if col.name == name:
                return col
        return None

    def to_json(self) -> dict:
        return {
            "table": self.table,
            "schema_version": self.schema_version,
            "columns": [{
                "name": c.name, "logical_type": c.logical_type,
                "unit_semantics": c.unit_semantics, "aliases": list(c.aliases),
            } for c in self.columns],
            "sample_rows": [[_jsonable(v) for v in row] for row in self.sample_rows],
        }


@dataclass(frozen=True)
class ResultTable:
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]

    @property
    def row_count(self) -> int:
        return len(self.rows)

    def to_json(self) -> dict:
        return {"columns": list(self.columns),
                "rows": [[_jsonable(v) for v in row] for row in self.rows],
                "row_count": self.row_count}


def _jsonable(value):
    if isinstance(value, Decimal):
        return str(value)
    if isinstance(value, date):
        return value.isoformat()
    return value


_DDL = """
CREATE TABLE IF NOT EXISTS kpi (
    metric TEXT NOT NULL,
    value DECIMAL NOT NULL,
    value_low DECIMAL NOT NULL,
    value_high DECIMAL NOT NULL,
    unit TEXT NOT NULL,
    scale_applied DECIMAL NOT NULL,
    period_granularity TEXT NOT NULL,
    period_year INT NOT NULL,
    basis TEXT NOT NULL,
    status TEXT NOT NULL,
    confidence DECIMAL NOT NULL,
    company TEXT NOT NULL,
    doc_id TEXT NOT NULL,
    section_id TEXT NOT NULL,
    published_on DATE
);
CREATE UNIQUE INDEX IF NOT EXISTS kpi_key
    ON kpi (doc_id, section_id, metric, period_granularity, period_year, status);
CREATE TABLE IF NOT EXISTS store_meta (key TEXT PRIMARY KEY, value TEXT NOT NULL);
"""


class KpiStore:
    """Single-writer embedded store over sqlite with a JSONL audit log.

    Timestamps are injected via the `clock` callable so two identical runs
    produce byte-identical stores and audit logs.
    """

    def __init__(self, path, schema_version: int = SCHEMA_VERSION,
                 audit_path=None, clock=None):
        self.path = Path(path)
        self.audit_path = Path(audit_path) if audit_path else \
            self.path.with_suffix(self.path.suffix + ".audit.jsonl")
        self.clock = clock or (lambda: datetime.now(timezone.utc).isoformat())
        try:
            # the HTTP layer serves sync endpoints from a worker-thread pool,
            # so the connection cannot be pinned to the opening thread
            self.conn = sqlite3.connect(str(self.path), check_same_thread=False)
        except sqlite3.Error as exc:
            raise IoError(f"cannot open store at {self.path}: {exc}") from exc
        self.conn.executescript(_DDL)
        row = self.conn.execute(
            "SELECT value FROM store_meta WHERE key='schema_version'").fetchone()
        if row is None:
            self.conn.execute(
                "INSERT INTO store_meta (key, value) VALUES ('schema_version', ?)",
                (str(schema_version),))
            self.conn.commit()
        elif int(row[0]) != schema_version:
            self.conn.close()
            raise SchemaVersionMismatch(
                f"store has schema version {row[0]}, requested {schema_version}")
        self.schema_version = schema_version

    def close(self):
        self.conn.close()

    # --- audit ------------------------------------------------------------

    def _next_audit_id(self) -> str:
        if not hasattr(self, "_audit_count"):
            if self.audit_path.exists():
                with self.audit_path.open("rb") as fh:
                    self._audit_count = sum(1 for _ in fh)
            else:
                self._audit_count = 0
        self._audit_count += 1
        return f"audit-{self._audit_count:06d}"

    def append_audit(self, event: dict) -> str:
        audit_id = self._next_audit_id()
        ts = self.clock()
        if isinstance(ts, datetime):
            ts = ts.isoformat()
        line = json.dumps({"audit_id": audit_id, "ts": ts, **event},
                          sort_keys=True)
        with self.audit_path.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")
        return audit_id

    # --- writes -----------------------------------------------------------

    @staticmethod
    def record_key(record: KpiRecord) -> tuple:
        return (record.provenance.doc_id, record.provenance.section_id,
                record.metric, record.period.granularity.value,
                record.period.year, record.qualifier.status.value)

    def upsert_records(self, records: list[KpiRecord]) -> int:
        """Atomic batch upsert; any schema-gate violation rejects the batch.

        Re-ingesting the same key replaces the row. Returns net new rows.
        """
        bad = [(r.metric, validate_schema(r)) for r in records]
        bad = [(m, v) for m, v in bad if v]
        if bad:
            raise GateViolation(bad)

        inserted = 0
        cur = self.conn.cursor()
        try:
            for record in records:
                key = self.record_key(record)
                exists = cur.execute(
                    "SELECT 1 FROM kpi WHERE doc_id=? AND section_id=? AND metric=?"
                    " AND period_granularity=? AND period_year=? AND status=?",
                    key).fetchone()
                cur.execute(
                    "INSERT OR REPLACE INTO kpi (metric, value, value_low, value_high,"
                    " unit, scale_applied, period_granularity, period_year, basis,"
                    " status, confidence, company, doc_id, section_id, published_on)"
                    " VALUES (?,?,?,?,?,?,?,?,?,?,?,?,?,?,?)",
                    (record.metric, str(record.value), str(record.value_low),
                     str(record.value_high), record.unit.value,
                     str(record.scale_applied), record.period.granularity.value,
                     record.period.year, record.qualifier.basis.value,
                     record.qualifier.status.value, str(record.confidence),
                     record.company, record.provenance.doc_id,
                     record.provenance.section_id,
                     record.published_on.isoformat() if record.published_on else None))
                if exists is None:
                    inserted += 1
                self.append_audit({"event": "upsert", "key": list(key),
                                   "value": str(record.value)})
            self.conn.commit()
        except sqlite3.Error as exc:
            self.conn.rollback()
            raise IoError(str(exc)) from exc
        return inserted

    # --- reads ------------------------------------------------------------

    def row_count(self) -> int:
        return self.conn.execute("SELECT COUNT(*) FROM kpi").fetchone()[0]

    def export_schema_card(self, taxonomy: MetricTaxonomy | None = None) -> SchemaCard:
        taxonomy = taxonomy or default_taxonomy()
        metric_aliases = tuple(
            alias for alias, _ in sorted(taxonomy.aliases_sorted(), key=lambda kv: kv[0]))
        columns = (
            ColumnInfo("metric", "text", "canonical metric name", metric_aliases),
            ColumnInfo("value", "decimal", "metric-dependent (USD|Percent|Count)"),
            ColumnInfo("value_low", "decimal", "metric-dependent range low bound"),
            ColumnInfo("value_high", "decimal", "metric-dependent range high bound"),
            ColumnInfo("unit", "text", "one of USD, Percent, Count"),
            ColumnInfo("scale_applied", "decimal", "multiplier applied to the face value"),
            ColumnInfo("period_granularity", "text", "FY, Q1-Q4, H1, H2"),
            ColumnInfo("period_year", "int", "fiscal year"),
            ColumnInfo("basis", "text", "GAAP, NonGAAP, Unstated"),
            ColumnInfo("status", "text", "Actual or Guidance"),
            ColumnInfo("confidence", "decimal", "validation confidence in [0,1]"),
            ColumnInfo("company", "text", "ticker"),
            ColumnInfo("doc_id", "text", "source document id"),
            ColumnInfo("section_id", "text", "source section id"),
            ColumnInfo("published_on", "date", "publication date"),
        )
        rows = self.conn.execute(
            "SELECT metric, value, value_low, value_high, unit, scale_applied,"
            " period_granularity, period_year, basis, status, confidence, company,"
            " doc_id, section_id, published_on FROM kpi ORDER BY rowid LIMIT 3"
        ).fetchall()
        return SchemaCard(table="kpi", columns=columns,
                          sample_rows=tuple(tuple(r) for r in rows),
                          schema_version=self.schema_version)

    def execute_sql(self, sql: str) -> ResultTable:
        """Execute a read-only SELECT; write statements are rejected before
        touching sqlite."""
        head = sql.strip().split(None, 1)
        if head and head[0].upper() in _WRITE_VERBS:
            raise NonSelectRejected(f"read-only interface: {head[0].upper()} rejected")
        stmt = parse_select(sql)  # raises SqlSyntaxError on bad grammar
        if stmt.table != "kpi":
            raise ExecutionError(f"unknown table: {stmt.table}")
        try:
            cur = self.conn.execute(sql)
        except sqlite3.Error as exc:
            raise ExecutionError(str(exc)) from exc
        columns = tuple(d[0] for d in cur.description)
        rows = tuple(tuple(_convert_cell(v) for v in row) for row in cur.fetchall())
        return ResultTable(columns=columns, rows=rows)


def _convert_cell(value):
    if isinstance(value, float):
        return Decimal(repr(value))
    if isinstance(value, str):
        # decimal-affinity columns come back as TEXT when non-numeric storage
        try:
            return Decimal(value) if value and value[0] in "-0123456789." and \
                _looks_numeric(value) else value
        except Exception:
            return value
    return value


def _looks_numeric(text: str) -> bool:
    import re
    return bool(re.fullmatch(r"-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?", text))


def init_store(path, schema_version: int = SCHEMA_VERSION,
               audit_path=None, clock=None) -> KpiStore:
    return KpiStore(path, schema_version=schema_version,
                    audit_path=audit_path, clock=clock)
