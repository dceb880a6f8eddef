"""HTTP service exposing query answering, schema inspection, and record
browsing over the KPI store. All numbers cross this boundary as exact
decimal strings.
"""

from __future__ import annotations

import logging
from typing import Any, Optional

from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .pipeline import PipelineConfig
from .query import ClarificationNeeded, answer
from .store import KpiStore
from .taxonomy import default_taxonomy

logger = logging.getLogger(__name__)


class QueryRequest(BaseModel):
    question: str = Field(min_length=1)


class ValidationModel(BaseModel):
    syntax_ok: bool
    unit_consistent: bool
    temporal_aligned: bool
    qualifier_correct: bool
    violations: list[dict]


class QueryResponse(BaseModel):
    question: str
    sql: str
    generation_source: str
    validation: ValidationModel
    columns: list[str]
    rows: list[list[Any]]
    row_count: int
    explanation: str
    attempts: int
    audit_id: str


class ColumnModel(BaseModel):
    name: str
    logical_type: str
    unit_semantics: str
    aliases: list[str]


class SchemaResponse(BaseModel):
    table: str
    schema_version: int
    columns: list[ColumnModel]
    sample_rows: list[list[Any]]


class RecordsResponse(BaseModel):
    records: list[dict]
    page: int
    page_size: int
    total: int


class HealthResponse(BaseModel):
    status: str
    schema_version: int
    row_count: int


class ErrorResponse(BaseModel):
    error: str
    detail: str
    audit_id: Optional[str] = None


_RECORD_COLUMNS = ("metric", "value", "value_low", "value_high", "unit",
                   "scale_applied", "period_granularity", "period_year",
                   "basis", "status", "confidence", "company", "doc_id",
                   "section_id", "published_on")


def create_app(store: KpiStore, config: PipelineConfig | None = None,
               taxonomy=None) -> FastAPI:
    config = config or PipelineConfig()
    taxonomy = taxonomy or default_taxonomy()
    backend = None
    if config.backend == "live":
        backend = config.make_backend(taxonomy)

    app = FastAPI(title="finkpi", version="0.1.0")

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={
            "error": "MalformedRequest", "detail": str(exc.errors()[:1]),
            "audit_id": None})

    @app.exception_handler(Exception)
    async def internal_error(request: Request, exc: Exception):
        audit_id = store.append_audit({"event": "error", "detail": str(exc)})
        logger.exception("request failed (audit %s)", audit_id)
        return JSONResponse(status_code=500, content={
            "error": "InternalError", "detail": "see audit log",
            "audit_id": audit_id})

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", schema_version=store.schema_version,
                              row_count=store.row_count())

    @app.get("/schema", response_model=SchemaResponse)
    def schema():
        return SchemaResponse(**store.export_schema_card(taxonomy).to_json())

    @app.post("/query", response_model=QueryResponse)
    def query(body: QueryRequest):
        try:
            bundle = answer(body.question, store, taxonomy, backend=backend,
                            max_retries=config.max_retries)
        except ClarificationNeeded as exc:
            return JSONResponse(status_code=422, content={
                "error": "ClarificationNeeded", "detail": exc.phrase,
                "audit_id": None})
        return QueryResponse(**bundle.to_json())

    @app.get("/records", response_model=RecordsResponse)
    def records(metric: Optional[str] = Query(default=None),
                year: Optional[int] = Query(default=None),
                status: Optional[str] = Query(default=None),
                page: int = Query(default=1, ge=1),
                page_size: int = Query(default=25, ge=1, le=500)):
        where = []
        params: list = []
        if metric:
            where.append("metric = ?")
            params.append(metric)
        if year is not None:
            where.append("period_year = ?")
            params.append(year)
        if status:
            where.append("status = ?")
            params.append(status)
        clause = (" WHERE " + " AND ".join(where)) if where else ""
        total = store.conn.execute(
            f"SELECT COUNT(*) FROM kpi{clause}", params).fetchone()[0]
        rows = store.conn.execute(
            f"SELECT {', '.join(_RECORD_COLUMNS)} FROM kpi{clause}"
            " ORDER BY doc_id, section_id, metric LIMIT ? OFFSET ?",
            params + [page_size, (page - 1) * page_size]).fetchall()
        out = []
        for row in rows:
            rec = dict(zip(_RECORD_COLUMNS, row))
            for key in ("value", "value_low", "value_high", "scale_applied",
                        "confidence"):
                rec[key] = str(rec[key])
            out.append(rec)
        return RecordsResponse(records=out, page=page, page_size=page_size,
                               total=total)

    return app
