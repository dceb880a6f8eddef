"""End-to-end pipeline orchestration: load -> extract -> rules -> validate ->
persist, plus the runtime configuration shared by the CLI and the service.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

from .backends import CompletionBackend, make_backend
from .extraction import ExtractionResult, extract_document
from .ingest import Document, InputFormat, load_document_file
from .rules import DocMeta, KpiRecord, Rejection, RuleSet, apply_rules
from .store import GateViolation, KpiStore, init_store
from .taxonomy import MetricTaxonomy, default_taxonomy
from .validation import Disposition, review_line, run_checks, score_confidence

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    backend: str = "mock"
    rules: RuleSet = field(default_factory=RuleSet)
    store_path: str = "kpi.db"
    audit_path: str | None = None
    review_path: str | None = None
    parallelism: int = 4
    max_retries: int = 2
    seed: int = 0

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        path = Path(path)
        text = path.read_text()
        if path.suffix == ".toml":
            try:
                import tomllib
            except ImportError:  # Python < 3.11
                import tomli as tomllib
            payload = tomllib.loads(text)
        else:
            payload = json.loads(text)
        rules = RuleSet(**payload.get("rules", {}))
        known = {"backend", "store_path", "audit_path", "review_path",
                 "parallelism", "max_retries", "seed"}
        kwargs = {k: v for k, v in payload.items() if k in known}
        return cls(rules=rules, **kwargs)

    def open_store(self, clock=None) -> KpiStore:
        return init_store(self.store_path, audit_path=self.audit_path, clock=clock)

    def make_backend(self, taxonomy=None) -> CompletionBackend:
        return make_backend(self.backend, taxonomy=taxonomy, seed=self.seed)


@dataclass
class DocumentReport:
    doc_id: str
    accepted: int = 0
    corrected: int = 0
    flagged: int = 0
    rejected: int = 0
    section_failures: int = 0
    rejections: list[str] = field(default_factory=list)

    @property
    def persisted(self) -> int:
        return self.accepted + self.corrected + self.flagged


def process_document(doc: Document, backend: CompletionBackend,
                     taxonomy: MetricTaxonomy, rules: RuleSet,
                     parallelism: int = 4) -> tuple[list[KpiRecord], DocumentReport,
                                                    list[str]]:
    """Run extraction, rule injection, and validation for one document.

    Returns (persistable records, per-document report, review JSONL lines).
    Flagged records persist with their reduced confidence; schema-invalid
    records never leave this function.
    """
    report = DocumentReport(doc_id=doc.doc_id)
    extraction = extract_document(doc, backend, taxonomy, parallelism=parallelism)
    report.section_failures = len(extraction.failures)

    meta = DocMeta(doc.company, doc.published_on, doc.fiscal_year_end_month)
    persistable: list[KpiRecord] = []
    review_lines: list[str] = []
    for raw in extraction.records:
        outcome_record = apply_rules(raw, rules, meta, taxonomy)
        if isinstance(outcome_record, Rejection):
            report.rejected += 1
            report.rejections.append(f"{outcome_record.reason}: {outcome_record.detail}")
            continue
        validation = run_checks(outcome_record, doc)
        if validation.disposition is Disposition.CORRECTED and \
                validation.corrected_record is not None:
            outcome_record = validation.corrected_record
            validation = replace(validation, corrected_record=outcome_record)
        confidence = score_confidence(outcome_record, validation)
        outcome_record = replace(outcome_record, confidence=float(confidence))

        from .validation import validate_schema
        if validate_schema(outcome_record):
            report.rejected += 1
            report.rejections.append("SchemaViolation")
            continue
        if validation.disposition is Disposition.ACCEPTED:
            report.accepted += 1
        elif validation.disposition is Disposition.CORRECTED:
            report.corrected += 1
        else:
            report.flagged += 1
            review_lines.append(review_line(outcome_record, validation))
        persistable.append(outcome_record)
    return persistable, report, review_lines


def ingest_paths(paths, config: PipelineConfig, store: KpiStore | None = None,
                 taxonomy: MetricTaxonomy | None = None) -> list[DocumentReport]:
    """CLI/service ingestion entry: process files and upsert into the store.

    Per-file failures are reported, never aborting the batch.
    """
    taxonomy = taxonomy or default_taxonomy()
    backend = config.make_backend(taxonomy)
    own_store = store is None
    store = store or config.open_store()
    reports: list[DocumentReport] = []
    review_path = Path(config.review_path) if config.review_path else \
        Path(config.store_path).with_suffix(".review.jsonl")
    try:
        for path in paths:
            path = Path(path)
            try:
                doc = load_document_file(path)
            except Exception as exc:
                report = DocumentReport(doc_id=str(path))
                report.rejections.append(f"LoadError: {exc}")
                report.section_failures = 1
                reports.append(report)
                continue
            records, report, review = process_document(
                doc, backend, taxonomy, config.rules, config.parallelism)
            try:
                store.upsert_records(records)
            except GateViolation as exc:
                report.rejections.append(str(exc))
                report.rejected += len(records)
                report.accepted = report.corrected = report.flagged = 0
            if review:
                with review_path.open("a", encoding="utf-8") as fh:
                    fh.write("\n".join(review) + "\n")
            reports.append(report)
    finally:
        if own_store:
            store.close()
    return reports


def ingest_documents(docs: list[Document], config: PipelineConfig,
                     store: KpiStore, taxonomy: MetricTaxonomy | None = None
                     ) -> tuple[list[KpiRecord], list[DocumentReport]]:
    """In-memory ingestion used by the evaluation harness."""
    taxonomy = taxonomy or default_taxonomy()
    backend = config.make_backend(taxonomy)
    all_records: list[KpiRecord] = []
    reports: list[DocumentReport] = []
    for doc in docs:
        records, report, _ = process_document(
            doc, backend, taxonomy, config.rules, config.parallelism)
        store.upsert_records(records)
        all_records.extend(records)
        reports.append(report)
    return all_records, reports
