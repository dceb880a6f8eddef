"""Evaluation harness: seeded synthetic corpus with known gold labels,
extraction/query scoring, and the rule-ablation comparison.

The synthetic corpus stands in for proprietary annotated filings: it
reproduces metric definitions and ablation direction, never published
absolute numbers.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from datetime import date
from decimal import Decimal

from .extraction import Provenance
from .ingest import Document, DocumentMeta, InputFormat, SourceKind, load_document
from .oracle import OracleAnswer, evaluate_intent
from .pipeline import PipelineConfig, ingest_documents
from .query import (Aggregation, PeriodFilter, QueryIntent, StatusFilter,
                    answer, generate_sql, parse_intent, validate_constraints)
from .rules import (Basis, DocMeta, FiscalPeriod, Granularity, KpiRecord,
                    PeriodSource, Qualifier, RuleSet, Status, Unit)
from .sqlgrammar import SqlSyntaxError, parse_select
from .store import init_store
from .taxonomy import MetricTaxonomy, default_taxonomy
from .validation import Disposition, run_checks, validate_schema

REL_TOL = Decimal("1e-9")


def _close(a: Decimal, b: Decimal) -> bool:
    if a == b:
        return True
    denom = max(abs(a), abs(b))
    return denom != 0 and abs(a - b) / denom <= REL_TOL


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GoldQuestion:
    question: str
    intent: QueryIntent


@dataclass
class SyntheticCorpus:
    seed: int
    documents: list[Document]
    gold: dict[str, list[KpiRecord]]
    questions: list[GoldQuestion]

    def all_gold(self) -> list[KpiRecord]:
        return [r for records in self.gold.values() for r in records]


_PERCENT_METRICS = [("operating_margin", "Operating margin"),
                    ("gross_margin", "Gross margin")]
_CURRENCY_METRICS = [("revenue", "Revenue"),
                     ("operating_income", "Operating income"),
                     ("free_cash_flow", "Free cash flow")]
_TICKERS = ["ACME", "GLOBX", "NIMBQ", "VELTA", "ORNDA", "PLUTN", "QTRIX"]


def _gold_record(doc_id: str, company: str, published: date, metric: str,
                 value: Decimal, low: Decimal, high: Decimal, unit: Unit,
                 scale: Decimal, period: FiscalPeriod, basis: Basis,
                 status: Status) -> KpiRecord:
    return KpiRecord(
        metric=metric, value=value, value_low=low, value_high=high, unit=unit,
        scale_applied=scale, period=period,
        qualifier=Qualifier(basis, status), confidence=1.0,
        provenance=Provenance(doc_id, "s000", (0, 0)),
        rules_applied=(), company=company, published_on=published)


def generate_synthetic_corpus(seed: int, n_docs: int) -> SyntheticCorpus:
    """Templated earnings-release paragraphs with derived gold labels.

    Deterministic for a fixed seed; every 4th document carries a guidance
    range, every 2nd a relative prior-year mention.
    """
    if n_docs < 1:
        raise ValueError("n_docs must be >= 1")
    rng = random.Random(seed)
    documents: list[Document] = []
    gold: dict[str, list[KpiRecord]] = {}
    questions: list[GoldQuestion] = []

    for idx in range(n_docs):
        doc_id = f"doc-{seed}-{idx:04d}"
        company = _TICKERS[idx % len(_TICKERS)]
        year = rng.choice([2023, 2024, 2025])
        quarter = rng.randint(1, 4)
        published = date(year, min(12, quarter * 3 + 1), rng.randint(1, 28))
        qlabel = f"Q{quarter} {year}"

        sentences: list[str] = []
        records: list[KpiRecord] = []

        pm_name, pm_alias = _PERCENT_METRICS[idx % len(_PERCENT_METRICS)]
        p1 = Decimal(rng.randint(80, 420)) / 10
        period = FiscalPeriod(Granularity(f"Q{quarter}"), year, PeriodSource.EXPLICIT)
        if idx % 2 == 0:
            p2 = p1 - Decimal(rng.randint(5, 30)) / 10
            sentences.append(
                f"{pm_alias} in {qlabel} was {p1}%, up from {p2}% last year.")
            records.append(_gold_record(doc_id, company, published, pm_name,
                                        p1, p1, p1, Unit.PERCENT, Decimal(1),
                                        period, Basis.UNSTATED, Status.ACTUAL))
            prior = FiscalPeriod(period.granularity, year - 1, PeriodSource.RELATIVE_PRIOR)
            records.append(_gold_record(doc_id, company, published, pm_name,
                                        p2, p2, p2, Unit.PERCENT, Decimal(1),
                                        prior, Basis.UNSTATED, Status.ACTUAL))
        else:
            sentences.append(f"{pm_alias} in {qlabel} was {p1}%.")
            records.append(_gold_record(doc_id, company, published, pm_name,
                                        p1, p1, p1, Unit.PERCENT, Decimal(1),
                                        period, Basis.UNSTATED, Status.ACTUAL))

        cm_name, cm_alias = _CURRENCY_METRICS[idx % len(_CURRENCY_METRICS)]
        face = Decimal(rng.randint(110, 9900)) / 100
        scale_word, scale = rng.choice([("billion", Decimal("1000000000")),
                                        ("million", Decimal("1000000"))])
        sentences.append(f"{cm_alias} in {qlabel} was ${face} {scale_word}.")
        canonical_value = face * scale
        records.append(_gold_record(doc_id, company, published, cm_name,
                                    canonical_value, canonical_value, canonical_value,
                                    Unit.USD, scale, period, Basis.UNSTATED,
                                    Status.ACTUAL))

        if idx % 3 == 0:
            am_name, am_alias = _PERCENT_METRICS[(idx + 1) % len(_PERCENT_METRICS)]
            p3 = Decimal(rng.randint(80, 420)) / 10
            sentences.append(f"Adjusted {am_alias.lower()} in {qlabel} was {p3}%.")
            records.append(_gold_record(doc_id, company, published, am_name,
                                        p3, p3, p3, Unit.PERCENT, Decimal(1),
                                        period, Basis.NON_GAAP, Status.ACTUAL))

        if idx % 4 == 0:
            low = Decimal(rng.randint(8, 30))
            high = low + Decimal(rng.randint(1, 4))
            guide_year = year + 1
            sentences.append(
                f"The company expects {pm_alias.lower()} to be between "
                f"{low}–{high}% in FY {guide_year}.")
            mid = (low + high) / 2
            guide_period = FiscalPeriod(Granularity.FY, guide_year, PeriodSource.EXPLICIT)
            records.append(_gold_record(doc_id, company, published, pm_name,
                                        mid, low, high, Unit.PERCENT, Decimal(1),
                                        guide_period, Basis.UNSTATED, Status.GUIDANCE))

        text = " ".join(sentences)
        meta = DocumentMeta(doc_id, SourceKind.EARNINGS_RELEASE, company,
                            published, 12)
        doc = load_document(text.encode("utf-8"), InputFormat.PLAIN_TEXT, meta)
        documents.append(doc)
        gold[doc_id] = records

        # 1-3 questions per document, drawn from a small question grammar
        pm_q = f"What was {pm_alias.lower()} in {qlabel}?"
        questions.append(GoldQuestion(pm_q, QueryIntent(
            metrics=(pm_name,),
            period_filter=PeriodFilter(period.granularity, year))))
        if idx % 4 == 0:
            questions.append(GoldQuestion(
                f"What is the FY {year + 1} {pm_alias.lower()} guidance?",
                QueryIntent(metrics=(pm_name,),
                            period_filter=PeriodFilter(Granularity.FY, year + 1),
                            status_filter=StatusFilter.GUIDANCE_ONLY)))
        if idx % 5 == 0:
            questions.append(GoldQuestion(
                f"What was the average {cm_alias.lower()}?",
                QueryIntent(metrics=(cm_name,), aggregation=Aggregation.AVG)))

    return SyntheticCorpus(seed=seed, documents=documents, gold=gold,
                           questions=questions)


# ---------------------------------------------------------------------------
# Extraction scoring
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtractionMetrics:
    precision: float
    recall: float
    f1: float
    unit_error_rate: float
    period_misalignment_rate: float
    structuring_accuracy: float
    schema_compliance: float
    qa_match_rate: float

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in (
            "precision", "recall", "f1", "unit_error_rate",
            "period_misalignment_rate", "structuring_accuracy",
            "schema_compliance", "qa_match_rate")}


def _key(record: KpiRecord) -> tuple:
    return (record.provenance.doc_id, record.metric, record.period.label,
            record.qualifier.status.value)


def score_extraction(predicted: list[KpiRecord], gold: list[KpiRecord],
                     docs: dict[str, Document] | None = None) -> ExtractionMetrics:
    """Score predicted records against gold on the (doc, metric, period,
    status) key with exact-decimal value matching."""
    gold_by_key = {_key(g): g for g in gold}
    reduced = {}
    for g in gold:
        reduced.setdefault((g.provenance.doc_id, g.metric,
                            g.qualifier.status.value), []).append(g)

    tp = 0
    key_matches = 0
    unit_errors = 0
    period_mis = 0
    stray_mis = 0  # misaligned records whose key matches no gold record
    exact = 0
    for p in predicted:
        g = gold_by_key.get(_key(p))
        siblings = reduced.get((p.provenance.doc_id, p.metric,
                                p.qualifier.status.value), [])
        misaligned = any(_close(p.value, s.value) and s.period.label != p.period.label
                         for s in siblings)
        if g is not None:
            key_matches += 1
            unit_ok = p.unit is g.unit and p.scale_applied == g.scale_applied
            if not unit_ok:
                unit_errors += 1
            if _close(p.value, g.value) and unit_ok:
                tp += 1
                if p.value_low == g.value_low and p.value_high == g.value_high and \
                        p.qualifier.basis is g.qualifier.basis:
                    exact += 1
            elif misaligned:
                # right key slot, but the value belongs to a different period
                period_mis += 1
        elif misaligned:
            period_mis += 1
            stray_mis += 1

    precision = tp / len(predicted) if predicted else 0.0
    recall = tp / len(gold) if gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    denom = key_matches + stray_mis

    qa_accepted = 0
    if predicted:
        for p in predicted:
            doc = docs.get(p.provenance.doc_id) if docs else None
            if run_checks(p, doc).disposition is Disposition.ACCEPTED:
                qa_accepted += 1

    return ExtractionMetrics(
        precision=precision,
        recall=recall,
        f1=f1,
        unit_error_rate=unit_errors / key_matches if key_matches else 0.0,
        period_misalignment_rate=period_mis / denom if denom else 0.0,
        structuring_accuracy=exact / len(gold) if gold else 0.0,
        schema_compliance=(sum(1 for p in predicted if not validate_schema(p))
                           / len(predicted)) if predicted else 1.0,
        qa_match_rate=qa_accepted / len(predicted) if predicted else 0.0,
    )


# ---------------------------------------------------------------------------
# Query scoring
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QueryMetrics:
    intent_accuracy: float | None
    sql_syntax_validity: float | None
    constraint_pass_rate: float | None
    execution_success_rate: float | None
    top1_oracle_accuracy: float | None

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in (
            "intent_accuracy", "sql_syntax_validity", "constraint_pass_rate",
            "execution_success_rate", "top1_oracle_accuracy")}


def _bundle_values(bundle) -> tuple[Decimal, ...]:
    cols = bundle.result.columns
    if not bundle.result.rows:
        return ()
    if "value" in cols:
        idx = cols.index("value")
    else:
        idx = 0
    values = []
    for row in bundle.result.rows:
        v = row[idx]
        if v is None:
            continue
        values.append(Decimal(str(v)))
    return tuple(sorted(values))


def _answers_match(got: tuple[Decimal, ...], oracle: OracleAnswer) -> bool:
    want = tuple(sorted(oracle.values))
    if len(got) != len(want):
        return False
    return all(_close(a, b) for a, b in zip(got, want))


def score_queries(store, corpus: SyntheticCorpus,
                  taxonomy: MetricTaxonomy | None = None) -> QueryMetrics:
    """Run the question set through the full agent and score against the
    brute-force intent oracle evaluated on gold records."""
    taxonomy = taxonomy or default_taxonomy()
    if not corpus.questions:
        return QueryMetrics(None, None, None, None, None)

    gold_records = corpus.all_gold()
    card = store.export_schema_card(taxonomy)
    intent_hits = 0
    syntax_ok = 0
    syntax_total = 0
    constraint_ok = 0
    executed = 0
    oracle_hits = 0
    for gq in corpus.questions:
        intent = parse_intent(gq.question, taxonomy)
        if intent == gq.intent:
            intent_hits += 1
        candidates = generate_sql(intent, card)
        for cand in candidates:
            syntax_total += 1
            try:
                parse_select(cand.sql)
                syntax_ok += 1
            except SqlSyntaxError:
                continue
            if validate_constraints(cand, card, taxonomy).passed:
                constraint_ok += 1
        bundle = answer(gq.question, store, taxonomy)
        if bundle.result.columns:
            executed += 1
        oracle_answer = evaluate_intent(gold_records, gq.intent)
        if _answers_match(_bundle_values(bundle), oracle_answer):
            oracle_hits += 1

    n = len(corpus.questions)
    return QueryMetrics(
        intent_accuracy=intent_hits / n,
        sql_syntax_validity=syntax_ok / syntax_total if syntax_total else None,
        constraint_pass_rate=constraint_ok / syntax_total if syntax_total else None,
        execution_success_rate=executed / n,
        top1_oracle_accuracy=oracle_hits / n,
    )


# ---------------------------------------------------------------------------
# Full runs and ablation
# ---------------------------------------------------------------------------

@dataclass
class HarnessRun:
    flags: dict[str, bool]
    extraction: ExtractionMetrics
    queries: QueryMetrics | None

    def to_json(self) -> dict:
        return {"flags": self.flags,
                "extraction": self.extraction.to_json(),
                "queries": self.queries.to_json() if self.queries else None}


def run_pipeline_eval(corpus: SyntheticCorpus, rules: RuleSet,
                      store_path, with_queries: bool = True,
                      clock=None) -> HarnessRun:
    config = PipelineConfig(backend="mock", rules=rules,
                            store_path=str(store_path), seed=corpus.seed)
    store = init_store(store_path, clock=clock)
    try:
        predicted, _reports = ingest_documents(corpus.documents, config, store)
        docs = {d.doc_id: d for d in corpus.documents}
        extraction = score_extraction(predicted, corpus.all_gold(), docs)
        queries = score_queries(store, corpus) if with_queries else None
    finally:
        store.close()
    return HarnessRun(flags=rules.flags(), extraction=extraction, queries=queries)


@dataclass
class AblationReport:
    seed: int
    n_docs: int
    runs: list[HarnessRun]

    def deltas(self) -> dict:
        base = self.runs[0].extraction
        out = {}
        for run in self.runs[1:]:
            name = ",".join(k for k, v in run.flags.items() if not v) or "all_on"
            e = run.extraction
            out[name] = {
                "precision": e.precision - base.precision,
                "unit_error_rate": e.unit_error_rate - base.unit_error_rate,
                "period_misalignment_rate":
                    e.period_misalignment_rate - base.period_misalignment_rate,
                "qa_match_rate": e.qa_match_rate - base.qa_match_rate,
            }
        return out

    def to_json(self) -> dict:
        return {"seed": self.seed, "n_docs": self.n_docs,
                "runs": [r.to_json() for r in self.runs],
                "deltas": self.deltas()}

    def to_markdown(self) -> str:
        headers = ["config", "precision", "unit_error_rate",
                   "period_misalignment_rate", "qa_match_rate",
                   "sql_syntax_validity"]
        lines = ["| " + " | ".join(headers) + " |",
                 "|" + "|".join("---" for _ in headers) + "|"]
        for run in self.runs:
            disabled = [k for k, v in run.flags.items() if not v]
            name = "all rules on" if not disabled else "off: " + ",".join(disabled)
            q = run.queries
            lines.append("| " + " | ".join([
                name,
                f"{run.extraction.precision:.4f}",
                f"{run.extraction.unit_error_rate:.4f}",
                f"{run.extraction.period_misalignment_rate:.4f}",
                f"{run.extraction.qa_match_rate:.4f}",
                f"{q.sql_syntax_validity:.4f}" if q and q.sql_syntax_validity
                is not None else "n/a",
            ]) + " |")
        return "\n".join(lines)


def run_ablation(corpus: SyntheticCorpus, flag_matrix: list[RuleSet],
                 workdir, with_queries: bool = False, clock=None) -> AblationReport:
    """Run the full pipeline per flag configuration and report deltas against
    the first configuration."""
    from pathlib import Path
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    runs = []
    for i, rules in enumerate(flag_matrix):
        store_path = workdir / f"ablation-{i}.db"
        if store_path.exists():
            store_path.unlink()
        runs.append(run_pipeline_eval(corpus, rules, store_path,
                                      with_queries=with_queries, clock=clock))
    return AblationReport(seed=corpus.seed, n_docs=len(corpus.documents), runs=runs)
