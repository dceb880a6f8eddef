"""Text-to-SQL agent: parse analyst questions into intents, compile them to
constraint-validated SQL over the KPI store, execute with feedback, and
render deterministic natural-language explanations.

The deterministic template generator always backs the optional LLM path, so
the whole agent runs offline and the template defines intent semantics
precisely enough for an independent oracle to check answers.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from decimal import Decimal
from enum import Enum

from .backends import CompletionBackend
from .rules import Basis, Granularity, Status
from .sqlgrammar import (BinOp, Column, FuncCall, SelectStmt, SqlSyntaxError,
                         aggregates_in, binops_in, columns_in, parse_select)
from .store import ExecutionError, KpiStore, NonSelectRejected, ResultTable, SchemaCard
from .taxonomy import MetricTaxonomy, ValueClass, default_taxonomy


class ClarificationNeeded(Exception):
    def __init__(self, phrase: str):
        self.phrase = phrase
        super().__init__(f"no known metric matches: {phrase!r}")


class UnrecognizedMetric(ClarificationNeeded):
    pass


class Aggregation(Enum):
    NONE = "None"
    AVG = "Avg"
    SUM = "Sum"
    MIN = "Min"
    MAX = "Max"
    COUNT = "Count"
    LATEST = "Latest"


class StatusFilter(Enum):
    ACTUAL_ONLY = "ActualOnly"
    GUIDANCE_ONLY = "GuidanceOnly"
    BOTH = "Both"


class Comparison(Enum):
    YOY = "YoY"
    QOQ = "QoQ"


@dataclass(frozen=True)
class PeriodFilter:
    granularity: Granularity | None = None
    year: int | None = None
    year_end: int | None = None  # inclusive upper bound of a year range


@dataclass(frozen=True)
class QueryIntent:
    metrics: tuple[str, ...]
    period_filter: PeriodFilter | None = None
    aggregation: Aggregation = Aggregation.NONE
    basis_filter: Basis | None = None
    status_filter: StatusFilter = StatusFilter.ACTUAL_ONLY
    company_filter: str | None = None
    comparison: Comparison | None = None


class GenerationSource(Enum):
    TEMPLATE = "Template"
    BACKEND = "Backend"


@dataclass(frozen=True)
class SqlCandidate:
    sql: str
    intent: QueryIntent
    generation_source: GenerationSource
    attempt: int = 0


@dataclass(frozen=True)
class ConstraintViolation:
    rule: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    syntax_ok: bool
    unit_consistent: bool
    temporal_aligned: bool
    qualifier_correct: bool
    violations: tuple[ConstraintViolation, ...] = ()

    @property
    def passed(self) -> bool:
        return (self.syntax_ok and self.unit_consistent
                and self.temporal_aligned and self.qualifier_correct)

    def to_json(self) -> dict:
        return {
            "syntax_ok": self.syntax_ok,
            "unit_consistent": self.unit_consistent,
            "temporal_aligned": self.temporal_aligned,
            "qualifier_correct": self.qualifier_correct,
            "violations": [{"rule": v.rule, "detail": v.detail} for v in self.violations],
        }


@dataclass(frozen=True)
class AnswerBundle:
    question: str
    candidate: SqlCandidate
    report: ValidationReport
    result: ResultTable
    explanation: str
    attempts: int
    audit_id: str = ""

    def to_json(self) -> dict:
        return {
            "question": self.question,
            "sql": self.candidate.sql,
            "generation_source": self.candidate.generation_source.value,
            "validation": self.report.to_json(),
            "columns": list(self.result.columns),
            "rows": self.result.to_json()["rows"],
            "row_count": self.result.row_count,
            "explanation": self.explanation,
            "attempts": self.attempts,
            "audit_id": self.audit_id,
        }


# ---------------------------------------------------------------------------
# Query understanding
# ---------------------------------------------------------------------------

_PERIOD_Q = re.compile(r"\b(?:(Q[1-4])|(FY)|(H[1-2]))(?:\s+(\d{4}))?\b", re.IGNORECASE)
_BARE_YEAR = re.compile(r"\b((?:19|20)\d{2})\b")
_TICKER = re.compile(r"\bfor ([A-Z]{1,5})\b")
_TICKER_STOPWORDS = frozenset({"FY", "Q1", "Q2", "Q3", "Q4", "H1", "H2",
                               "YOY", "QOQ", "GAAP", "EPS", "FCF", "KPI"})

_AGG_KEYWORDS = [
    (Aggregation.AVG, ("average", "avg", "mean")),
    (Aggregation.SUM, ("total", "sum of", "combined")),
    (Aggregation.COUNT, ("how many", "count of", "number of")),
    (Aggregation.MIN, ("minimum", "lowest", "smallest")),
    (Aggregation.MAX, ("maximum", "highest", "largest")),
    (Aggregation.LATEST, ("latest", "most recent", "current")),
]


def parse_intent(question: str, taxonomy: MetricTaxonomy | None = None) -> QueryIntent:
    """Parse a natural-language question into a structured intent.

    Guidance is excluded by default: questions resolve to ActualOnly unless
    they explicitly ask about guidance or outlook.
    """
    if not question.strip():
        raise UnrecognizedMetric(question)
    taxonomy = taxonomy or default_taxonomy()
    lowered = question.lower()

    metrics: list[str] = []
    claimed: list[tuple[int, int]] = []
    for alias, canonical in taxonomy.aliases_sorted():
        for m in re.finditer(rf"\b{re.escape(alias)}\b", lowered):
            if any(not (m.end() <= s or e <= m.start()) for s, e in claimed):
                continue
            claimed.append((m.start(), m.end()))
            if canonical not in metrics:
                metrics.append(canonical)
    if not metrics:
        raise UnrecognizedMetric(question.strip())

    period = None
    pm = _PERIOD_Q.search(question)
    if pm:
        gran_text = (pm.group(1) or pm.group(3) or "FY").upper()
        gran = Granularity(gran_text)
        year = int(pm.group(4)) if pm.group(4) else None
        if year is None:
            ym = _BARE_YEAR.search(question)
            year = int(ym.group(1)) if ym else None
        period = PeriodFilter(granularity=gran, year=year)
    else:
        ym = _BARE_YEAR.search(question)
        if ym:
            period = PeriodFilter(granularity=None, year=int(ym.group(1)))

    status = StatusFilter.GUIDANCE_ONLY \
        if re.search(r"\b(?:guidance|outlook)\b", lowered) else StatusFilter.ACTUAL_ONLY

    basis = None
    if "non-gaap" in lowered or "adjusted" in lowered:
        basis = Basis.NON_GAAP
    elif "gaap" in lowered:
        basis = Basis.GAAP

    aggregation = Aggregation.NONE
    for agg, keywords in _AGG_KEYWORDS:
        if any(k in lowered for k in keywords):
            aggregation = agg
            break

    comparison = None
    if re.search(r"\byoy\b|year[- ]over[- ]year\b", lowered):
        comparison = Comparison.YOY
    elif re.search(r"\bqoq\b|quarter[- ]over[- ]quarter\b", lowered):
        comparison = Comparison.QOQ

    ticker = None
    for m in _TICKER.finditer(question):
        # "for FY 2025" and friends are period phrases, not ticker symbols
        if m.group(1) not in _TICKER_STOPWORDS:
            ticker = m
            break
    return QueryIntent(
        metrics=tuple(metrics),
        period_filter=period,
        aggregation=aggregation,
        basis_filter=basis,
        status_filter=status,
        company_filter=ticker.group(1) if ticker else None,
        comparison=comparison,
    )


# ---------------------------------------------------------------------------
# SQL generation
# ---------------------------------------------------------------------------

_VALUE_COLUMNS = "value, value_low, value_high, unit, scale_applied"


def _quote(text: str) -> str:
    return "'" + text.replace("'", "''") + "'"


def compile_template(intent: QueryIntent) -> str:
    """Deterministically compile an intent into one SELECT statement.

    Year-unbound single-value intents resolve to the latest period present,
    via ORDER BY + LIMIT with deterministic tie-breaking.
    """
    where: list[str] = []
    if len(intent.metrics) == 1:
        where.append(f"metric = {_quote(intent.metrics[0])}")
    else:
        quoted = ", ".join(_quote(m) for m in intent.metrics)
        where.append(f"metric IN ({quoted})")

    pf = intent.period_filter
    if pf:
        if pf.granularity is not None:
            where.append(f"period_granularity = {_quote(pf.granularity.value)}")
        if pf.year is not None and pf.year_end is not None:
            where.append(f"period_year >= {pf.year}")
            where.append(f"period_year <= {pf.year_end}")
        elif pf.year is not None:
            where.append(f"period_year = {pf.year}")

    if intent.status_filter is StatusFilter.ACTUAL_ONLY:
        where.append("status = 'Actual'")
    elif intent.status_filter is StatusFilter.GUIDANCE_ONLY:
        where.append("status = 'Guidance'")

    if intent.basis_filter is Basis.NON_GAAP:
        where.append("basis = 'NonGAAP'")
    elif intent.basis_filter is Basis.GAAP:
        # Unstated records are treated as GAAP-compliant; only explicit
        # non-GAAP figures are excluded from GAAP-specific queries
        where.append("basis IN ('GAAP', 'Unstated')")

    if intent.company_filter:
        where.append(f"company = {_quote(intent.company_filter)}")

    agg = intent.aggregation
    if agg is Aggregation.COUNT:
        select = "COUNT(*)"
    elif agg in (Aggregation.AVG, Aggregation.SUM, Aggregation.MIN, Aggregation.MAX):
        select = f"{agg.value.upper()}(value)"
    else:
        select = _VALUE_COLUMNS

    sql = f"SELECT {select} FROM kpi WHERE " + " AND ".join(where)
    year_unbound = pf is None or pf.year is None
    if agg in (Aggregation.NONE, Aggregation.LATEST) and \
            (agg is Aggregation.LATEST or year_unbound):
        sql += (" ORDER BY period_year DESC, period_granularity DESC,"
                " value ASC LIMIT 1")
    return sql


_FEW_SHOT = [
    ("What was the Q4 2024 operating margin?",
     "SELECT value, value_low, value_high, unit, scale_applied FROM kpi"
     " WHERE metric = 'operating_margin' AND period_granularity = 'Q4'"
     " AND period_year = 2024 AND status = 'Actual'"),
    ("What is FY 2025 revenue guidance?",
     "SELECT value, value_low, value_high, unit, scale_applied FROM kpi"
     " WHERE metric = 'revenue' AND period_granularity = 'FY'"
     " AND period_year = 2025 AND status = 'Guidance'"),
]


def build_sql_prompt(intent: QueryIntent, card: SchemaCard) -> str:
    lines = [
        "Translate the analyst intent below into one SQL SELECT statement",
        "over the kpi table. Use only the listed columns. Reply with JSON:",
        '{"sql": "..."}',
        "",
        "Schema card:",
        json.dumps(card.to_json(), sort_keys=True),
        "",
        "Examples:",
    ]
    for q, sql in _FEW_SHOT:
        lines += [f"Q: {q}", f"SQL: {sql}"]
    lines += ["", "Intent:", json.dumps({
        "metrics": list(intent.metrics),
        "aggregation": intent.aggregation.value,
        "status_filter": intent.status_filter.value,
        "period": None if not intent.period_filter else {
            "granularity": intent.period_filter.granularity.value
            if intent.period_filter.granularity else None,
            "year": intent.period_filter.year,
        },
    }, sort_keys=True)]
    return "\n".join(lines)


def generate_sql(intent: QueryIntent, card: SchemaCard,
                 backend: CompletionBackend | None = None) -> list[SqlCandidate]:
    """Backend candidates first (when configured), template fallback always
    last; every candidate parses before leaving the generator."""
    candidates: list[SqlCandidate] = []
    if backend is not None:
        try:
            completion = backend.complete(build_sql_prompt(intent, card))
            payload = json.loads(completion)
            sql = payload.get("sql", "")
            parse_select(sql)
            candidates.append(SqlCandidate(sql, intent, GenerationSource.BACKEND))
        except Exception:
            pass  # backend failures degrade to template-only
    template = compile_template(intent)
    parse_select(template)
    candidates.append(SqlCandidate(template, intent, GenerationSource.TEMPLATE))
    return candidates


# ---------------------------------------------------------------------------
# Constraint validation
# ---------------------------------------------------------------------------

_UNIT_BY_COLUMN = {
    "value": "metric", "value_low": "metric", "value_high": "metric",
    "scale_applied": "scalar", "confidence": "scalar", "period_year": "year",
}


def _metric_filter(stmt: SelectStmt) -> list[str]:
    metrics: list[str] = []
    for cond in stmt.conditions_on("metric"):
        if cond.op in ("=", "IN"):
            metrics += [v for v in cond.values if isinstance(v, str)]
    return metrics


def validate_constraints(candidate: SqlCandidate, card: SchemaCard,
                         taxonomy: MetricTaxonomy | None = None) -> ValidationReport:
    """Check syntax, unit consistency, temporal alignment, and qualifier
    accuracy of one SQL candidate against its bound intent."""
    taxonomy = taxonomy or default_taxonomy()
    violations: list[ConstraintViolation] = []
    try:
        stmt = parse_select(candidate.sql)
    except SqlSyntaxError as exc:
        return ValidationReport(False, False, False, False,
                                (ConstraintViolation("syntax", str(exc)),))

    # unit consistency -----------------------------------------------------
    unit_ok = True
    metrics = _metric_filter(stmt)
    classes = {taxonomy.value_class(m) for m in metrics if taxonomy.value_class(m)}
    value_touched = any(
        col in ("value", "value_low", "value_high")
        for item in stmt.items for col in columns_in(item.expr))
    arithmetic = any(binops_in(item.expr) for item in stmt.items)
    aggregated = any(
        agg.name != "COUNT" for item in stmt.items for agg in aggregates_in(item.expr))
    if (arithmetic or aggregated) and value_touched and len(classes) > 1:
        unit_ok = False
        violations.append(ConstraintViolation(
            "unit", "arithmetic over value mixes metrics of different unit classes: "
            + ", ".join(sorted(c.value for c in classes))))
    for item in stmt.items:
        for op in binops_in(item.expr):
            semantics = {_UNIT_BY_COLUMN.get(c, "other")
                         for c in columns_in(op.left) + columns_in(op.right)}
            semantics.discard("scalar")
            if len(semantics) > 1:
                unit_ok = False
                violations.append(ConstraintViolation(
                    "unit", f"arithmetic combines columns of different unit"
                            f" semantics: {sorted(semantics)}"))

    # temporal alignment ---------------------------------------------------
    temporal_ok = True
    years: set[int] = set()
    for cond in stmt.conditions_on("period_year"):
        if cond.op in ("=", "IN"):
            years |= {int(v) for v in cond.values if isinstance(v, Decimal)}
    grans: set[str] = set()
    for cond in stmt.conditions_on("period_granularity"):
        if cond.op in ("=", "IN"):
            grans |= {v for v in cond.values if isinstance(v, str)}
    quarterly = {g for g in grans if g.startswith("Q")}
    annual = grans - quarterly

    if candidate.intent.comparison is Comparison.YOY:
        if len(years) >= 2 and (len(years) != 2 or max(years) - min(years) != 1):
            temporal_ok = False
            violations.append(ConstraintViolation(
                "temporal", f"YoY comparison joins non-adjacent years: {sorted(years)}"))
        if quarterly and annual:
            temporal_ok = False
            violations.append(ConstraintViolation(
                "temporal", "YoY comparison mixes quarterly and annual rows"))
    elif candidate.intent.comparison is Comparison.QOQ:
        if annual:
            temporal_ok = False
            violations.append(ConstraintViolation(
                "temporal", "QoQ comparison must stay on quarterly rows"))
        if len(years) > 2 or (len(years) == 2 and max(years) - min(years) != 1):
            temporal_ok = False
            violations.append(ConstraintViolation(
                "temporal", f"QoQ comparison spans non-adjacent years: {sorted(years)}"))
    pf = candidate.intent.period_filter
    if pf and pf.year is not None and pf.year_end is None and years and \
            years != {pf.year}:
        temporal_ok = False
        violations.append(ConstraintViolation(
            "temporal", f"SQL filters year(s) {sorted(years)} but intent asks {pf.year}"))

    # qualifier accuracy ---------------------------------------------------
    qualifier_ok = True
    statuses: set[str] = set()
    for cond in stmt.conditions_on("status"):
        if cond.op in ("=", "IN"):
            statuses |= {v for v in cond.values if isinstance(v, str)}
    expected = {StatusFilter.ACTUAL_ONLY: {"Actual"},
                StatusFilter.GUIDANCE_ONLY: {"Guidance"}}.get(candidate.intent.status_filter)
    if expected is not None and statuses != expected:
        qualifier_ok = False
        violations.append(ConstraintViolation(
            "qualifier", f"status predicate {sorted(statuses) or 'missing'} does not"
                         f" match intent {candidate.intent.status_filter.value}"))

    return ValidationReport(True, unit_ok, temporal_ok, qualifier_ok,
                            tuple(violations))


# ---------------------------------------------------------------------------
# Execution with feedback, explanation
# ---------------------------------------------------------------------------

def _implausible(result: ResultTable, intent: QueryIntent,
                 taxonomy: MetricTaxonomy) -> bool:
    if result.row_count == 0:
        return True
    classes = {taxonomy.value_class(m) for m in intent.metrics}
    if classes == {ValueClass.PERCENT} and "value" in result.columns:
        idx = result.columns.index("value")
        for row in result.rows:
            v = row[idx]
            if isinstance(v, (Decimal, int, float)) and \
                    not Decimal(-100) <= Decimal(str(v)) <= Decimal(1000):
                return True
    return False


def execute_with_feedback(candidates: list[SqlCandidate], handle: KpiStore,
                          max_retries: int = 2, card: SchemaCard | None = None,
                          taxonomy: MetricTaxonomy | None = None,
                          backend: CompletionBackend | None = None) -> AnswerBundle:
    """Try candidates in order; reject on validation failure, execution
    error, or implausible output. One backend regeneration round after the
    list is exhausted, then the template result stands, empty or not."""
    taxonomy = taxonomy or default_taxonomy()
    card = card or handle.export_schema_card(taxonomy)
    intent = candidates[0].intent

    attempts = 0
    rounds = 0
    pool = list(candidates)
    last: tuple[SqlCandidate, ValidationReport, ResultTable] | None = None
    while True:
        for candidate in pool:
            attempts += 1
            report = validate_constraints(candidate, card, taxonomy)
            if not report.passed:
                last = (candidate, report, ResultTable((), ()))
                continue
            try:
                result = handle.execute_sql(candidate.sql)
            except (SqlSyntaxError, NonSelectRejected, ExecutionError) as exc:
                last = (candidate, report, ResultTable((), ()))
                continue
            last = (candidate, report, result)
            if not _implausible(result, intent, taxonomy):
                explanation = explain(candidate, result, taxonomy)
                return AnswerBundle(question="", candidate=candidate, report=report,
                                    result=result, explanation=explanation,
                                    attempts=attempts)
        rounds += 1
        if backend is None or rounds > max_retries:
            break
        regenerated = generate_sql(intent, card, backend)
        pool = [replace(c, attempt=rounds) for c in regenerated
                if c.generation_source is GenerationSource.BACKEND]
        if not pool:
            break

    # fall back to the template candidate's (possibly empty) result
    template = next((c for c in candidates
                     if c.generation_source is GenerationSource.TEMPLATE), candidates[-1])
    report = validate_constraints(template, card, taxonomy)
    try:
        result = handle.execute_sql(template.sql)
    except (SqlSyntaxError, NonSelectRejected, ExecutionError):
        result = ResultTable((), ())
    return AnswerBundle(question="", candidate=template, report=report,
                        result=result, explanation=explain(template, result, taxonomy),
                        attempts=attempts)


_SCALE_WORDS = {Decimal("1000000000"): "billion", Decimal("1000000"): "million",
                Decimal("1000"): "thousand"}


def _trim(value: Decimal) -> str:
    text = str(value)
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return text or "0"


def format_percent(value: Decimal) -> str:
    text = _trim(value)
    if "." not in text:
        text += ".0"
    return f"{text}%"


def format_usd(value: Decimal, scale: Decimal | None = None) -> str:
    if scale is None or scale not in _SCALE_WORDS and scale != 1:
        scale = next((s for s in sorted(_SCALE_WORDS, reverse=True) if abs(value) >= s),
                     Decimal(1))
    if scale in _SCALE_WORDS:
        return f"${_trim(value / scale)} {_SCALE_WORDS[scale]}"
    return f"${_trim(value)}"


def _format_cell(value, unit: str | None, scale: Decimal | None) -> str:
    dec = Decimal(str(value))
    if unit == "Percent":
        return format_percent(dec)
    if unit == "USD":
        return format_usd(dec, scale)
    return _trim(dec)


def explain(candidate: SqlCandidate, result: ResultTable,
            taxonomy: MetricTaxonomy | None = None) -> str:
    """Deterministic template rendering of the result: metric, period,
    status, aggregation, and the value with units and scale words restored."""
    intent = candidate.intent
    metric_words = " and ".join(m.replace("_", " ") for m in intent.metrics)
    status_word = {StatusFilter.ACTUAL_ONLY: "actual",
                   StatusFilter.GUIDANCE_ONLY: "guidance",
                   StatusFilter.BOTH: "actual or guidance"}[intent.status_filter]
    pf = intent.period_filter
    period_words = ""
    if pf:
        gran = pf.granularity.value if pf.granularity else ""
        year = str(pf.year) if pf.year is not None else ""
        period_words = " ".join(p for p in (gran, year) if p)

    empty_aggregate = result.rows and all(v is None for v in result.rows[0])
    if result.row_count == 0 or empty_aggregate:
        target = " ".join(p for p in (period_words, metric_words) if p)
        return f"No records match {target} with status filter {status_word}."

    if intent.aggregation is Aggregation.COUNT:
        count = result.rows[0][0]
        target = " ".join(p for p in (period_words, metric_words) if p)
        return f"{count} {target} record(s) match ({status_word})."

    cols = result.columns
    row = result.rows[0]

    def col(name):
        return row[cols.index(name)] if name in cols else None

    unit = col("unit")
    scale = col("scale_applied")
    scale = Decimal(str(scale)) if scale is not None else None
    if intent.aggregation in (Aggregation.AVG, Aggregation.SUM,
                              Aggregation.MIN, Aggregation.MAX):
        value = Decimal(str(row[0]))
        classes = {taxonomy.value_class(m) for m in intent.metrics} if taxonomy else set()
        unit = "Percent" if classes == {ValueClass.PERCENT} else \
            ("USD" if classes == {ValueClass.CURRENCY} else None)
        rendered = _format_cell(value, unit, None)
        agg_word = {Aggregation.AVG: "Average", Aggregation.SUM: "Total",
                    Aggregation.MIN: "Minimum", Aggregation.MAX: "Maximum"}[intent.aggregation]
        target = " ".join(p for p in (period_words, metric_words) if p)
        return f"{agg_word} {target} ({status_word}) was {rendered}."

    value = col("value")
    if value is None:
        value = row[0]
    rendered = _format_cell(value, unit, scale)
    sentence_head = " ".join(p for p in (period_words, metric_words) if p)
    sentence = f"{sentence_head} ({status_word}) was {rendered}."
    low, high = col("value_low"), col("value_high")
    if low is not None and high is not None and Decimal(str(low)) < Decimal(str(high)):
        low_r = _format_cell(low, unit, scale)
        high_r = _format_cell(high, unit, scale)
        sentence += f" Range: {low_r} to {high_r}."
    return sentence[0].upper() + sentence[1:]


def answer(question: str, handle: KpiStore,
           taxonomy: MetricTaxonomy | None = None,
           backend: CompletionBackend | None = None,
           max_retries: int = 2) -> AnswerBundle:
    """Full question-to-answer path with an audit-log transcript."""
    taxonomy = taxonomy or default_taxonomy()
    intent = parse_intent(question, taxonomy)
    card = handle.export_schema_card(taxonomy)
    candidates = generate_sql(intent, card, backend)
    bundle = execute_with_feedback(candidates, handle, max_retries=max_retries,
                                   card=card, taxonomy=taxonomy, backend=backend)
    bundle = replace(bundle, question=question)
    audit_id = handle.append_audit({
        "event": "query",
        "question": question,
        "sql": bundle.candidate.sql,
        "attempts": bundle.attempts,
        "row_count": bundle.result.row_count,
        "explanation": bundle.explanation,
    })
    return replace(bundle, audit_id=audit_id)
