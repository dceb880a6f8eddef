"""QA-driven validation: targeted consistency checks, confidence scoring,
and the schema-compliance gate records must pass before persistence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from decimal import Decimal
from enum import Enum

from .ingest import Document, detect_numeric_spans
from .rules import (Basis, FiscalPeriod, Granularity, KpiRecord, PeriodSource,
                    Qualifier, Status, Unit, classify_qualifier)


class CheckKind(Enum):
    VALUE_IN_SOURCE = "ValueInSource"
    PERIOD_CONSISTENT = "PeriodConsistent"
    UNIT_PLAUSIBLE = "UnitPlausible"
    RANGE_MIDPOINT = "RangeMidpoint"
    QUALIFIER_CONSISTENT = "QualifierConsistent"


class Outcome(Enum):
    PASS = "Pass"
    FAIL = "Fail"
    SKIPPED = "Skipped"


class Disposition(Enum):
    ACCEPTED = "Accepted"
    CORRECTED = "Corrected"
    FLAGGED = "Flagged"


@dataclass(frozen=True)
class QACheck:
    check_id: str
    kind: CheckKind
    question: str
    outcome: Outcome


@dataclass(frozen=True)
class FieldDiff:
    field: str
    before: str
    after: str


@dataclass(frozen=True)
class ValidationOutcome:
    checks: tuple[QACheck, ...]
    disposition: Disposition
    corrections: tuple[FieldDiff, ...] = ()
    corrected_record: KpiRecord | None = None

    def fails(self) -> int:
        return sum(1 for c in self.checks if c.outcome is Outcome.FAIL)

    def skips(self) -> int:
        return sum(1 for c in self.checks if c.outcome is Outcome.SKIPPED)


_AUTO_FIXABLE = {CheckKind.RANGE_MIDPOINT}


def _check_value_in_source(record: KpiRecord, doc: Document | None) -> Outcome:
    if doc is None:
        return Outcome.SKIPPED
    section = doc.section(record.provenance.section_id)
    if section is None:
        return Outcome.SKIPPED
    scale = record.scale_applied or Decimal(1)
    want = (record.value_low / scale, record.value_high / scale)
    for span in detect_numeric_spans(section):
        if (span.parsed_low, span.parsed_high) == want:
            return Outcome.PASS
    return Outcome.FAIL


def _check_unit_plausible(record: KpiRecord) -> Outcome:
    if record.unit is Unit.PERCENT:
        if record.metric.endswith("margin"):
            ok = Decimal(-100) <= record.value <= Decimal(100)
        else:
            ok = Decimal(-100) <= record.value <= Decimal(1000)
        return Outcome.PASS if ok else Outcome.FAIL
    if record.unit is Unit.USD and record.metric == "revenue":
        return Outcome.PASS if record.value >= 0 else Outcome.FAIL
    return Outcome.PASS


def _check_period_consistent(record: KpiRecord) -> Outcome:
    if record.published_on is None:
        return Outcome.SKIPPED
    published = record.published_on.year
    if record.qualifier.status is Status.GUIDANCE:
        return Outcome.PASS if record.period.year >= published - 1 else Outcome.FAIL
    return Outcome.PASS if abs(record.period.year - published) <= 2 else Outcome.FAIL


def _check_range_midpoint(record: KpiRecord) -> Outcome:
    if record.value_low == record.value_high:
        return Outcome.PASS  # point value: vacuously at its own midpoint
    exact = (record.value_low + record.value_high) / 2
    return Outcome.PASS if record.value == exact else Outcome.FAIL


def _check_qualifier_consistent(record: KpiRecord) -> Outcome:
    derived = classify_qualifier(record.qualifier_cues)
    return Outcome.PASS if derived.status == record.qualifier.status else Outcome.FAIL


def run_checks(record: KpiRecord, doc: Document | None = None) -> ValidationOutcome:
    """Run all five QA checks; failures are data, not exceptions.

    Only RangeMidpoint failures are auto-corrected (value recomputed as the
    exact mean); anything else flags the record for review.
    """
    results = [
        (CheckKind.VALUE_IN_SOURCE,
         "Does the extracted value appear verbatim in the source section?",
         _check_value_in_source(record, doc)),
        (CheckKind.PERIOD_CONSISTENT,
         "Is the fiscal period plausible relative to the publication date?",
         _check_period_consistent(record)),
        (CheckKind.UNIT_PLAUSIBLE,
         "Is the value within the plausible band for this metric's unit?",
         _check_unit_plausible(record)),
        (CheckKind.RANGE_MIDPOINT,
         "Does the stored value equal the exact midpoint of the range bounds?",
         _check_range_midpoint(record)),
        (CheckKind.QUALIFIER_CONSISTENT,
         "Does the guidance/actual status match the forward-looking cues?",
         _check_qualifier_consistent(record)),
    ]
    checks = tuple(
        QACheck(check_id=f"{record.provenance.section_id}-{kind.value}",
                kind=kind, question=question, outcome=outcome)
        for kind, question, outcome in results)

    failed = [c for c in checks if c.outcome is Outcome.FAIL]
    if not failed:
        return ValidationOutcome(checks=checks, disposition=Disposition.ACCEPTED)
    if all(c.kind in _AUTO_FIXABLE for c in failed):
        exact = (record.value_low + record.value_high) / 2
        corrected = replace(record, value=exact)
        diff = FieldDiff("value", str(record.value), str(exact))
        return ValidationOutcome(checks=checks, disposition=Disposition.CORRECTED,
                                 corrections=(diff,), corrected_record=corrected)
    return ValidationOutcome(checks=checks, disposition=Disposition.FLAGGED)


def score_confidence(record: KpiRecord, outcome: ValidationOutcome) -> Decimal:
    """1.0 minus 0.15 per failed check and 0.05 per skipped check, floored at
    0; corrected records cap at 0.85."""
    score = Decimal("1.0") - Decimal("0.15") * outcome.fails() \
        - Decimal("0.05") * outcome.skips()
    if outcome.disposition is Disposition.CORRECTED:
        score = min(score, Decimal("0.85"))
    return max(score, Decimal(0))


def validate_schema(record: KpiRecord) -> list[str]:
    """Schema-compliance gate: empty list iff every record invariant holds."""
    violations: list[str] = []
    if not isinstance(record.metric, str) or not record.metric:
        violations.append("EmptyMetric")
    if not isinstance(record.unit, Unit):
        violations.append("InvalidUnit")
    if not isinstance(record.period, FiscalPeriod) or \
            not isinstance(record.period.granularity, Granularity):
        violations.append("InvalidPeriod")
        return violations
    if record.period.resolved_from is PeriodSource.UNRESOLVED:
        violations.append("UnresolvedPeriod")
    elif not 1990 <= record.period.year <= 2100:
        violations.append("PeriodYearOutOfRange")
    if not isinstance(record.qualifier, Qualifier) or \
            not isinstance(record.qualifier.basis, Basis) or \
            not isinstance(record.qualifier.status, Status):
        violations.append("InvalidQualifier")
    if record.value_low > record.value_high:
        violations.append("InvertedBounds")
    elif record.value != (record.value_low + record.value_high) / 2:
        violations.append("MidpointMismatch")
    if isinstance(record.unit, Unit) and record.unit is Unit.PERCENT and \
            not Decimal(-100) <= record.value <= Decimal(1000):
        violations.append("PercentOutOfBand")
    if not 0 <= record.confidence <= 1:
        violations.append("ConfidenceOutOfRange")
    return violations


def review_line(record: KpiRecord, outcome: ValidationOutcome) -> str:
    """JSONL line for the human-review file of flagged records."""
    payload = {
        "metric": record.metric,
        "value": str(record.value),
        "unit": record.unit.value,
        "period": record.period.label,
        "status": record.qualifier.status.value,
        "doc_id": record.provenance.doc_id,
        "section_id": record.provenance.section_id,
        "disposition": outcome.disposition.value,
        "checks": [{"kind": c.kind.value, "question": c.question,
                    "outcome": c.outcome.value} for c in outcome.checks],
    }
    return json.dumps(payload, sort_keys=True)
