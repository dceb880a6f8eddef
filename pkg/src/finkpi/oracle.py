"""Independent brute-force evaluation of query intents over in-memory
records. Deliberately shares no code with the SQL path; it is the oracle the
pipeline's answers are checked against.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal

from .query import Aggregation, QueryIntent, StatusFilter
from .rules import Basis, KpiRecord, Status


@dataclass(frozen=True)
class OracleAnswer:
    values: tuple[Decimal, ...]  # numeric result; single element for aggregates

    @property
    def empty(self) -> bool:
        return not self.values


def _matches(record: KpiRecord, intent: QueryIntent) -> bool:
    if record.metric not in intent.metrics:
        return False
    pf = intent.period_filter
    if pf is not None:
        if pf.granularity is not None and record.period.granularity is not pf.granularity:
            return False
        if pf.year is not None and pf.year_end is not None:
            if not pf.year <= record.period.year <= pf.year_end:
                return False
        elif pf.year is not None and record.period.year != pf.year:
            return False
    if intent.status_filter is StatusFilter.ACTUAL_ONLY and \
            record.qualifier.status is not Status.ACTUAL:
        return False
    if intent.status_filter is StatusFilter.GUIDANCE_ONLY and \
            record.qualifier.status is not Status.GUIDANCE:
        return False
    if intent.basis_filter is Basis.NON_GAAP and record.qualifier.basis is not Basis.NON_GAAP:
        return False
    if intent.basis_filter is Basis.GAAP and record.qualifier.basis is Basis.NON_GAAP:
        return False
    if intent.company_filter and record.company != intent.company_filter:
        return False
    return True


def evaluate_intent(records: list[KpiRecord], intent: QueryIntent) -> OracleAnswer:
    """Filter + aggregate directly over records, mirroring the template
    semantics: year-unbound single-value intents take the latest period
    (year desc, then granularity label desc, then smallest value)."""
    matched = [r for r in records if _matches(r, intent)]
    agg = intent.aggregation

    if agg is Aggregation.COUNT:
        return OracleAnswer((Decimal(len(matched)),))
    if not matched:
        return OracleAnswer(())
    values = [r.value for r in matched]
    if agg is Aggregation.SUM:
        return OracleAnswer((sum(values, Decimal(0)),))
    if agg is Aggregation.AVG:
        return OracleAnswer((sum(values, Decimal(0)) / len(values),))
    if agg is Aggregation.MIN:
        return OracleAnswer((min(values),))
    if agg is Aggregation.MAX:
        return OracleAnswer((max(values),))

    pf = intent.period_filter
    year_unbound = pf is None or pf.year is None
    if agg is Aggregation.LATEST or year_unbound:
        chosen = sorted(
            matched,
            key=lambda r: (-r.period.year,
                           tuple(-ord(c) for c in r.period.granularity.value),
                           r.value))[0]
        return OracleAnswer((chosen.value,))
    return OracleAnswer(tuple(sorted(values)))
