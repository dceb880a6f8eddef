"""Hand-written faulty SQL candidates the constraint validator must flag.

Thirty mutations in three families of ten: unit-mixing aggregates and
arithmetic, period-mixing comparisons, and status predicates that contradict
the bound intent. Each entry pairs a plausible-looking SELECT with the intent
it claims to serve.
"""
from __future__ import annotations

from finkpi.query import (Aggregation, Comparison, GenerationSource,
                          PeriodFilter, QueryIntent, SqlCandidate, StatusFilter)
from finkpi.rules import Granularity

_V = "value, value_low, value_high, unit, scale_applied"


def _cand(sql: str, intent: QueryIntent) -> SqlCandidate:
    return SqlCandidate(sql, intent, GenerationSource.BACKEND)


def _intent(metrics, *, agg=Aggregation.NONE, status=StatusFilter.ACTUAL_ONLY,
            comparison=None, gran=None, year=None) -> QueryIntent:
    period = PeriodFilter(granularity=gran, year=year) if gran or year else None
    return QueryIntent(metrics=tuple(metrics), period_filter=period,
                       aggregation=agg, status_filter=status,
                       comparison=comparison)


def _mix(agg: str, a: str, b: str) -> SqlCandidate:
    # aggregating currency and percent rows together is meaningless
    sql = (f"SELECT {agg}(value) FROM kpi WHERE metric IN ('{a}', '{b}')"
           " AND status = 'Actual'")
    return _cand(sql, _intent([a, b], agg=Aggregation[agg]))


def unit_mixing() -> list[SqlCandidate]:
    pairs = [
        ("AVG", "revenue", "operating_margin"),
        ("AVG", "free_cash_flow", "gross_margin"),
        ("AVG", "eps", "operating_margin"),
        ("SUM", "revenue", "gross_margin"),
        ("SUM", "consensus_delta", "operating_margin"),
        ("MIN", "operating_income", "gross_margin"),
        ("MAX", "revenue", "revenue_yoy_growth"),
        ("SUM", "operating_income", "operating_margin"),
    ]
    out = [_mix(agg, a, b) for agg, a, b in pairs]
    out.append(_cand(
        "SELECT value + period_year FROM kpi WHERE metric = 'revenue'"
        " AND status = 'Actual'",
        _intent(["revenue"])))
    out.append(_cand(
        "SELECT value - period_year FROM kpi WHERE metric = 'operating_margin'"
        " AND status = 'Actual'",
        _intent(["operating_margin"])))
    return out


def period_mixing() -> list[SqlCandidate]:
    yoy = dict(comparison=Comparison.YOY)
    qoq = dict(comparison=Comparison.QOQ)
    return [
        # YoY over non-adjacent years
        _cand(f"SELECT {_V} FROM kpi WHERE metric = 'revenue' AND"
              " period_year IN (2022, 2024) AND status = 'Actual'",
              _intent(["revenue"], **yoy)),
        _cand(f"SELECT {_V} FROM kpi WHERE metric = 'operating_margin' AND"
              " period_year IN (2020, 2024) AND status = 'Actual'",
              _intent(["operating_margin"], **yoy)),
        _cand(f"SELECT {_V} FROM kpi WHERE metric = 'eps' AND"
              " period_year IN (2021, 2023) AND status = 'Actual'",
              _intent(["eps"], **yoy)),
        # YoY mixing quarterly and annual rows
        _cand(f"SELECT {_V} FROM kpi WHERE metric = 'revenue' AND"
              " period_granularity IN ('Q4', 'FY') AND status = 'Actual'",
              _intent(["revenue"], **yoy)),
        _cand(f"SELECT {_V} FROM kpi WHERE metric = 'gross_margin' AND"
              " period_granularity IN ('Q1', 'FY') AND status = 'Actual'",
              _intent(["gross_margin"], **yoy)),
        # QoQ on annual rows
        _cand(f"SELECT {_V} FROM kpi WHERE metric = 'revenue' AND"
              " period_granularity = 'FY' AND status = 'Actual'",
              _intent(["revenue"], **qoq)),
        _cand(f"SELECT {_V} FROM kpi WHERE metric = 'operating_margin' AND"
              " period_granularity IN ('FY', 'Q2') AND status = 'Actual'",
              _intent(["operating_margin"], **qoq)),
        _cand(f"SELECT {_V} FROM kpi WHERE metric = 'free_cash_flow' AND"
              " period_year IN (2020, 2024) AND status = 'Actual'",
              _intent(["free_cash_flow"], **qoq)),
        # SQL year contradicts the intent year
        _cand(f"SELECT {_V} FROM kpi WHERE metric = 'revenue' AND"
              " period_granularity = 'Q4' AND period_year = 2023"
              " AND status = 'Actual'",
              _intent(["revenue"], gran=Granularity.Q4, year=2024)),
        _cand(f"SELECT {_V} FROM kpi WHERE metric = 'operating_margin' AND"
              " period_granularity = 'FY' AND period_year = 2024"
              " AND status = 'Guidance'",
              _intent(["operating_margin"], gran=Granularity.FY, year=2025,
                      status=StatusFilter.GUIDANCE_ONLY)),
    ]


def qualifier_mismatch() -> list[SqlCandidate]:
    def q(metric, sql_status, intent_status, gran=None, year=None):
        pred = f"status = '{sql_status}'" if sql_status else ""
        where = [f"metric = '{metric}'"]
        if gran:
            where.append(f"period_granularity = '{gran}'")
        if year:
            where.append(f"period_year = {year}")
        if pred:
            where.append(pred)
        sql = f"SELECT {_V} FROM kpi WHERE " + " AND ".join(where)
        return _cand(sql, _intent([metric], status=intent_status,
                                  gran=Granularity(gran) if gran else None,
                                  year=year))

    return [
        # guidance asked, actuals fetched (and vice versa)
        q("operating_margin", "Actual", StatusFilter.GUIDANCE_ONLY, "FY", 2025),
        q("revenue", "Actual", StatusFilter.GUIDANCE_ONLY, "FY", 2026),
        q("gross_margin", "Actual", StatusFilter.GUIDANCE_ONLY),
        q("operating_margin", "Guidance", StatusFilter.ACTUAL_ONLY, "Q4", 2024),
        q("revenue", "Guidance", StatusFilter.ACTUAL_ONLY, "Q1", 2024),
        q("eps", "Guidance", StatusFilter.ACTUAL_ONLY),
        # status predicate simply missing: guidance rows would leak in
        q("operating_margin", None, StatusFilter.ACTUAL_ONLY, "Q4", 2024),
        q("revenue", None, StatusFilter.ACTUAL_ONLY),
        q("free_cash_flow", None, StatusFilter.GUIDANCE_ONLY, "FY", 2025),
        # over-broad predicate on a guidance-only question
        _cand(f"SELECT {_V} FROM kpi WHERE metric = 'revenue'"
              " AND status IN ('Actual', 'Guidance')",
              _intent(["revenue"], status=StatusFilter.GUIDANCE_ONLY)),
    ]


def all_mutations() -> list[tuple[str, SqlCandidate]]:
    out = [("unit_mixing", c) for c in unit_mixing()]
    out += [("period_mixing", c) for c in period_mixing()]
    out += [("qualifier_mismatch", c) for c in qualifier_mismatch()]
    return out
