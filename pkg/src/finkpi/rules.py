"""Domain rule injection: range midpoints, unit scaling, fiscal period
resolution, and qualifier classification. Each rule is individually
toggleable; disabled rules pass raw values through (deliberately degraded
behavior used by the ablation harness).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import date
from decimal import Decimal
from enum import Enum

from .extraction import FORWARD_CUES, Provenance, RawKpiRecord
from .taxonomy import MetricTaxonomy, ValueClass


class RuleError(Exception):
    pass


class InvalidRange(RuleError):
    pass


class UnitClassConflict(RuleError):
    pass


class UnknownUnitToken(RuleError):
    pass


class Granularity(Enum):
    FY = "FY"
    Q1 = "Q1"
    Q2 = "Q2"
    Q3 = "Q3"
    Q4 = "Q4"
    H1 = "H1"
    H2 = "H2"


class PeriodSource(Enum):
    EXPLICIT = "Explicit"
    RELATIVE_PRIOR = "RelativePrior"
    HEADER_FALLBACK = "HeaderFallback"
    UNRESOLVED = "Unresolved"


class Basis(Enum):
    GAAP = "GAAP"
    NON_GAAP = "NonGAAP"
    UNSTATED = "Unstated"


class Status(Enum):
    ACTUAL = "Actual"
    GUIDANCE = "Guidance"


class Unit(Enum):
    USD = "USD"
    PERCENT = "Percent"
    COUNT = "Count"


@dataclass(frozen=True)
class FiscalPeriod:
    granularity: Granularity
    year: int
    resolved_from: PeriodSource

    @property
    def label(self) -> str:
        if self.granularity is Granularity.FY:
            return f"FY {self.year}"
        return f"{self.granularity.value} {self.year}"


UNRESOLVED_PERIOD = FiscalPeriod(Granularity.FY, 0, PeriodSource.UNRESOLVED)


@dataclass(frozen=True)
class Qualifier:
    basis: Basis
    status: Status


@dataclass(frozen=True)
class KpiRecord:
    metric: str
    value: Decimal  # canonical units; exact midpoint of the bounds
    value_low: Decimal
    value_high: Decimal
    unit: Unit
    scale_applied: Decimal
    period: FiscalPeriod
    qualifier: Qualifier
    confidence: float
    provenance: Provenance
    rules_applied: tuple[str, ...]
    company: str = ""
    published_on: date | None = None
    qualifier_cues: tuple[str, ...] = ()


@dataclass(frozen=True)
class Rejection:
    reason: str
    detail: str
    raw: RawKpiRecord | None = None


@dataclass(frozen=True)
class RuleSet:
    range_midpoint: bool = True
    unit_resolution: bool = True
    period_resolution: bool = True
    qualifier_classification: bool = True

    @classmethod
    def all_on(cls) -> "RuleSet":
        return cls()

    @classmethod
    def all_off(cls) -> "RuleSet":
        return cls(False, False, False, False)

    def with_disabled(self, names: list[str]) -> "RuleSet":
        updates = {}
        for name in names:
            if not hasattr(self, name):
                raise RuleError(f"unknown rule flag: {name}")
            updates[name] = False
        from dataclasses import replace
        return replace(self, **updates)

    def flags(self) -> dict[str, bool]:
        return {
            "range_midpoint": self.range_midpoint,
            "unit_resolution": self.unit_resolution,
            "period_resolution": self.period_resolution,
            "qualifier_classification": self.qualifier_classification,
        }


# ---------------------------------------------------------------------------
# Individual rules
# ---------------------------------------------------------------------------

def normalize_range(low: Decimal, high: Decimal) -> dict:
    """Exact arithmetic midpoint with bounds preserved."""
    if low > high:
        raise InvalidRange(f"range low {low} exceeds high {high}")
    return {"value": (low + high) / 2, "low": low, "high": high}


_SCALE_MAP = {
    "thousand": Decimal("1000"),
    "k": Decimal("1000"),
    "million": Decimal("1000000"),
    "m": Decimal("1000000"),
    "billion": Decimal("1000000000"),
    "b": Decimal("1000000000"),
}


def resolve_unit(face_value: Decimal, unit_token: str, value_class: ValueClass) -> dict:
    """Map a face value and its raw unit token to canonical units."""
    token = unit_token.strip().lower()
    if value_class is ValueClass.PERCENT:
        if token in ("", "%"):
            return {"value": face_value, "unit": Unit.PERCENT, "scale_applied": Decimal(1)}
        if token in _SCALE_MAP:
            raise UnitClassConflict(f"scale word {unit_token!r} on a percent metric")
        raise UnknownUnitToken(unit_token)
    if token == "%":
        raise UnitClassConflict(f"'%' token on {value_class.value} class")
    scale = _SCALE_MAP.get(token, Decimal(1) if token == "" else None)
    if scale is None:
        raise UnknownUnitToken(unit_token)
    unit = Unit.USD if value_class is ValueClass.CURRENCY else Unit.COUNT
    return {"value": face_value * scale, "unit": unit, "scale_applied": scale}


_PERIOD_RE = re.compile(r"^(?:(?P<q>Q[1-4])|(?P<fy>FY)|(?P<h>H[1-2]))\s+(?P<year>\d{4})$")
_YEAR_RE = re.compile(r"^(?:19|20)\d{2}$")
_RELATIVE_RE = re.compile(r"^(?:last|prior) year$", re.IGNORECASE)


def _parse_explicit(phrase: str, source: PeriodSource) -> FiscalPeriod | None:
    phrase = phrase.strip()
    m = _PERIOD_RE.match(phrase)
    if m:
        gran = Granularity(m.group("q") or m.group("h") or "FY")
        return FiscalPeriod(gran, int(m.group("year")), source)
    if _YEAR_RE.match(phrase):
        return FiscalPeriod(Granularity.FY, int(phrase), source)
    return None


def resolve_period(phrase: str, published_on: date, fiscal_year_end_month: int,
                   anchor: str = "", from_header: bool = False) -> FiscalPeriod:
    """Resolve a raw period phrase to a fiscal period.

    Relative phrases ("last year") need an explicit co-mentioned anchor and
    resolve to the anchor's granularity one year earlier. Phrases are taken
    at fiscal face value; fiscal_year_end_month is carried for provenance
    but no calendar conversion is applied.
    """
    phrase = phrase.strip()
    if not phrase:
        return UNRESOLVED_PERIOD
    source = PeriodSource.HEADER_FALLBACK if from_header else PeriodSource.EXPLICIT
    explicit = _parse_explicit(phrase, source)
    if explicit:
        return explicit
    if _RELATIVE_RE.match(phrase):
        base = _parse_explicit(anchor, PeriodSource.RELATIVE_PRIOR) if anchor else None
        if base:
            return FiscalPeriod(base.granularity, base.year - 1, PeriodSource.RELATIVE_PRIOR)
    return UNRESOLVED_PERIOD


def classify_qualifier(cues: list[str] | tuple[str, ...]) -> Qualifier:
    lowered = [c.lower() for c in cues]
    status = Status.GUIDANCE if any(c in lowered for c in FORWARD_CUES) else Status.ACTUAL
    if "non-gaap" in lowered or "adjusted" in lowered:
        basis = Basis.NON_GAAP
    elif "gaap" in lowered:
        basis = Basis.GAAP
    else:
        basis = Basis.UNSTATED
    return Qualifier(basis=basis, status=status)


@dataclass(frozen=True)
class DocMeta:
    company: str
    published_on: date
    fiscal_year_end_month: int


def apply_rules(raw: RawKpiRecord, rules: RuleSet, doc_meta: DocMeta,
                taxonomy: MetricTaxonomy) -> KpiRecord | Rejection:
    """Compose the four rules over a raw record, honoring the rule flags.

    Disabled rules reproduce the degraded no-rules behavior: ranges collapse
    to their low bound, scales stay unapplied, relative periods keep their
    anchor year, and every record is treated as an actual.
    """
    applied: list[str] = []
    entry = taxonomy.entry(raw.metric)
    if entry is None:
        return Rejection("UnknownMetric", raw.metric, raw)

    low, high = raw.value_low, raw.value_high

    if rules.range_midpoint:
        mid = normalize_range(low, high)
        value = mid["value"]
        if low < high:
            applied.append("range_midpoint")
    else:
        value = low
        high = low

    if rules.unit_resolution:
        try:
            resolved = resolve_unit(value, raw.unit_token, entry.value_class)
            low_r = resolve_unit(low, raw.unit_token, entry.value_class)
            high_r = resolve_unit(high, raw.unit_token, entry.value_class)
        except (UnitClassConflict, UnknownUnitToken) as exc:
            return Rejection(type(exc).__name__, str(exc), raw)
        value, unit, scale = resolved["value"], resolved["unit"], resolved["scale_applied"]
        low, high = low_r["value"], high_r["value"]
        applied.append("unit_resolution")
    else:
        unit = {ValueClass.CURRENCY: Unit.USD, ValueClass.PERCENT: Unit.PERCENT,
                ValueClass.COUNT: Unit.COUNT}[entry.value_class]
        scale = Decimal(1)

    if rules.period_resolution:
        period = resolve_period(raw.period_phrase, doc_meta.published_on,
                                doc_meta.fiscal_year_end_month,
                                anchor=raw.anchor_phrase,
                                from_header=raw.period_from_header)
        applied.append("period_resolution")
    else:
        # degraded: relative phrases keep the anchor's year; empty phrases
        # default to the publication fiscal year
        period = _parse_explicit(raw.period_phrase, PeriodSource.EXPLICIT)
        if period is None and raw.anchor_phrase:
            period = _parse_explicit(raw.anchor_phrase, PeriodSource.EXPLICIT)
        if period is None:
            period = FiscalPeriod(Granularity.FY, doc_meta.published_on.year,
                                  PeriodSource.HEADER_FALLBACK)
    if period.resolved_from is PeriodSource.UNRESOLVED:
        return Rejection("UnresolvedPeriod", raw.period_phrase, raw)

    if rules.qualifier_classification:
        qualifier = classify_qualifier(raw.qualifier_cues)
        applied.append("qualifier_classification")
    else:
        qualifier = Qualifier(Basis.UNSTATED, Status.ACTUAL)

    return KpiRecord(
        metric=raw.metric,
        value=value,
        value_low=low,
        value_high=high,
        unit=unit,
        scale_applied=scale,
        period=period,
        qualifier=qualifier,
        confidence=raw.backend_confidence,
        provenance=raw.provenance,
        rules_applied=tuple(applied),
        company=doc_meta.company,
        published_on=doc_meta.published_on,
        qualifier_cues=raw.qualifier_cues,
    )
