"""Rule injection: midpoints, unit scaling, period resolution, qualifiers."""
from __future__ import annotations

from datetime import date
from decimal import Decimal

import pytest

from finkpi.extraction import Provenance, RawKpiRecord
from finkpi.rules import (
    Basis,
    DocMeta,
    Granularity,
    InvalidRange,
    KpiRecord,
    PeriodSource,
    Qualifier,
    Rejection,
    RuleError,
    RuleSet,
    Status,
    UNRESOLVED_PERIOD,
    Unit,
    UnitClassConflict,
    UnknownUnitToken,
    apply_rules,
    classify_qualifier,
    normalize_range,
    resolve_period,
    resolve_unit,
)
from finkpi.taxonomy import ValueClass, default_taxonomy

PUB = date(2025, 2, 1)
DM = DocMeta("ACME", PUB, 12)


class TestNormalizeRange:
    def test_golden_22_24(self):
        # exact integral midpoint, no float drift
        out = normalize_range(Decimal(22), Decimal(24))
        assert out["value"] == Decimal(23)
        assert (out["low"], out["high"]) == (Decimal(22), Decimal(24))

    def test_golden_15_17(self):
        out = normalize_range(Decimal(15), Decimal(17))
        assert out["value"] == Decimal("16.0")
        assert str(out["value"]) == "16"

    def test_odd_sum_stays_exact(self):
        out = normalize_range(Decimal(15), Decimal(16))
        assert out["value"] == Decimal("15.5")

    def test_degenerate_range(self):
        assert normalize_range(Decimal("14.6"), Decimal("14.6"))["value"] == Decimal("14.6")

    def test_inverted_range_rejected(self):
        with pytest.raises(InvalidRange):
            normalize_range(Decimal(24), Decimal(22))


class TestResolveUnit:
    @pytest.mark.parametrize("token,scale", [
        ("billion", Decimal(10) ** 9),
        ("million", Decimal(10) ** 6),
        ("thousand", Decimal(10) ** 3),
        ("B", Decimal(10) ** 9),
        ("M", Decimal(10) ** 6),
        ("K", Decimal(10) ** 3),
    ])
    def test_currency_scales(self, token, scale):
        out = resolve_unit(Decimal("4.3"), token, ValueClass.CURRENCY)
        assert out["value"] == Decimal("4.3") * scale
        assert out["scale_applied"] == scale
        assert out["unit"] is Unit.USD

    def test_bare_currency_scale_one(self):
        out = resolve_unit(Decimal(150), "", ValueClass.CURRENCY)
        assert out["value"] == Decimal(150)
        assert out["scale_applied"] == Decimal(1)

    def test_percent_passthrough(self):
        out = resolve_unit(Decimal("14.6"), "%", ValueClass.PERCENT)
        assert out == {"value": Decimal("14.6"), "unit": Unit.PERCENT,
                       "scale_applied": Decimal(1)}

    def test_scale_word_on_percent_conflicts(self):
        with pytest.raises(UnitClassConflict):
            resolve_unit(Decimal(12), "billion", ValueClass.PERCENT)

    def test_percent_token_on_currency_conflicts(self):
        with pytest.raises(UnitClassConflict):
            resolve_unit(Decimal(12), "%", ValueClass.CURRENCY)

    def test_unknown_token(self):
        with pytest.raises(UnknownUnitToken):
            resolve_unit(Decimal(1), "bazillion", ValueClass.CURRENCY)

    def test_exact_decimal_product(self):
        # 2.52 * 1e9 must be exactly 2520000000, not 2519999999.99...
        out = resolve_unit(Decimal("2.52"), "billion", ValueClass.CURRENCY)
        assert out["value"] == Decimal(2_520_000_000)


class TestResolvePeriod:
    def test_quarter_explicit(self):
        p = resolve_period("Q4 2024", PUB, 12)
        assert (p.granularity, p.year) == (Granularity.Q4, 2024)
        assert p.resolved_from is PeriodSource.EXPLICIT
        assert p.label == "Q4 2024"

    def test_fiscal_year_explicit(self):
        p = resolve_period("FY 2025", PUB, 12)
        assert p.label == "FY 2025"

    def test_bare_year_is_fiscal_year(self):
        p = resolve_period("2024", PUB, 12)
        assert (p.granularity, p.year) == (Granularity.FY, 2024)

    def test_relative_with_anchor(self):
        p = resolve_period("last year", PUB, 12, anchor="Q4 2024")
        assert (p.granularity, p.year) == (Granularity.Q4, 2023)
        assert p.resolved_from is PeriodSource.RELATIVE_PRIOR

    def test_relative_without_anchor_unresolved(self):
        assert resolve_period("last year", PUB, 12) == UNRESOLVED_PERIOD

    def test_empty_phrase_unresolved(self):
        assert resolve_period("", PUB, 12) == UNRESOLVED_PERIOD

    def test_header_fallback_source(self):
        p = resolve_period("Q1 2024", PUB, 12, from_header=True)
        assert p.resolved_from is PeriodSource.HEADER_FALLBACK

    def test_gibberish_unresolved(self):
        assert resolve_period("the near future", PUB, 12) == UNRESOLVED_PERIOD


class TestClassifyQualifier:
    def test_default_actual_unstated(self):
        assert classify_qualifier(()) == Qualifier(Basis.UNSTATED, Status.ACTUAL)

    def test_forward_cue_means_guidance(self):
        assert classify_qualifier(("expects",)).status is Status.GUIDANCE

    def test_adjusted_is_non_gaap(self):
        assert classify_qualifier(("adjusted",)).basis is Basis.NON_GAAP

    def test_gaap_cue(self):
        assert classify_qualifier(("GAAP",)).basis is Basis.GAAP

    def test_guidance_and_non_gaap_combine(self):
        q = classify_qualifier(("outlook", "non-GAAP"))
        assert q == Qualifier(Basis.NON_GAAP, Status.GUIDANCE)


def raw(metric="operating_margin", low="15", high="17", unit_token="%",
        phrase="FY 2025", anchor="", cues=("expects",)):
    return RawKpiRecord(
        metric=metric,
        value_low=Decimal(low),
        value_high=Decimal(high),
        unit_token=unit_token,
        period_phrase=phrase,
        anchor_phrase=anchor,
        qualifier_cues=tuple(cues),
        provenance=Provenance("d", "s000", (0, 5)),
    )


class TestApplyRules:
    def test_all_on_guidance_range(self, taxonomy):
        rec = apply_rules(raw(), RuleSet.all_on(), DM, taxonomy)
        assert isinstance(rec, KpiRecord)
        assert rec.value == Decimal(16)
        assert (rec.value_low, rec.value_high) == (Decimal(15), Decimal(17))
        assert rec.unit is Unit.PERCENT
        assert rec.period.label == "FY 2025"
        assert rec.qualifier == Qualifier(Basis.UNSTATED, Status.GUIDANCE)
        assert "range_midpoint" in rec.rules_applied

    def test_all_on_currency_scaling(self, taxonomy):
        rec = apply_rules(raw(metric="revenue", low="2.52", high="2.52",
                              unit_token="billion", phrase="Q4 2024", cues=()),
                          RuleSet.all_on(), DM, taxonomy)
        assert rec.value == Decimal(2_520_000_000)
        assert rec.scale_applied == Decimal(10) ** 9

    def test_unknown_metric_rejected(self, taxonomy):
        out = apply_rules(raw(metric="synergy_index"), RuleSet.all_on(), DM, taxonomy)
        assert isinstance(out, Rejection)
        assert out.reason == "UnknownMetric"

    def test_unit_conflict_rejected(self, taxonomy):
        out = apply_rules(raw(unit_token="billion"), RuleSet.all_on(), DM, taxonomy)
        assert isinstance(out, Rejection)
        assert out.reason == "UnitClassConflict"

    def test_unresolved_period_rejected(self, taxonomy):
        out = apply_rules(raw(phrase=""), RuleSet.all_on(), DM, taxonomy)
        assert isinstance(out, Rejection)
        assert out.reason == "UnresolvedPeriod"

    def test_range_rule_off_uses_low_bound(self, taxonomy):
        rules = RuleSet.all_on().with_disabled(["range_midpoint"])
        rec = apply_rules(raw(), rules, DM, taxonomy)
        assert rec.value == Decimal(15)
        assert rec.value_high == Decimal(15)

    def test_unit_rule_off_keeps_face_value(self, taxonomy):
        rules = RuleSet.all_on().with_disabled(["unit_resolution"])
        rec = apply_rules(raw(metric="revenue", low="2.52", high="2.52",
                              unit_token="billion", phrase="Q4 2024", cues=()),
                          rules, DM, taxonomy)
        assert rec.value == Decimal("2.52")
        assert rec.scale_applied == Decimal(1)

    def test_period_rule_off_keeps_anchor_year(self, taxonomy):
        rules = RuleSet.all_on().with_disabled(["period_resolution"])
        rec = apply_rules(raw(phrase="last year", anchor="Q4 2024", cues=()),
                          rules, DM, taxonomy)
        assert rec.period.label == "Q4 2024"  # not shifted back a year

    def test_period_rule_off_falls_back_to_publication_year(self, taxonomy):
        rules = RuleSet.all_on().with_disabled(["period_resolution"])
        rec = apply_rules(raw(phrase="", cues=()), rules, DM, taxonomy)
        assert rec.period.label == f"FY {PUB.year}"

    def test_qualifier_rule_off_forces_actual(self, taxonomy):
        rules = RuleSet.all_on().with_disabled(["qualifier_classification"])
        rec = apply_rules(raw(), rules, DM, taxonomy)
        assert rec.qualifier.status is Status.ACTUAL

    def test_unknown_flag_name(self):
        with pytest.raises(RuleError):
            RuleSet.all_on().with_disabled(["nonsense_rule"])

    def test_rules_applied_provenance(self, taxonomy):
        rec = apply_rules(raw(), RuleSet.all_on(), DM, taxonomy)
        assert rec.rules_applied == ("range_midpoint", "unit_resolution",
                                     "period_resolution", "qualifier_classification")
