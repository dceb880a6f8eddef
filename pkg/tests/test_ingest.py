"""Document loading, HTML stripping, section segmentation, numeric spans."""
from __future__ import annotations

from datetime import date
from decimal import Decimal

import pytest

from finkpi.ingest import (
    DecodeError,
    DocumentMeta,
    EmptyDocument,
    InputFormat,
    NumericSpan,
    SectionKind,
    SourceKind,
    SpanKind,
    detect_numeric_spans,
    load_document,
    segment_sections,
    strip_html,
)

from .conftest import GROWTH_TEXT, MARGIN_TEXT, make_doc


def spans_of(text: str) -> list[NumericSpan]:
    doc = make_doc(text)
    out = []
    for section in doc.sections:
        out.extend(detect_numeric_spans(section))
    return out


class TestLoadDocument:
    def test_empty_payload_rejected(self):
        meta = DocumentMeta("d", SourceKind.EARNINGS_RELEASE, "ACME",
                            date(2025, 1, 1), 12)
        with pytest.raises(EmptyDocument):
            load_document(b"   \n\n  ", InputFormat.PLAIN_TEXT, meta)

    def test_bad_utf8_rejected(self):
        meta = DocumentMeta("d", SourceKind.EARNINGS_RELEASE, "ACME",
                            date(2025, 1, 1), 12)
        with pytest.raises(DecodeError):
            load_document(b"\xff\xfe\x00nonsense", InputFormat.PLAIN_TEXT, meta)

    def test_round_trip_json(self, margin_doc):
        from finkpi.ingest import Document
        again = Document.from_json(margin_doc.to_json())
        assert again == margin_doc


class TestStripHtml:
    def test_tags_removed_entities_decoded(self):
        text, hints = strip_html("<p>Revenue &amp; margin grew</p>")
        assert "Revenue & margin grew" in text
        assert "<p>" not in text

    def test_table_cells_become_tab_delimited(self):
        markup = ("<table><tr><td>Metric</td><td>Q1</td></tr>"
                  "<tr><td>Revenue</td><td>$4.3 billion</td></tr></table>")
        text, hints = strip_html(markup)
        assert "Metric\tQ1" in text
        assert "Revenue\t$4.3 billion" in text
        assert len(hints) == 1  # one table region hint


class TestSegmentation:
    def test_sections_tile_raw_text(self, margin_doc):
        # every character belongs to exactly one section
        covered = sorted(s.char_range for s in margin_doc.sections)
        assert covered[0][0] == 0
        assert covered[-1][1] == len(margin_doc.raw_text)
        for (_, prev_end), (start, _) in zip(covered, covered[1:]):
            assert start == prev_end

    def test_header_detected(self):
        doc = make_doc("FOURTH QUARTER RESULTS\n\n" + MARGIN_TEXT)
        kinds = [s.kind for s in doc.sections]
        assert SectionKind.HEADER in kinds
        assert SectionKind.NARRATIVE in kinds

    def test_table_block_detected(self):
        body = "Metric\tQ4 2024\nRevenue\t$2.52 billion\nMargin\t14.6%"
        sections = segment_sections(body, ())
        assert any(s.kind is SectionKind.TABLE for s in sections)

    def test_single_narrative_for_plain_paragraph(self, growth_doc):
        assert [s.kind for s in growth_doc.sections] == [SectionKind.NARRATIVE]


class TestNumericSpans:
    def test_percent_scalar(self):
        (span,) = [s for s in spans_of("Margin was 14.6% overall.")
                   if s.kind is SpanKind.PERCENT]
        assert span.parsed_low == Decimal("14.6")
        assert span.parsed_high == Decimal("14.6")
        assert span.surface == "14.6%"

    def test_percent_range_en_dash(self):
        (span,) = [s for s in spans_of("Guidance of 15–17% next year.")
                   if s.kind is SpanKind.PERCENT_RANGE]
        assert (span.parsed_low, span.parsed_high) == (Decimal(15), Decimal(17))

    def test_percent_range_to_keyword(self):
        (span,) = [s for s in spans_of("margin of 22 to 24% expected")
                   if s.kind is SpanKind.PERCENT_RANGE]
        assert (span.parsed_low, span.parsed_high) == (Decimal(22), Decimal(24))

    def test_currency_with_scale_word(self):
        (span,) = [s for s in spans_of("Revenue of $4.3 billion.")
                   if s.kind is SpanKind.CURRENCY]
        assert span.parsed_low == Decimal("4.3")
        assert span.unit_token == "billion"

    def test_currency_suffix_letter(self):
        (span,) = [s for s in spans_of("FCF came in at $150M for the quarter.")
                   if s.kind is SpanKind.CURRENCY]
        assert span.parsed_low == Decimal(150)
        assert span.unit_token == "M"

    def test_face_values_not_prescaled(self):
        # spans carry surface magnitudes; scaling is the rules engine's job
        spans = spans_of(GROWTH_TEXT)
        values = {s.parsed_low for s in spans}
        assert Decimal("4.3") in values
        assert Decimal(150) in values
        assert Decimal(4_300_000_000) not in values

    def test_year_detected_as_scalar(self):
        spans = spans_of("Results for 2024 were strong.")
        assert [s.kind for s in spans] == [SpanKind.SCALAR]
        assert spans[0].surface == "2024"

    def test_decimal_inside_word_not_matched(self):
        assert spans_of("See section 4.2.1 for details.") == []

    def test_thousands_separator(self):
        (span,) = [s for s in spans_of("Headcount rose to 12,500 people.")
                   if s.kind is SpanKind.SCALAR]
        assert span.parsed_low == Decimal(12500)

    def test_margin_fixture_span_inventory(self):
        spans = spans_of(MARGIN_TEXT)
        kinds = sorted(s.kind.value for s in spans)
        by_kind = {k: sum(1 for s in spans if s.kind.value == k) for k in set(kinds)}
        assert by_kind["Percent"] == 3          # 14.6, 14.4, 15.2
        assert by_kind["PercentRange"] == 1     # 15-17
        assert by_kind["Currency"] == 1         # $2.52 billion
        assert by_kind["Scalar"] == 2           # bare years 2024, 2025

    def test_char_ranges_point_at_surface(self):
        for span in spans_of(MARGIN_TEXT):
            lo, hi = span.char_range
            assert MARGIN_TEXT[lo:hi].startswith(span.surface.split()[0])
