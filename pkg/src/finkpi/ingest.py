"""Corpus ingestion: load filings, segment into sections, detect numeric spans.

Values are parsed at face value here (scale words like "billion" are captured
but not applied); canonicalization happens in the rules engine so this stage
stays loss-free.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from datetime import date
from decimal import Decimal
from enum import Enum
from html.parser import HTMLParser

logger = logging.getLogger(__name__)


class IngestError(Exception):
    pass


class DecodeError(IngestError):
    pass


class EmptyDocument(IngestError):
    pass


class SourceKind(Enum):
    TEN_K = "TenK"
    TEN_Q = "TenQ"
    EIGHT_K = "EightK"
    EARNINGS_RELEASE = "EarningsRelease"
    TRANSCRIPT = "Transcript"


class SectionKind(Enum):
    NARRATIVE = "Narrative"
    TABLE = "Table"
    HEADER = "Header"
    BOILERPLATE = "Boilerplate"


class SpanKind(Enum):
    SCALAR = "Scalar"
    RANGE = "Range"
    PERCENT = "Percent"
    PERCENT_RANGE = "PercentRange"
    CURRENCY = "Currency"
    CURRENCY_RANGE = "CurrencyRange"


class InputFormat(Enum):
    PLAIN_TEXT = "PlainText"
    HTML = "Html"


@dataclass(frozen=True)
class Section:
    section_id: str
    title: str
    body: str
    char_range: tuple[int, int]  # half-open offsets into Document.raw_text
    kind: SectionKind


@dataclass(frozen=True)
class NumericSpan:
    span_id: str
    section_id: str
    char_range: tuple[int, int]  # half-open offsets into Section.body
    surface: str
    kind: SpanKind
    parsed_low: Decimal
    parsed_high: Decimal
    unit_token: str


@dataclass(frozen=True)
class DocumentMeta:
    doc_id: str
    source_kind: SourceKind
    company: str
    published_on: date
    fiscal_year_end_month: int

    def __post_init__(self):
        if not 1 <= self.fiscal_year_end_month <= 12:
            raise ValueError("fiscal_year_end_month must be in [1, 12]")

    @classmethod
    def from_json(cls, payload: dict) -> "DocumentMeta":
        return cls(
            doc_id=payload["doc_id"],
            source_kind=SourceKind(payload["source_kind"]),
            company=payload["company"],
            published_on=date.fromisoformat(payload["published_on"]),
            fiscal_year_end_month=int(payload["fiscal_year_end_month"]),
        )

    def to_json(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "source_kind": self.source_kind.value,
            "company": self.company,
            "published_on": self.published_on.isoformat(),
            "fiscal_year_end_month": self.fiscal_year_end_month,
        }


@dataclass(frozen=True)
class Document:
    doc_id: str
    source_kind: SourceKind
    company: str
    published_on: date
    fiscal_year_end_month: int
    raw_text: str
    sections: tuple[Section, ...]

    @property
    def meta(self) -> DocumentMeta:
        return DocumentMeta(self.doc_id, self.source_kind, self.company,
                            self.published_on, self.fiscal_year_end_month)

    def section(self, section_id: str) -> Section | None:
        for sec in self.sections:
            if sec.section_id == section_id:
                return sec
        return None

    def to_json(self) -> dict:
        return {
            **self.meta.to_json(),
            "raw_text": self.raw_text,
            "sections": [
                {
                    "section_id": s.section_id,
                    "title": s.title,
                    "body": s.body,
                    "char_range": list(s.char_range),
                    "kind": s.kind.value,
                }
                for s in self.sections
            ],
        }

    @classmethod
    def from_json(cls, payload: dict) -> "Document":
        meta = DocumentMeta.from_json(payload)
        sections = tuple(
            Section(
                section_id=s["section_id"],
                title=s["title"],
                body=s["body"],
                char_range=tuple(s["char_range"]),
                kind=SectionKind(s["kind"]),
            )
            for s in payload["sections"]
        )
        return cls(meta.doc_id, meta.source_kind, meta.company, meta.published_on,
                   meta.fiscal_year_end_month, payload["raw_text"], sections)


@dataclass(frozen=True)
class FormatHint:
    """Markup cue carried from the HTML stripper into segmentation."""
    char_range: tuple[int, int]
    kind: SectionKind


# ---------------------------------------------------------------------------
# HTML stripping
# ---------------------------------------------------------------------------

_BLOCK_TAGS = {"p", "div", "table", "h1", "h2", "h3", "h4", "h5", "h6", "li", "section"}


class _TextExtractor(HTMLParser):
    """Strips tags; table cells become tab-separated, rows newline-separated.

    Table output regions are reported as FormatHints so single-row HTML
    tables still segment as Table sections.
    """

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self.length = 0
        self.hints: list[FormatHint] = []
        self._table_start: int | None = None
        self._row_has_cells = False
        self._skip_depth = 0

    def _emit(self, text: str):
        if not text:
            return
        self.parts.append(text)
        self.length += len(text)

    def _break_block(self):
        joined_tail = "".join(self.parts[-2:])
        if self.length and not joined_tail.endswith("\n\n"):
            self._emit("\n" if joined_tail.endswith("\n") else "\n\n")

    def handle_starttag(self, tag, attrs):
        if tag in ("script", "style"):
            self._skip_depth += 1
            return
        if tag in _BLOCK_TAGS:
            self._break_block()
        if tag == "table":
            self._table_start = self.length
        elif tag == "tr":
            self._row_has_cells = False
        elif tag in ("td", "th"):
            if self._row_has_cells:
                self._emit("\t")
            self._row_has_cells = True
        elif tag == "br":
            self._emit("\n")

    def handle_endtag(self, tag):
        if tag in ("script", "style"):
            self._skip_depth = max(0, self._skip_depth - 1)
            return
        if tag == "tr":
            if not "".join(self.parts[-1:]).endswith("\n"):
                self._emit("\n")
        elif tag == "table":
            if self._table_start is not None and self.length > self._table_start:
                self.hints.append(FormatHint((self._table_start, self.length),
                                             SectionKind.TABLE))
            self._table_start = None
            self._break_block()
        elif tag in _BLOCK_TAGS:
            self._break_block()

    def handle_data(self, data):
        if self._skip_depth:
            return
        self._emit(data)

    def result(self) -> tuple[str, list[FormatHint]]:
        text = "".join(self.parts)
        return text, self.hints


def strip_html(markup: str) -> tuple[str, list[FormatHint]]:
    parser = _TextExtractor()
    parser.feed(markup)
    parser.close()
    text, hints = parser.result()
    # trim leading/trailing whitespace, shifting hints with the cut
    lead = len(text) - len(text.lstrip())
    text = text.strip()
    shifted = []
    for h in hints:
        start = max(0, h.char_range[0] - lead)
        end = min(len(text), h.char_range[1] - lead)
        if end > start:
            shifted.append(FormatHint((start, end), h.kind))
    return text, shifted


# ---------------------------------------------------------------------------
# Section segmentation
# ---------------------------------------------------------------------------

_HEADER_MAX_LEN = 80


def _is_header_line(line: str) -> bool:
    stripped = line.strip()
    if not stripped or len(stripped) > _HEADER_MAX_LEN:
        return False
    if "\t" in stripped or stripped.endswith((".", ":", ";")):
        return False
    words = stripped.split()
    if stripped.upper() == stripped and any(c.isalpha() for c in stripped):
        return True
    # title case: every word capitalized, no digits-only lines
    return all(w[0].isupper() for w in words if w[0].isalpha()) and \
        any(c.isalpha() for c in stripped) and len(words) <= 8


def _is_table_block(lines: list[str]) -> bool:
    # >=2 delimited columns on >=2 consecutive lines
    delimited = [ln for ln in lines if len(re.split(r"\t|\s{2,}", ln.strip())) >= 2]
    return len(lines) >= 2 and len(delimited) >= 2


def segment_sections(raw_text: str, format_hints: list[FormatHint] | None = None) -> list[Section]:
    """Segment normalized text into Header/Narrative/Table sections.

    Sections tile raw_text completely: each section's range runs to the
    start of the next (trailing separator whitespace belongs to the
    preceding section).
    """
    if not raw_text.strip():
        raise ValueError("segment_sections requires non-empty text")

    hints = sorted(format_hints or [], key=lambda h: h.char_range)

    # candidate boundaries: block starts at blank-line runs, plus hint edges
    starts: list[tuple[int, SectionKind | None]] = [(0, None)]
    for m in re.finditer(r"\n{2,}", raw_text):
        starts.append((m.end(), None))
    for h in hints:
        starts.append((h.char_range[0], h.kind))
        starts.append((h.char_range[1], None))
    seen: dict[int, SectionKind | None] = {}
    for pos, kind in sorted(starts):
        if pos >= len(raw_text):
            continue
        if pos not in seen or kind is not None:
            seen[pos] = kind
    boundaries = sorted(seen.items())

    blocks: list[tuple[int, int, SectionKind | None]] = []
    for i, (pos, kind) in enumerate(boundaries):
        end = boundaries[i + 1][0] if i + 1 < len(boundaries) else len(raw_text)
        if raw_text[pos:end].strip():
            blocks.append((pos, end, kind))
        elif blocks:
            # pure-whitespace block folds onto the previous section
            p, _, k = blocks[-1]
            blocks[-1] = (p, end, k)

    sections: list[Section] = []

    def add(start: int, end: int, kind: SectionKind, title: str = ""):
        body = raw_text[start:end]
        sections.append(Section(
            section_id=f"s{len(sections):03d}",
            title=title,
            body=body,
            char_range=(start, end),
            kind=kind,
        ))

    for start, end, hinted in blocks:
        text = raw_text[start:end]
        if hinted is SectionKind.TABLE:
            add(start, end, SectionKind.TABLE)
            continue
        lines = text.strip("\n").split("\n")
        if _is_table_block(lines):
            add(start, end, SectionKind.TABLE)
            continue
        # a header line followed by body text splits into Header + Narrative
        first_nl = text.find("\n")
        first_line = text[:first_nl] if first_nl != -1 else text
        rest = text[first_nl + 1:] if first_nl != -1 else ""
        if rest.strip() and _is_header_line(first_line):
            add(start, start + first_nl + 1, SectionKind.HEADER, first_line.strip())
            add(start + first_nl + 1, end, SectionKind.NARRATIVE)
        elif not rest.strip() and _is_header_line(first_line) and blocks[-1] != (start, end, hinted):
            add(start, end, SectionKind.HEADER, first_line.strip())
        else:
            add(start, end, SectionKind.NARRATIVE)
    return sections


# ---------------------------------------------------------------------------
# Numeric span detection
# ---------------------------------------------------------------------------

_NUM = r"\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:\.\d+)?"
_SCALE_WORDS = r"thousand|million|billion"

NUMERIC_PATTERN = re.compile(
    rf"(?<![\w.$%])"
    rf"(?P<cur>\$)?(?P<low>{_NUM})"
    rf"(?:\s*(?:–|—|\-|to)\s*(?P<cur2>\$)?(?P<high>{_NUM}))?"
    rf"(?P<pct>\s?%)?"
    rf"(?:[ \t]+(?P<scale>{_SCALE_WORDS})\b|(?P<suffix>[KMB])\b)?"
    rf"(?!\.\d)"  # version/section numbers like 4.2.1 are not values
)


def _to_decimal(token: str) -> Decimal:
    return Decimal(token.replace(",", ""))


def detect_numeric_spans(section: Section) -> list[NumericSpan]:
    """Find every maximal token matching the numeric grammar in a section body.

    Face values only; scale words are captured in unit_token, never applied.
    """
    if section.kind is SectionKind.HEADER:
        raise ValueError("numeric spans are not detected in header sections")

    spans: list[NumericSpan] = []
    for m in NUMERIC_PATTERN.finditer(section.body):
        if not m.group("low"):
            continue
        currency = bool(m.group("cur") or m.group("cur2"))
        percent = bool(m.group("pct"))
        if currency and percent:
            logger.debug("skipping conflicting currency+percent token %r", m.group(0))
            continue
        low = _to_decimal(m.group("low"))
        high = _to_decimal(m.group("high")) if m.group("high") else low
        if high < low:
            logger.debug("skipping descending range %r", m.group(0))
            continue
        is_range = low < high
        if percent:
            kind = SpanKind.PERCENT_RANGE if is_range else SpanKind.PERCENT
            unit_token = "%"
        elif currency:
            kind = SpanKind.CURRENCY_RANGE if is_range else SpanKind.CURRENCY
            unit_token = m.group("scale") or m.group("suffix") or ""
        else:
            kind = SpanKind.RANGE if is_range else SpanKind.SCALAR
            unit_token = m.group("scale") or m.group("suffix") or ""
        surface = m.group(0)
        spans.append(NumericSpan(
            span_id=f"{section.section_id}-n{len(spans):03d}",
            section_id=section.section_id,
            char_range=(m.start(), m.end()),
            surface=surface,
            kind=kind,
            parsed_low=low,
            parsed_high=high,
            unit_token=unit_token,
        ))
    return spans


# ---------------------------------------------------------------------------
# Document loading
# ---------------------------------------------------------------------------

def normalize_text(text: str) -> str:
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    text = "\n".join(line.rstrip() for line in text.split("\n"))
    text = re.sub(r"\n{3,}", "\n\n", text)
    return text.strip()


def load_document(data: bytes, format: InputFormat, meta: DocumentMeta) -> Document:
    """Decode, normalize, and segment a raw filing into a Document."""
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DecodeError(f"input is not valid UTF-8: {exc}") from exc

    hints: list[FormatHint] = []
    if format is InputFormat.HTML:
        text, hints = strip_html(text)
    else:
        text = normalize_text(text)

    if not text.strip():
        raise EmptyDocument(f"document {meta.doc_id} has no non-whitespace content")

    sections = segment_sections(text, hints)
    return Document(
        doc_id=meta.doc_id,
        source_kind=meta.source_kind,
        company=meta.company,
        published_on=meta.published_on,
        fiscal_year_end_month=meta.fiscal_year_end_month,
        raw_text=text,
        sections=tuple(sections),
    )


def load_document_file(text_path, meta_path=None, format: InputFormat | None = None) -> Document:
    """Load a .txt/.html file with its JSON metadata sidecar (<name>.meta.json)."""
    from pathlib import Path

    text_path = Path(text_path)
    if meta_path is None:
        meta_path = text_path.with_suffix(text_path.suffix + ".meta.json")
    meta = DocumentMeta.from_json(json.loads(Path(meta_path).read_text()))
    if format is None:
        format = InputFormat.HTML if text_path.suffix.lower() in (".html", ".htm") \
            else InputFormat.PLAIN_TEXT
    return load_document(text_path.read_bytes(), format, meta)
