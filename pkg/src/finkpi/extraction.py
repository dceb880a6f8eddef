"""Extraction agent: candidate KPI detection, context extraction, prompt
construction, and structuring of backend completions into raw KPI records.

Every emitted record is grounded: its value pair must equal the parsed pair
of some numeric span in the source section, otherwise it is dropped.
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation

from .backends import CompletionBackend
from .ingest import Document, NumericSpan, Section, SectionKind, SpanKind, detect_numeric_spans
from .taxonomy import MetricTaxonomy, ValueClass

logger = logging.getLogger(__name__)

TEXT_BEGIN = "=== TEXT ===\n"
TEXT_END = "\n=== END TEXT ==="

DEFAULT_SCHEMA_FIELDS = ("metric", "value", "unit", "period", "qualifier")

FORWARD_CUES = ("expects", "expected", "guidance", "outlook", "will be")
QUALIFIER_CUES = FORWARD_CUES + ("adjusted", "non-GAAP", "GAAP", "approximately")

_EXPLICIT_PERIOD = re.compile(r"\b(?:Q[1-4]|FY|H[1-2])\s+(?:19|20)\d{2}\b")
_RELATIVE_PERIOD = re.compile(r"\b(?:last year|prior year)\b", re.IGNORECASE)
_BARE_YEAR = re.compile(r"\b(?:19|20)\d{2}\b")
_SENTENCE_BREAK = re.compile(r"(?<=[.!?])\s+|\n+")


class MalformedCompletion(Exception):
    pass


@dataclass(frozen=True)
class Provenance:
    doc_id: str
    section_id: str
    char_range: tuple[int, int]


@dataclass(frozen=True)
class ContextualSpan:
    numeric: NumericSpan
    alias: str
    canonical: str
    sentence: str
    sentence_range: tuple[int, int]
    period_phrase: str = ""
    anchor_phrase: str = ""
    period_from_header: bool = False
    qualifier_cues: tuple[str, ...] = ()
    doc_id: str = ""
    section_id: str = ""


@dataclass(frozen=True)
class RawKpiRecord:
    metric: str
    value_low: Decimal
    value_high: Decimal
    unit_token: str
    period_phrase: str
    qualifier_cues: tuple[str, ...]
    provenance: Provenance
    backend_confidence: float = 1.0
    anchor_phrase: str = ""
    period_from_header: bool = False


@dataclass
class SectionFailure:
    section_id: str
    reason: str


@dataclass
class ExtractionResult:
    records: list[RawKpiRecord]
    failures: list[SectionFailure] = field(default_factory=list)


def sentence_spans(body: str) -> list[tuple[int, int]]:
    spans = []
    start = 0
    for m in _SENTENCE_BREAK.finditer(body):
        if body[start:m.start()].strip():
            spans.append((start, m.start()))
        start = m.end()
    if body[start:].strip():
        spans.append((start, len(body)))
    return spans


def _interval_distance(a: tuple[int, int], b: tuple[int, int]) -> int:
    if a[1] <= b[0]:
        return b[0] - a[1]
    if b[1] <= a[0]:
        return a[0] - b[1]
    return 0


def _alias_occurrences(text: str, taxonomy: MetricTaxonomy) -> list[tuple[int, int, str, str]]:
    """Non-overlapping alias matches, longest alias winning on overlap."""
    claimed: list[tuple[int, int]] = []
    hits: list[tuple[int, int, str, str]] = []
    for alias, canonical in taxonomy.aliases_sorted():
        pattern = re.compile(rf"\b{re.escape(alias)}\b", re.IGNORECASE)
        for m in pattern.finditer(text):
            if any(_interval_distance((m.start(), m.end()), c) == 0 for c in claimed):
                continue
            claimed.append((m.start(), m.end()))
            hits.append((m.start(), m.end(), m.group(0), canonical))
    hits.sort()
    return hits


def _is_bare_year(span: NumericSpan) -> bool:
    # bare 4-digit years are period vocabulary, not KPI values
    return span.kind is SpanKind.SCALAR and span.unit_token == "" and \
        bool(re.fullmatch(r"(?:19|20)\d{2}", span.surface))


def detect_candidates(section: Section, taxonomy: MetricTaxonomy,
                      spans: list[NumericSpan] | None = None) -> list[ContextualSpan]:
    """Pair each numeric span with the nearest taxonomy alias in its sentence.

    Spans with no in-sentence alias are dropped; a growth percent sitting on
    a currency metric's alias resolves to the derived growth metric.
    """
    if section.kind is SectionKind.HEADER:
        return []
    if spans is None:
        spans = detect_numeric_spans(section)
    aliases = _alias_occurrences(section.body, taxonomy)
    sentences = sentence_spans(section.body)

    out: list[ContextualSpan] = []
    for span in spans:
        if _is_bare_year(span):
            continue
        sentence = next((s for s in sentences
                         if s[0] <= span.char_range[0] < s[1]), None)
        if sentence is None:
            continue
        in_sentence = [a for a in aliases if a[0] >= sentence[0] and a[1] <= sentence[1]]
        if not in_sentence:
            continue
        # Metric mentions precede their values in earnings prose ("revenue
        # grew to $4.3 billion"), so a preceding alias outranks a nearer
        # following one; trailing aliases are only a fallback.
        preceding = [a for a in in_sentence if a[1] <= span.char_range[0]]
        pool = preceding or in_sentence
        best = min(pool,
                   key=lambda a: (_interval_distance(span.char_range, (a[0], a[1])), a[0]))
        canonical = best[3]
        if span.kind in (SpanKind.PERCENT, SpanKind.PERCENT_RANGE) and \
                taxonomy.value_class(canonical) is ValueClass.CURRENCY:
            growth = taxonomy.growth_variant(canonical)
            if growth:
                canonical = growth
        out.append(ContextualSpan(
            numeric=span,
            alias=best[2],
            canonical=canonical,
            sentence=section.body[sentence[0]:sentence[1]],
            sentence_range=sentence,
            section_id=section.section_id,
        ))
    return out


def extract_context(span: ContextualSpan) -> ContextualSpan:
    """Fill period phrase (nearest period token to the number) and qualifier
    cues from the containing sentence."""
    base = span.sentence_range[0]
    tokens: list[tuple[int, int, str, bool]] = []  # (start, end, text, is_relative)
    for m in _EXPLICIT_PERIOD.finditer(span.sentence):
        tokens.append((base + m.start(), base + m.end(), m.group(0), False))
    for m in _RELATIVE_PERIOD.finditer(span.sentence):
        tokens.append((base + m.start(), base + m.end(), m.group(0), True))
    claimed = [(t[0], t[1]) for t in tokens]
    for m in _BARE_YEAR.finditer(span.sentence):
        rng = (base + m.start(), base + m.end())
        if not any(_interval_distance(rng, c) == 0 for c in claimed):
            tokens.append((rng[0], rng[1], m.group(0), False))

    period_phrase, anchor_phrase = "", ""
    if tokens:
        nearest = min(tokens, key=lambda t: (_interval_distance(span.numeric.char_range,
                                                                (t[0], t[1])), t[0]))
        period_phrase = nearest[2]
        if nearest[3]:
            explicit = [t for t in tokens if not t[3]]
            if explicit:
                anchor = min(explicit,
                             key=lambda t: (_interval_distance(span.numeric.char_range,
                                                               (t[0], t[1])), t[0]))
                anchor_phrase = anchor[2]

    cues: list[str] = []
    cue_claimed: list[tuple[int, int]] = []
    for cue in QUALIFIER_CUES:
        flags = 0 if "GAAP" in cue else re.IGNORECASE
        for m in re.finditer(rf"\b{re.escape(cue)}\b", span.sentence, flags):
            rng = (m.start(), m.end())
            if any(_interval_distance(rng, c) == 0 for c in cue_claimed):
                continue
            cue_claimed.append(rng)
            if cue not in cues:
                cues.append(cue)

    return replace(span, period_phrase=period_phrase, anchor_phrase=anchor_phrase,
                   qualifier_cues=tuple(cues))


def build_extraction_prompt(section: Section, taxonomy: MetricTaxonomy,
                            schema_card=None) -> str:
    """Domain-aware extraction prompt: instruction + target schema + aliases
    + delimited section text. Byte-stable for identical inputs."""
    if schema_card is None:
        fields = list(DEFAULT_SCHEMA_FIELDS)
    elif hasattr(schema_card, "columns"):
        fields = [getattr(c, "name", c) for c in schema_card.columns]
    else:
        fields = list(schema_card)

    lines = [
        "Extract financial KPIs from the earnings text using the schema below.",
        "Output in JSON. Normalize units and link metrics to fiscal periods.",
        "",
        "Target schema fields:",
    ]
    lines += [f"- {f}" for f in fields]
    alias_pairs = sorted(
        (entry.canonical_name, ", ".join(entry.aliases)) for entry in taxonomy.entries)
    if alias_pairs:
        lines.append("")
        lines.append("Known metric aliases:")
        lines += [f"- {name}: {aliases}" for name, aliases in alias_pairs]
    lines.append("")
    lines.append(TEXT_BEGIN + section.body + TEXT_END)
    return "\n".join(lines)


def deterministic_records(body: str, taxonomy: MetricTaxonomy) -> list[dict]:
    """The structured output an ideal extractor produces for a section body.

    Shared by the deterministic mock backend; sorted for stable serialization.
    """
    section = Section(section_id="tmp", title="", body=body,
                      char_range=(0, len(body)), kind=SectionKind.NARRATIVE)
    candidates = [extract_context(c) for c in detect_candidates(section, taxonomy)]
    records = []
    for cand in candidates:
        records.append({
            "metric": cand.canonical,
            "value_low": str(cand.numeric.parsed_low),
            "value_high": str(cand.numeric.parsed_high),
            "unit_token": cand.numeric.unit_token,
            "period_phrase": cand.period_phrase,
            "anchor_phrase": cand.anchor_phrase,
            "qualifier_cues": list(cand.qualifier_cues),
            "char_range": list(cand.numeric.char_range),
            "confidence": 1.0,
        })
    records.sort(key=lambda r: r["char_range"])
    return records


def parse_backend_output(completion: str, section: Section,
                         taxonomy: MetricTaxonomy, doc_id: str = "") -> list[RawKpiRecord]:
    """Parse a backend completion into grounded RawKpiRecords.

    Records whose value pair matches no detected numeric span in the section
    are dropped as ungrounded; unknown metrics are dropped too.
    """
    try:
        payload = json.loads(completion)
        items = payload["records"]
        assert isinstance(items, list)
    except (json.JSONDecodeError, KeyError, TypeError, AssertionError) as exc:
        raise MalformedCompletion(f"unparseable completion for {section.section_id}: {exc}") from exc

    spans = detect_numeric_spans(section)
    by_value = {(s.parsed_low, s.parsed_high): s for s in reversed(spans)}

    records: list[RawKpiRecord] = []
    for item in items:
        try:
            metric = item["metric"]
            low = Decimal(str(item["value_low"]))
            high = Decimal(str(item["value_high"]))
        except (KeyError, TypeError, InvalidOperation) as exc:
            raise MalformedCompletion(f"bad record shape: {exc}") from exc
        if taxonomy.entry(metric) is None:
            logger.info("dropping record with unknown metric %r", metric)
            continue
        span = by_value.get((low, high))
        if span is None:
            logger.info("dropping ungrounded record %s=%s (no matching span)", metric, low)
            continue
        records.append(RawKpiRecord(
            metric=metric,
            value_low=low,
            value_high=high,
            unit_token=item.get("unit_token", span.unit_token),
            period_phrase=item.get("period_phrase", ""),
            qualifier_cues=tuple(item.get("qualifier_cues", ())),
            provenance=Provenance(doc_id, section.section_id, span.char_range),
            backend_confidence=float(item.get("confidence", 1.0)),
            anchor_phrase=item.get("anchor_phrase", ""),
        ))
    return records


_REPAIR_SUFFIX = ("\n\nYour previous reply could not be parsed. "
                  "Reply with only a JSON object of the form {\"records\": [...]}.")


def _header_period(sections: tuple[Section, ...], section_id: str) -> str:
    """Period token from the nearest preceding header section, if any."""
    preceding = ""
    for sec in sections:
        if sec.section_id == section_id:
            break
        if sec.kind is SectionKind.HEADER:
            m = _EXPLICIT_PERIOD.search(sec.title) or _BARE_YEAR.search(sec.title)
            preceding = m.group(0) if m else preceding
    return preceding


def extract_document(doc: Document, backend: CompletionBackend,
                     taxonomy: MetricTaxonomy, parallelism: int = 4,
                     schema_card=None) -> ExtractionResult:
    """Run the per-section extraction loop for a whole document.

    Malformed completions get one repair re-ask, then fail that section only;
    output order is stable by (section_id, char offset) regardless of
    completion order.
    """
    work = [sec for sec in doc.sections
            if sec.kind is not SectionKind.HEADER and detect_numeric_spans(sec)]

    def run_section(section: Section):
        prompt = build_extraction_prompt(section, taxonomy, schema_card)
        completion = backend.complete(prompt)
        try:
            return parse_backend_output(completion, section, taxonomy, doc.doc_id)
        except MalformedCompletion:
            completion = backend.complete(prompt + _REPAIR_SUFFIX)
            return parse_backend_output(completion, section, taxonomy, doc.doc_id)

    records: list[RawKpiRecord] = []
    failures: list[SectionFailure] = []
    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        for section, outcome in zip(work, pool.map(
                lambda s: _capture(run_section, s), work)):
            if isinstance(outcome, Exception):
                failures.append(SectionFailure(section.section_id, str(outcome)))
            else:
                records.extend(outcome)

    filled = []
    for rec in records:
        if not rec.period_phrase:
            fallback = _header_period(doc.sections, rec.provenance.section_id)
            if fallback:
                rec = replace(rec, period_phrase=fallback, period_from_header=True)
        filled.append(rec)
    filled.sort(key=lambda r: (r.provenance.section_id, r.provenance.char_range))
    return ExtractionResult(records=filled, failures=failures)


def _capture(fn, arg):
    try:
        return fn(arg)
    except MalformedCompletion as exc:
        return exc
