"""Shared fixtures: fixed clocks, fixture documents, throwaway stores."""
from __future__ import annotations

from datetime import date, datetime, timezone

import pytest

from finkpi.backends import MockBackend
from finkpi.ingest import DocumentMeta, InputFormat, SourceKind, load_document
from finkpi.store import init_store
from finkpi.taxonomy import default_taxonomy

# The two canonical fixture texts most tests lean on.  MARGIN_TEXT exercises
# period anchoring, growth remapping, scale words and a guidance range in one
# paragraph; GROWTH_TEXT packs three records into a single sentence.
MARGIN_TEXT = (
    "Operating margin in Q4 2024 was 14.6%, up from 14.4% last year. "
    "Revenue grew 15.2% to $2.52 billion. "
    "The company expects operating margin to be between 15–17% in FY 2025."
)
GROWTH_TEXT = (
    "In Q1 2024, revenue grew 12% YoY to $4.3 billion, "
    "beating consensus by $150 million."
)


@pytest.fixture(scope="session")
def taxonomy():
    return default_taxonomy()


@pytest.fixture
def fixed_clock():
    return lambda: datetime(2025, 6, 1, 12, 0, 0, tzinfo=timezone.utc)


@pytest.fixture
def backend(taxonomy):
    return MockBackend(taxonomy)


def make_doc(text: str, doc_id: str = "doc-1", company: str = "ACME",
             published_on: date = date(2025, 2, 1), fy_end_month: int = 12):
    meta = DocumentMeta(doc_id, SourceKind.EARNINGS_RELEASE, company,
                        published_on, fy_end_month)
    return load_document(text.encode("utf-8"), InputFormat.PLAIN_TEXT, meta)


@pytest.fixture
def margin_doc():
    return make_doc(MARGIN_TEXT, doc_id="d-margin")


@pytest.fixture
def growth_doc():
    return make_doc(GROWTH_TEXT, doc_id="d-growth", published_on=date(2024, 5, 1))


@pytest.fixture
def store(tmp_path, fixed_clock):
    return init_store(tmp_path / "kpi.db", audit_path=tmp_path / "audit.jsonl",
                      clock=fixed_clock)
