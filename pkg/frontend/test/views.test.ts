/**
 * Snapshot tests over views rendered from frozen service responses.
 *
 * The fixtures in test/fixtures/ are verbatim JSON captured from the real
 * HTTP service over the reference filings, so these tests pin the entire
 * bundle -> markup path end to end.
 */
import { describe, expect, it } from "vitest";

import type { AnswerBundle, RecordsPage, SchemaCard } from "../src/types.js";
import {
  isGuidanceBundle,
  renderAnswer,
  renderClarification,
  renderErrorToast,
  renderHistory,
  renderRecordsTable,
} from "../src/views.js";

import marginActual from "./fixtures/bundle_margin_actual.json";
import marginGuidance from "./fixtures/bundle_margin_guidance.json";
import revenue from "./fixtures/bundle_revenue.json";
import recordsPage from "./fixtures/records_page.json";
import schema from "./fixtures/schema.json";

const actualBundle = marginActual as AnswerBundle;
const guidanceBundle = marginGuidance as AnswerBundle;
const revenueBundle = revenue as AnswerBundle;

describe("renderAnswer", () => {
  it("renders the actual-margin answer with 14.6%", () => {
    const html = renderAnswer(actualBundle);
    expect(html).toContain("was 14.6%.");
    expect(html).toContain(">14.6%</td>");
    expect(html).not.toContain("badge-guidance");
    expect(html).toMatchSnapshot();
  });

  it("renders the guidance answer with 16.0%, a Guidance badge, and bounds", () => {
    const html = renderAnswer(guidanceBundle);
    expect(html).toContain("16.0%");
    expect(html).toContain(`class="badge badge-guidance">Guidance<`);
    expect(html).toContain("Range:");
    expect(html).toContain("15.0%");
    expect(html).toContain("17.0%");
    expect(html).toMatchSnapshot();
  });

  it("formats currency answers as compact dollars", () => {
    const html = renderAnswer(revenueBundle);
    expect(html).toContain(">$4.3B</td>");
    expect(html).toMatchSnapshot();
  });

  it("shows four validation lights", () => {
    const html = renderAnswer(actualBundle);
    const lights = html.match(/badge-pass/g) ?? [];
    expect(lights.length).toBe(4);
  });

  it("keeps the SQL in a collapsible panel", () => {
    const html = renderAnswer(actualBundle);
    expect(html).toContain("<details class=\"sql-panel\">");
    expect(html).toContain("SELECT value");
  });

  it("renders an empty-state when no rows match", () => {
    const empty: AnswerBundle = { ...actualBundle, rows: [], row_count: 0 };
    expect(renderAnswer(empty)).toContain("No matching records.");
  });
});

describe("value traceability", () => {
  const bundles = [actualBundle, guidanceBundle, revenueBundle];

  it("every rendered figure carries its bundle value verbatim", () => {
    for (const bundle of bundles) {
      const html = renderAnswer(bundle);
      const attrs = [...html.matchAll(/data-value="([^"]*)"/g)].map((m) => m[1]);
      const sent = new Set(
        bundle.rows.flat().map((cell) => (cell === null ? "" : String(cell))),
      );
      // rows render in order; every sent cell must appear as a data-value
      for (const cell of sent) {
        expect(attrs).toContain(cell);
      }
      // and no data-value exists that the bundle did not send
      for (const attr of attrs) {
        expect(sent.has(attr!)).toBe(true);
      }
    }
  });

  it("replaying an identical bundle renders byte-identical markup", () => {
    for (const bundle of bundles) {
      const clone = JSON.parse(JSON.stringify(bundle)) as AnswerBundle;
      expect(renderAnswer(clone)).toBe(renderAnswer(bundle));
    }
  });
});

describe("isGuidanceBundle", () => {
  it("reads the status predicate from the server's SQL", () => {
    expect(isGuidanceBundle(guidanceBundle)).toBe(true);
    expect(isGuidanceBundle(actualBundle)).toBe(false);
  });
});

describe("renderClarification", () => {
  it("invites a reformulated question", () => {
    const html = renderClarification("the weather");
    expect(html).toContain("the weather");
    expect(html).toContain("operating margin");
    expect(html).toMatchSnapshot();
  });
});

describe("renderErrorToast", () => {
  it("shows the audit id when present", () => {
    const html = renderErrorToast("see audit log", "audit-000042");
    expect(html).toContain("audit-000042");
    expect(html).toMatchSnapshot();
  });
  it("omits the audit ref when absent", () => {
    expect(renderErrorToast("boom", null)).not.toContain("audit-ref");
  });
});

describe("renderRecordsTable", () => {
  const page = recordsPage as RecordsPage;
  const card = schema as SchemaCard;

  it("renders the captured store page", () => {
    const html = renderRecordsTable(page, card);
    expect(html).toContain("$4.3B");
    expect(html).toContain("operating_margin");
    expect(html).toContain(`Page 1 of 1 (${page.total} records)`);
    expect(html).toMatchSnapshot();
  });

  it("color-codes confidence", () => {
    const html = renderRecordsTable(page, card);
    expect(html).toContain("confidence-high");
  });

  it("renders an empty state for an empty store", () => {
    const empty: RecordsPage = { records: [], page: 1, page_size: 25, total: 0 };
    expect(renderRecordsTable(empty, card)).toContain("No records in the store.");
  });

  it("computes 3 pages for 60 rows at size 25", () => {
    const sixty: RecordsPage = { ...page, total: 60, page_size: 25 };
    expect(renderRecordsTable(sixty, card)).toContain("Page 1 of 3 (60 records)");
  });
});

describe("renderHistory", () => {
  it("renders entries in insertion order with star toggles", () => {
    const entries = [
      { question: "q1", bundle: actualBundle, timestamp: "2025-06-01T12:00:00Z", starred: false },
      { question: "q2", bundle: guidanceBundle, timestamp: "2025-06-01T12:01:00Z", starred: true },
    ];
    const html = renderHistory(entries);
    expect(html.indexOf("q1")).toBeLessThan(html.indexOf("q2"));
    expect(html).toContain("★");
    expect(html).toContain("☆");
    expect(html).toMatchSnapshot();
  });

  it("renders an empty state with no entries", () => {
    expect(renderHistory([])).toContain("No questions asked yet.");
  });
});
