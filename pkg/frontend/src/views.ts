/**
 * View rendering for the analyst console.
 *
 * Every view is a pure function from server JSON to an HTML string, which
 * keeps rendering snapshot-testable and guarantees the replay invariant:
 * identical bundles produce byte-identical markup.
 *
 * Traceability rule: each formatted figure carries the verbatim bundle value
 * in a data-value attribute. The console formats for display but never
 * derives a number the server did not send.
 */

import { confidenceBucket, formatValue } from "./format.js";
import type {
  AnswerBundle,
  Cell,
  KpiRecordRow,
  RecordsPage,
  SchemaCard,
  SessionHistoryEntry,
} from "./types.js";

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

const BADGES: [keyof AnswerBundle["validation"] & string, string][] = [
  ["syntax_ok", "Syntax"],
  ["unit_consistent", "Units"],
  ["temporal_aligned", "Temporal"],
  ["qualifier_correct", "Qualifier"],
];

function validationBadges(bundle: AnswerBundle): string {
  const lights = BADGES.map(([key, label]) => {
    const ok = bundle.validation[key] as boolean;
    return `<span class="badge badge-${ok ? "pass" : "fail"}" data-check="${key}">${label}</span>`;
  });
  return `<div class="validation-badges">${lights.join("")}</div>`;
}

/** The server marks guidance in the SQL predicate; the console only reads it. */
export function isGuidanceBundle(bundle: AnswerBundle): boolean {
  return /status\s*=\s*'Guidance'/.test(bundle.sql);
}

function cellMarkup(raw: Cell, unit: string): string {
  const rawText = raw === null ? "" : String(raw);
  return `<td data-value="${esc(rawText)}">${esc(formatValue(raw, unit))}</td>`;
}

function resultTable(bundle: AnswerBundle): string {
  if (bundle.rows.length === 0) {
    return `<p class="empty-state">No matching records.</p>`;
  }
  const unitIdx = bundle.columns.indexOf("unit");
  const header = bundle.columns.map((c) => `<th>${esc(c)}</th>`).join("");
  const body = bundle.rows
    .map((row) => {
      const unit = unitIdx >= 0 ? String(row[unitIdx] ?? "") : "";
      const cells = row
        .map((cell, i) => {
          // unit/scale columns are tags, not quantities — render verbatim
          const col = bundle.columns[i] ?? "";
          const isQuantity = col === "value" || col === "value_low" || col === "value_high";
          return isQuantity
            ? cellMarkup(cell, unit)
            : `<td data-value="${esc(cell === null ? "" : String(cell))}">${esc(cell === null ? "—" : String(cell))}</td>`;
        })
        .join("");
      return `<tr>${cells}</tr>`;
    })
    .join("");
  return `<table class="result-table"><thead><tr>${header}</tr></thead><tbody>${body}</tbody></table>`;
}

function rangeBanner(bundle: AnswerBundle): string {
  const lowIdx = bundle.columns.indexOf("value_low");
  const highIdx = bundle.columns.indexOf("value_high");
  const unitIdx = bundle.columns.indexOf("unit");
  if (lowIdx < 0 || highIdx < 0 || bundle.rows.length === 0) return "";
  const row = bundle.rows[0]!;
  const low = row[lowIdx] ?? null;
  const high = row[highIdx] ?? null;
  if (low === null || high === null || String(low) === String(high)) return "";
  const unit = unitIdx >= 0 ? String(row[unitIdx] ?? "") : "";
  return (
    `<p class="range-bounds">Range: ` +
    `<span data-value="${esc(String(low))}">${esc(formatValue(low, unit))}</span>` +
    ` to ` +
    `<span data-value="${esc(String(high))}">${esc(formatValue(high, unit))}</span>` +
    `</p>`
  );
}

export function renderAnswer(bundle: AnswerBundle): string {
  const guidance = isGuidanceBundle(bundle)
    ? `<span class="badge badge-guidance">Guidance</span>`
    : "";
  return [
    `<section class="answer" data-audit-id="${esc(bundle.audit_id)}">`,
    `<p class="explanation">${esc(bundle.explanation)}${guidance}</p>`,
    rangeBanner(bundle),
    validationBadges(bundle),
    resultTable(bundle),
    `<details class="sql-panel"><summary>SQL (${esc(bundle.generation_source)}, ` +
      `attempt ${bundle.attempts})</summary><pre>${esc(bundle.sql)}</pre></details>`,
    `</section>`,
  ]
    .filter(Boolean)
    .join("\n");
}

export function renderClarification(phrase: string): string {
  return (
    `<section class="clarification">` +
    `<p>I couldn't match a metric in that question (closest phrase: ` +
    `<em>${esc(phrase)}</em>). Try naming one, e.g. "revenue" or "operating margin".</p>` +
    `</section>`
  );
}

export function renderErrorToast(detail: string, auditId: string | null): string {
  const ref = auditId ? ` <code class="audit-ref">${esc(auditId)}</code>` : "";
  return `<div class="toast toast-error">Request failed: ${esc(detail)}.${ref}</div>`;
}

const RECORD_COLUMNS: (keyof KpiRecordRow)[] = [
  "metric", "value", "unit", "period_granularity", "period_year",
  "basis", "status", "confidence", "company", "doc_id",
];

export function renderRecordsTable(page: RecordsPage, schema?: SchemaCard): string {
  if (page.records.length === 0) {
    return `<p class="empty-state">No records in the store.</p>`;
  }
  const known = schema ? new Set(schema.columns.map((c) => c.name)) : null;
  const columns = known
    ? RECORD_COLUMNS.filter((c) => known.has(c) || c === "confidence")
    : RECORD_COLUMNS;
  const header = columns.map((c) => `<th>${esc(c)}</th>`).join("");
  const body = page.records
    .map((rec) => {
      const cells = columns
        .map((col) => {
          const raw = rec[col];
          const rawText = raw === null ? "" : String(raw);
          if (col === "value") {
            return `<td data-value="${esc(rawText)}">${esc(formatValue(rec.value, rec.unit))}</td>`;
          }
          if (col === "confidence") {
            return `<td class="confidence-${confidenceBucket(rec.confidence)}" data-value="${esc(rawText)}">${esc(rawText)}</td>`;
          }
          return `<td data-value="${esc(rawText)}">${esc(rawText)}</td>`;
        })
        .join("");
      return `<tr>${cells}</tr>`;
    })
    .join("");
  const pages = Math.max(1, Math.ceil(page.total / page.page_size));
  return (
    `<table class="records-table"><thead><tr>${header}</tr></thead>` +
    `<tbody>${body}</tbody></table>` +
    `<nav class="pagination">Page ${page.page} of ${pages} (${page.total} records)</nav>`
  );
}

export function renderHistory(entries: readonly SessionHistoryEntry[]): string {
  if (entries.length === 0) {
    return `<p class="empty-state">No questions asked yet.</p>`;
  }
  const items = entries
    .map((e, i) => {
      const star = e.starred ? "★" : "☆";
      return (
        `<li data-index="${i}"><button class="star">${star}</button> ` +
        `<span class="question">${esc(e.question)}</span> ` +
        `<time>${esc(e.timestamp)}</time></li>`
      );
    })
    .join("");
  return `<ol class="history">${items}</ol>`;
}
