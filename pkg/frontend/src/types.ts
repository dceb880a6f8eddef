/**
 * Wire types for the KPI query service.
 *
 * These mirror the JSON the service emits (see docs/api in the repo root).
 * Decimal fields cross as strings when they carry fractional digits; whole
 * numbers may arrive as plain JSON numbers. The console treats every cell
 * as opaque — values are formatted for display but never recomputed.
 */

/** One cell of a result row: a decimal string, a number, a unit tag, or null. */
export type Cell = string | number | null;

export interface ValidationReport {
  syntax_ok: boolean;
  unit_consistent: boolean;
  temporal_aligned: boolean;
  qualifier_correct: boolean;
  violations: { rule: string; detail: string }[];
}

export interface AnswerBundle {
  question: string;
  sql: string;
  generation_source: string;
  validation: ValidationReport;
  columns: string[];
  rows: Cell[][];
  row_count: number;
  explanation: string;
  attempts: number;
  audit_id: string;
}

export interface ErrorBody {
  error: string;
  detail: string;
  audit_id: string | null;
}

export interface ColumnInfo {
  name: string;
  logical_type: string;
  unit_semantics: string;
  aliases: string[];
}

export interface SchemaCard {
  table: string;
  schema_version: number;
  columns: ColumnInfo[];
  sample_rows: Cell[][];
}

export interface KpiRecordRow {
  metric: string;
  value: string;
  value_low: string;
  value_high: string;
  unit: string;
  scale_applied: string;
  period_granularity: string;
  period_year: number;
  basis: string;
  status: string;
  confidence: string;
  company: string;
  doc_id: string;
  section_id: string;
  published_on: string | null;
}

export interface RecordsPage {
  records: KpiRecordRow[];
  page: number;
  page_size: number;
  total: number;
}

export interface RecordFilters {
  metric?: string;
  year?: number;
  status?: string;
  page?: number;
  pageSize?: number;
}

export interface SessionHistoryEntry {
  question: string;
  bundle: AnswerBundle;
  timestamp: string;
  starred: boolean;
}
