/**
 * Unit-aware display formatting.
 *
 * Formatting is presentation only: the raw value from the bundle is kept
 * verbatim alongside every formatted figure (see views.ts, data-value
 * attributes), so nothing the user sees is a client-side recomputation.
 */

import type { Cell } from "./types.js";

const SUFFIXES: [number, string][] = [
  [1e12, "T"],
  [1e9, "B"],
  [1e6, "M"],
  [1e3, "K"],
];

/** "16" -> "16.0%", "14.6" -> "14.6%" */
export function formatPercent(raw: string): string {
  const n = Number(raw);
  if (!Number.isFinite(n)) return raw;
  return `${n.toFixed(1)}%`;
}

/** "4300000000" -> "$4.3B", "150000000" -> "$150M", "980" -> "$980" */
export function formatUsd(raw: string): string {
  const n = Number(raw);
  if (!Number.isFinite(n)) return raw;
  const sign = n < 0 ? "-" : "";
  const abs = Math.abs(n);
  for (const [threshold, suffix] of SUFFIXES) {
    if (abs >= threshold) {
      const scaled = abs / threshold;
      const text = scaled.toFixed(1).replace(/\.0$/, "");
      return `${sign}$${text}${suffix}`;
    }
  }
  return `${sign}$${abs.toLocaleString("en-US")}`;
}

export function formatCount(raw: string): string {
  const n = Number(raw);
  if (!Number.isFinite(n)) return raw;
  return n.toLocaleString("en-US");
}

/** Dispatch on the unit tag the service stores with each record. */
export function formatValue(raw: Cell, unit: string): string {
  if (raw === null) return "—";
  const text = String(raw);
  switch (unit) {
    case "Percent":
      return formatPercent(text);
    case "USD":
      return formatUsd(text);
    case "Count":
      return formatCount(text);
    default:
      return text;
  }
}

/** Confidence buckets drive the color coding in the records table. */
export function confidenceBucket(raw: string): "high" | "medium" | "low" {
  const n = Number(raw);
  if (n >= 0.9) return "high";
  if (n >= 0.7) return "medium";
  return "low";
}

/** Total pages for a records listing; always at least 1. */
export function pageCount(total: number, pageSize: number): number {
  if (pageSize <= 0) throw new Error(`page size must be positive, got ${pageSize}`);
  return Math.max(1, Math.ceil(total / pageSize));
}
