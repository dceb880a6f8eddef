/**
 * Typed client for the KPI query service.
 *
 * The console holds at most one in-flight query; responses that arrive
 * after a newer question was submitted are discarded by sequence number.
 */

import type {
  AnswerBundle,
  ErrorBody,
  RecordFilters,
  RecordsPage,
  SchemaCard,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** 422 from the service: the question named no known metric. */
export class ClarificationError extends Error {
  constructor(public readonly phrase: string) {
    super(`clarification needed: ${phrase}`);
    this.name = "ClarificationError";
  }
}

/** Any other non-2xx response. Carries the audit id when the server logged one. */
export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    public readonly errorKind: string,
    public readonly detail: string,
    public readonly auditId: string | null,
  ) {
    super(`${errorKind} (${status}): ${detail}`);
    this.name = "ServiceError";
  }
}

/** Response superseded by a newer question; callers should ignore it. */
export class StaleResponse extends Error {
  constructor() {
    super("response superseded by a newer question");
    this.name = "StaleResponse";
  }
}

async function raiseForStatus(resp: Response): Promise<void> {
  if (resp.ok) return;
  let body: ErrorBody;
  try {
    body = (await resp.json()) as ErrorBody;
  } catch {
    throw new ServiceError(resp.status, "UnknownError", resp.statusText, null);
  }
  if (resp.status === 422 && body.error === "ClarificationNeeded") {
    throw new ClarificationError(body.detail);
  }
  throw new ServiceError(resp.status, body.error, body.detail, body.audit_id);
}

export class ApiClient {
  private seq = 0;

  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  async submitQuestion(question: string): Promise<AnswerBundle> {
    const mySeq = ++this.seq;
    const resp = await this.fetchImpl(`${this.baseUrl}/query`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ question }),
    });
    if (mySeq !== this.seq) throw new StaleResponse();
    await raiseForStatus(resp);
    return (await resp.json()) as AnswerBundle;
  }

  async fetchSchema(): Promise<SchemaCard> {
    const resp = await this.fetchImpl(`${this.baseUrl}/schema`);
    await raiseForStatus(resp);
    return (await resp.json()) as SchemaCard;
  }

  async browseRecords(filters: RecordFilters = {}): Promise<RecordsPage> {
    const params = new URLSearchParams();
    if (filters.metric) params.set("metric", filters.metric);
    if (filters.year !== undefined) params.set("year", String(filters.year));
    if (filters.status) params.set("status", filters.status);
    if (filters.page !== undefined) params.set("page", String(filters.page));
    if (filters.pageSize !== undefined) params.set("page_size", String(filters.pageSize));
    const qs = params.toString();
    const resp = await this.fetchImpl(`${this.baseUrl}/records${qs ? `?${qs}` : ""}`);
    await raiseForStatus(resp);
    return (await resp.json()) as RecordsPage;
  }

  async health(): Promise<{ status: string; schema_version: number; row_count: number }> {
    const resp = await this.fetchImpl(`${this.baseUrl}/health`);
    await raiseForStatus(resp);
    return await resp.json();
  }
}
