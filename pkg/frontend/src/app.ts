/**
 * Console shell: wires the question form, records browser, and history
 * panel to the API client. Browser-only entry point; all rendering logic
 * lives in views.ts so it stays testable without a DOM.
 */

import { ApiClient, ClarificationError, ServiceError, StaleResponse } from "./api.js";
import { SessionHistory } from "./history.js";
import type { RecordFilters, SchemaCard } from "./types.js";
import {
  renderAnswer,
  renderClarification,
  renderErrorToast,
  renderHistory,
  renderRecordsTable,
} from "./views.js";

export interface ConsoleElements {
  answerPanel: HTMLElement;
  recordsPanel: HTMLElement;
  historyPanel: HTMLElement;
  questionInput: HTMLInputElement;
  questionForm: HTMLFormElement;
}

export class AnalystConsole {
  private schema: SchemaCard | undefined;

  constructor(
    private readonly api: ApiClient,
    private readonly history: SessionHistory,
    private readonly els: ConsoleElements,
  ) {}

  async start(): Promise<void> {
    this.els.questionForm.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.ask(this.els.questionInput.value);
    });
    this.els.historyPanel.innerHTML = renderHistory(this.history.list());
    try {
      this.schema = await this.api.fetchSchema();
      await this.browse({});
    } catch (err) {
      this.els.recordsPanel.innerHTML = renderErrorToast(String(err), null);
    }
  }

  async ask(question: string): Promise<void> {
    const trimmed = question.trim();
    if (!trimmed) return;
    try {
      const bundle = await this.api.submitQuestion(trimmed);
      this.history.append(trimmed, bundle);
      this.els.answerPanel.innerHTML = renderAnswer(bundle);
      this.els.historyPanel.innerHTML = renderHistory(this.history.list());
    } catch (err) {
      if (err instanceof StaleResponse) return; // superseded; newer answer wins
      if (err instanceof ClarificationError) {
        this.els.answerPanel.innerHTML = renderClarification(err.phrase);
      } else if (err instanceof ServiceError) {
        this.els.answerPanel.innerHTML = renderErrorToast(err.detail, err.auditId);
      } else {
        this.els.answerPanel.innerHTML = renderErrorToast(String(err), null);
      }
    }
  }

  async browse(filters: RecordFilters): Promise<void> {
    try {
      const page = await this.api.browseRecords(filters);
      this.els.recordsPanel.innerHTML = renderRecordsTable(page, this.schema);
    } catch (err) {
      const retry = renderErrorToast(String(err), null) +
        `<button class="retry">Retry</button>`;
      this.els.recordsPanel.innerHTML = retry;
      this.els.recordsPanel.querySelector(".retry")?.addEventListener(
        "click", () => void this.browse(filters));
    }
  }
}

export function mountConsole(baseUrl: string, els: ConsoleElements): AnalystConsole {
  const console_ = new AnalystConsole(
    new ApiClient(baseUrl),
    new SessionHistory(window.localStorage),
    els,
  );
  void console_.start();
  return console_;
}
