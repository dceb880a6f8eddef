/**
 * Session query history, persisted to localStorage.
 *
 * History is append-only: entries are never reordered or removed within a
 * session, and reloading from storage reproduces them exactly. Starring
 * toggles a flag on an entry without moving it.
 */

import type { AnswerBundle, SessionHistoryEntry } from "./types.js";

/** The subset of the Storage interface we need; injectable for tests. */
export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

const STORAGE_KEY = "finkpi-console-history";

export class SessionHistory {
  private entries: SessionHistoryEntry[];

  constructor(
    private readonly storage: StorageLike,
    private readonly now: () => string = () => new Date().toISOString(),
  ) {
    this.entries = this.load();
  }

  private load(): SessionHistoryEntry[] {
    const raw = this.storage.getItem(STORAGE_KEY);
    if (!raw) return [];
    try {
      const parsed = JSON.parse(raw);
      return Array.isArray(parsed) ? (parsed as SessionHistoryEntry[]) : [];
    } catch {
      return [];
    }
  }

  private persist(): void {
    this.storage.setItem(STORAGE_KEY, JSON.stringify(this.entries));
  }

  append(question: string, bundle: AnswerBundle): SessionHistoryEntry {
    const entry: SessionHistoryEntry = {
      question,
      bundle,
      timestamp: this.now(),
      starred: false,
    };
    this.entries.push(entry);
    this.persist();
    return entry;
  }

  toggleStar(index: number): void {
    const entry = this.entries[index];
    if (!entry) throw new RangeError(`no history entry at index ${index}`);
    entry.starred = !entry.starred;
    this.persist();
  }

  list(): readonly SessionHistoryEntry[] {
    return this.entries;
  }

  get length(): number {
    return this.entries.length;
  }
}
