import { ApiError } from "./api";
import type { EntryPayload } from "./types";

const KEY = "whichwrist-survey-queue-v1";

/**
 * FIFO store for entries that could not reach the server, persisted to
 * localStorage so a page reload loses nothing. Payloads keep the timestamp
 * from the original tap, not from the eventual send.
 */
export class SubmissionQueue {
  constructor(
    private storage: Storage,
    private key: string = KEY,
  ) {}

  load(): EntryPayload[] {
    try {
      return JSON.parse(this.storage.getItem(this.key) || "[]");
    } catch {
      return [];
    }
  }

  private save(items: EntryPayload[]): void {
    this.storage.setItem(this.key, JSON.stringify(items));
  }

  size(): number {
    return this.load().length;
  }

  enqueue(payload: EntryPayload): void {
    const items = this.load();
    items.push(payload);
    this.save(items);
  }

  /**
   * Send queued entries oldest first. A network failure keeps the item and
   * stops (order must survive for the next attempt); a server rejection can
   * never succeed, so the item is dropped and its reason reported. The store
   * is rewritten after every send so a mid-flush reload stays consistent.
   */
  async flush(
    post: (p: EntryPayload) => Promise<unknown>,
  ): Promise<{ sent: number; rejected: string[] }> {
    const items = this.load();
    let sent = 0;
    const rejected: string[] = [];
    while (items.length > 0) {
      try {
        await post(items[0]);
        sent += 1;
      } catch (err) {
        if (err instanceof ApiError) {
          rejected.push(err.message);
        } else {
          break;
        }
      }
      items.shift();
      this.save(items);
    }
    return { sent, rejected };
  }
}
