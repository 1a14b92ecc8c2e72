import { ApiError, fetchRecent, fetchVocab, postEntry } from "./api";
import { SubmissionQueue } from "./queue";
import {
  FormState,
  Toggle,
  applyToggle,
  buildPayload,
  canSubmit,
  emptyState,
  localStamp,
  selectionCount,
} from "./state";
import type { EntryPayload, FetchLike, Vocab } from "./types";

export interface AppOptions {
  apiBase: string;
  storage?: Storage;
  fetchImpl?: FetchLike;
  now?: () => Date;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function describe(e: EntryPayload): string {
  const parts = [
    e.location,
    ...e.activities,
    e.arousal !== null && e.arousal !== undefined ? `arousal ${e.arousal}` : "",
    e.wear_flag && e.wear_flag !== "none" ? e.wear_flag : "",
  ].filter(Boolean);
  return `${e.timestamp.slice(11)}  ${parts.join(", ")}`;
}

/**
 * Build the survey into `root`. Everything the page talks to is injectable
 * (storage, fetch, clock) so tests and the real page share one code path.
 * Resolves once the vocabulary load and the initial queue flush settle.
 */
export async function renderApp(root: HTMLElement, opts: AppOptions): Promise<void> {
  const doc = root.ownerDocument;
  const win = doc.defaultView as Window & typeof globalThis;
  const storage = opts.storage ?? win.localStorage;
  const fetchImpl: FetchLike = opts.fetchImpl ?? ((input, init) => win.fetch(input, init));
  const now = opts.now ?? (() => new Date());
  const queue = new SubmissionQueue(storage);

  root.textContent = "";
  const status = el(doc, "p", "status", "loading vocabulary...");
  status.setAttribute("aria-live", "polite");
  root.append(status);

  let vocab: Vocab;
  try {
    vocab = await fetchVocab(opts.apiBase, fetchImpl);
  } catch (err) {
    // No vocabulary means no form; offer a way back in instead.
    status.textContent = `could not load the vocabulary: ${(err as Error).message}`;
    const retry = el(doc, "button", "retry", "Retry");
    retry.type = "button";
    retry.addEventListener("click", () => {
      void renderApp(root, opts);
    });
    root.append(retry);
    return;
  }
  status.textContent = "";
  const max = vocab.max_selections;

  let state: FormState = emptyState();
  let last: EntryPayload | null = null;
  let flushing = false;

  const controls: { btn: HTMLButtonElement; on: (s: FormState) => boolean }[] = [];

  const blocked = el(doc, "p", "blocked");
  blocked.setAttribute("aria-live", "assertive");
  const counter = el(doc, "p", "counter");
  const queued = el(doc, "span", "queued");
  const submitBtn = el(doc, "button", "submit", "Save entry");
  submitBtn.type = "button";
  const repeatBtn = el(doc, "button", "repeat", "Repeat last");
  repeatBtn.type = "button";
  const recentList = el(doc, "ol", "recent");

  function tap(t: Toggle): void {
    const res = applyToggle(state, t, max);
    state = res.state;
    blocked.textContent = res.blocked ?? "";
    sync();
  }

  function chip(label: string, t: Toggle, on: (s: FormState) => boolean): HTMLButtonElement {
    const b = el(doc, "button", "chip", label);
    b.type = "button";
    b.addEventListener("click", () => tap(t));
    controls.push({ btn: b, on });
    return b;
  }

  function group(legend: string, chips: HTMLButtonElement[]): HTMLFieldSetElement {
    const f = el(doc, "fieldset", "group");
    f.append(el(doc, "legend", undefined, legend));
    const row = el(doc, "div", "chips");
    row.append(...chips);
    f.append(row);
    return f;
  }

  const wearBtn = chip("wear flag: none", { kind: "wear" }, (s) => s.wearFlag !== "none");

  root.append(
    group(
      "Location",
      vocab.locations.map((loc) => chip(loc, { kind: "location", token: loc }, (s) => s.location === loc)),
    ),
    group(
      "Activities",
      vocab.activities.map((act) =>
        chip(act, { kind: "activity", token: act }, (s) => s.activities.includes(act)),
      ),
    ),
    group(
      "Arousal",
      vocab.arousal_levels.map((lv) =>
        chip(String(lv), { kind: "arousal", level: lv }, (s) => s.arousal === lv),
      ),
    ),
    group("Device", [wearBtn]),
    counter,
    blocked,
  );

  const actions = el(doc, "div", "actions");
  actions.append(submitBtn, repeatBtn, queued);
  root.append(actions);

  const recent = el(doc, "section", "recent-box");
  recent.append(el(doc, "h2", undefined, "Recent entries"), recentList);
  root.append(recent);

  function sync(): void {
    for (const { btn, on } of controls) {
      const pressed = on(state);
      btn.setAttribute("aria-pressed", String(pressed));
      btn.classList.toggle("on", pressed);
    }
    wearBtn.textContent = `wear flag: ${state.wearFlag}`;
    counter.textContent = `${selectionCount(state)} / ${max} selected`;
    submitBtn.disabled = !canSubmit(state, max);
    repeatBtn.disabled = last === null;
    const n = queue.size();
    queued.textContent = n > 0 ? `${n} queued` : "";
  }

  async function refreshRecent(): Promise<void> {
    try {
      const entries = await fetchRecent(opts.apiBase, 10, fetchImpl);
      recentList.textContent = "";
      for (const e of entries) {
        recentList.append(el(doc, "li", undefined, describe(e)));
      }
    } catch {
      // unreachable server; keep whatever the list already shows
    }
  }

  async function flushQueue(): Promise<void> {
    if (flushing || queue.size() === 0) return;
    flushing = true;
    try {
      const { sent, rejected } = await queue.flush((p) => postEntry(opts.apiBase, p, fetchImpl));
      if (sent > 0) {
        status.textContent = `sent ${sent} queued ${sent === 1 ? "entry" : "entries"}`;
        await refreshRecent();
      }
      if (rejected.length > 0) {
        status.textContent = `server refused ${rejected.length} queued: ${rejected[0]}`;
      }
    } finally {
      flushing = false;
    }
    sync();
  }

  async function send(payload: EntryPayload): Promise<void> {
    try {
      const result = await postEntry(opts.apiBase, payload, fetchImpl);
      last = payload;
      state = emptyState();
      blocked.textContent = "";
      status.textContent =
        result.status === "duplicate"
          ? "duplicate of an existing entry"
          : `saved ${describe(result.entry)}`;
      await refreshRecent();
      await flushQueue();
    } catch (err) {
      if (err instanceof ApiError) {
        // The server said no; keep the selections so they can be edited.
        status.textContent = `rejected: ${err.message}`;
      } else {
        queue.enqueue(payload);
        last = payload;
        state = emptyState();
        blocked.textContent = "";
        status.textContent = "offline; entry queued";
      }
    }
    sync();
  }

  submitBtn.addEventListener("click", () => {
    void send(buildPayload(state, now()));
  });

  repeatBtn.addEventListener("click", () => {
    if (!last) return;
    void send({ ...last, activities: [...last.activities], timestamp: localStamp(now()) });
  });

  win.addEventListener("online", () => {
    void flushQueue();
  });

  sync();
  await refreshRecent();
  await flushQueue();
}
