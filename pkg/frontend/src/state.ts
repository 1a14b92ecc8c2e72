import type { EntryPayload } from "./types";

/** The single wear control cycles through these on successive taps. */
export const WEAR_CYCLE = ["none", "removed", "worn"] as const;

export interface FormState {
  location: string | null;
  activities: string[];
  arousal: number | null;
  wearFlag: string;
}

export type Toggle =
  | { kind: "location"; token: string }
  | { kind: "activity"; token: string }
  | { kind: "arousal"; level: number }
  | { kind: "wear" };

export function emptyState(): FormState {
  return { location: null, activities: [], arousal: null, wearFlag: "none" };
}

export function selectionCount(s: FormState): number {
  return (
    (s.location ? 1 : 0) +
    s.activities.length +
    (s.arousal !== null ? 1 : 0) +
    (s.wearFlag !== "none" ? 1 : 0)
  );
}

export function canSubmit(s: FormState, max: number): boolean {
  const n = selectionCount(s);
  return n >= 1 && n <= max;
}

/**
 * Apply one tap. Deselecting and replacing within a group never grow the
 * count, so they are always allowed; a tap that would add a selection past
 * `max` is refused with a reason instead of mutating anything.
 */
export function applyToggle(
  s: FormState,
  t: Toggle,
  max: number,
): { state: FormState; blocked?: string } {
  const full = selectionCount(s) >= max;
  const blocked = {
    state: s,
    blocked: `at most ${max} selections per entry; deselect something first`,
  };
  switch (t.kind) {
    case "location": {
      if (s.location === t.token) return { state: { ...s, location: null } };
      if (s.location === null && full) return blocked;
      return { state: { ...s, location: t.token } };
    }
    case "activity": {
      if (s.activities.includes(t.token)) {
        return { state: { ...s, activities: s.activities.filter((a) => a !== t.token) } };
      }
      if (full) return blocked;
      return { state: { ...s, activities: [...s.activities, t.token] } };
    }
    case "arousal": {
      if (s.arousal === t.level) return { state: { ...s, arousal: null } };
      if (s.arousal === null && full) return blocked;
      return { state: { ...s, arousal: t.level } };
    }
    case "wear": {
      const next = WEAR_CYCLE[(WEAR_CYCLE.indexOf(s.wearFlag as any) + 1) % WEAR_CYCLE.length];
      if (s.wearFlag === "none" && full) return blocked;
      return { state: { ...s, wearFlag: next } };
    }
  }
}

/** Local wall-clock time without timezone suffix, second resolution. */
export function localStamp(d: Date): string {
  const p = (n: number) => String(n).padStart(2, "0");
  return (
    `${d.getFullYear()}-${p(d.getMonth() + 1)}-${p(d.getDate())}` +
    `T${p(d.getHours())}:${p(d.getMinutes())}:${p(d.getSeconds())}`
  );
}

/** Wire payload for the current selections, stamped with the tap time. */
export function buildPayload(s: FormState, tappedAt: Date): EntryPayload {
  return {
    timestamp: localStamp(tappedAt),
    location: s.location ?? "",
    activities: [...s.activities],
    arousal: s.arousal,
    wear_flag: s.wearFlag === "none" ? "" : s.wearFlag,
  };
}
