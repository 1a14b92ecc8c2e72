import type { EntryPayload, FetchLike, Vocab } from "./types";

/** The server answered and said no; retrying the same payload cannot help. */
export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

const defaultFetch: FetchLike = (input, init) => fetch(input, init);

export async function fetchVocab(base: string, f: FetchLike = defaultFetch): Promise<Vocab> {
  const res = await f(`${base}/vocab`);
  if (!res.ok) throw new ApiError(`vocabulary fetch failed (${res.status})`, res.status);
  return (await res.json()) as Vocab;
}

export interface SubmitResult {
  status: "appended" | "duplicate";
  entry: EntryPayload;
}

export async function postEntry(
  base: string,
  payload: EntryPayload,
  f: FetchLike = defaultFetch,
): Promise<SubmitResult> {
  const res = await f(`${base}/entries`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(payload),
  });
  const body = await res.json().catch(() => ({}));
  if (!res.ok) {
    throw new ApiError(body.error || `submission failed (${res.status})`, res.status);
  }
  return body as SubmitResult;
}

export async function fetchRecent(
  base: string,
  n: number,
  f: FetchLike = defaultFetch,
): Promise<EntryPayload[]> {
  const res = await f(`${base}/entries/recent?n=${n}`);
  if (!res.ok) throw new ApiError(`recent entries fetch failed (${res.status})`, res.status);
  const body = await res.json();
  return (body.entries ?? []) as EntryPayload[];
}
