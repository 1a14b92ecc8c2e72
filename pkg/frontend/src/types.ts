export interface Vocab {
  locations: string[];
  activities: string[];
  arousal_levels: number[];
  wear_flags: string[];
  max_selections: number;
}

/** Wire shape of one context entry, as POSTed to and returned by /entries. */
export interface EntryPayload {
  timestamp: string;
  location: string;
  activities: string[];
  arousal: number | null;
  wear_flag: string;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;
