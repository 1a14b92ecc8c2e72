"""Uniform 1-second timeline construction.

Every channel is resampled onto one shared 1 Hz grid: heart rate by linear
interpolation (held constant beyond its first/last sample), count channels by
placing each raw value at its second and zeroes elsewhere.  Context entries
are forward-filled per field, a wear mask removes device-off periods, and the
two hands get dominant/nondominant labels.
"""

from __future__ import annotations

import calendar
import csv
import json
import logging
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .config import (
    AFTERNOON_START_H,
    EVENING_START_H,
    HANDS,
    MAX_INTERPOLATION_GAP_S,
    MORNING_START_H,
    NOON_START_H,
    TIME_OF_DAY,
    UNKNOWN_CATEGORY,
    Vocabularies,
)
from .ingest import ContextEntry, RawSampleSeries

log = logging.getLogger(__name__)


class TimelineError(Exception):
    """Fatal problem while building or loading a timeline."""


def to_epoch(ts: datetime) -> int:
    """Naive civil datetime -> integer epoch seconds (civil time kept as-is)."""
    return calendar.timegm(ts.timetuple())


def from_epoch(epoch: int) -> datetime:
    return datetime(1970, 1, 1) + timedelta(seconds=int(epoch))


@dataclass
class UniformTimeline:
    """One row per second; per-hand channels plus shared context columns.

    Arrays are frozen after construction; build a modified copy with
    ``dataclasses.replace`` instead of mutating.  Category codes index into
    ``vocab``; -1 means no context reported yet (the "unknown" token).
    """

    start: datetime
    hr: dict[str, np.ndarray]
    hr_confidence: dict[str, np.ndarray]
    steps: dict[str, np.ndarray]
    calories: dict[str, np.ndarray]
    wear_mask: dict[str, np.ndarray]
    location_codes: np.ndarray
    activity_codes: np.ndarray
    tod_codes: np.ndarray
    activity_sets: list[tuple[str, ...]]
    hand_labels: dict[str, str]
    device_setting: str
    vocab: Vocabularies = field(default_factory=Vocabularies)
    utc_offset_hours: float = 0.0

    def __post_init__(self) -> None:
        n = len(self.location_codes)
        for name, per_hand in (("hr", self.hr), ("hr_confidence", self.hr_confidence),
                               ("steps", self.steps), ("calories", self.calories),
                               ("wear_mask", self.wear_mask)):
            for hand in HANDS:
                if hand not in per_hand:
                    raise TimelineError(f"{name} missing hand {hand!r}")
                if len(per_hand[hand]) != n:
                    raise TimelineError(f"{name}[{hand}] length mismatch")
                per_hand[hand].flags.writeable = False
        for arr in (self.location_codes, self.activity_codes, self.tod_codes):
            if len(arr) != n:
                raise TimelineError("context column length mismatch")
            arr.flags.writeable = False
        if len(self.activity_sets) != n:
            raise TimelineError("activity_sets length mismatch")
        roles = sorted(self.hand_labels.values())
        if set(self.hand_labels) != set(HANDS) or roles != ["dominant", "nondominant"]:
            raise TimelineError("hand_labels must map one hand to dominant and one "
                                "to nondominant")

    def __len__(self) -> int:
        return len(self.location_codes)

    @property
    def start_epoch(self) -> int:
        return to_epoch(self.start)

    @property
    def dominant_hand(self) -> str:
        return next(h for h, role in self.hand_labels.items() if role == "dominant")

    def second_epochs(self) -> np.ndarray:
        return self.start_epoch + np.arange(len(self), dtype=np.int64)

    def location_token(self, code: int) -> str:
        return UNKNOWN_CATEGORY if code < 0 else self.vocab.locations[code]

    def activity_token(self, code: int) -> str:
        return UNKNOWN_CATEGORY if code < 0 else self.vocab.activities[code]


FILL_POLICIES = ("linear_interpolate", "zero_fill")


def _sample_arrays(series: RawSampleSeries) -> tuple[np.ndarray, np.ndarray]:
    epochs = np.array([to_epoch(s.timestamp) for s in series.samples], dtype=np.float64)
    values = np.array([s.value for s in series.samples], dtype=np.float64)
    return epochs, values


def resample_uniform(series: RawSampleSeries, start_epoch: int, end_epoch: int,
                     fill_policy: str) -> np.ndarray:
    """Resample one channel onto the inclusive grid [start, end] at 1 Hz.

    linear_interpolate: straight lines between samples, constant beyond the
    ends.  zero_fill: raw values land on their own second, zero elsewhere.
    """
    if fill_policy not in FILL_POLICIES:
        raise ValueError(f"fill_policy must be one of {FILL_POLICIES}")
    if end_epoch <= start_epoch:
        raise TimelineError("grid end must be after grid start")
    n = end_epoch - start_epoch + 1
    if fill_policy == "linear_interpolate":
        if not series.samples:
            raise TimelineError(
                f"cannot interpolate empty series {series.channel}/{series.hand}")
        epochs, values = _sample_arrays(series)
        grid = np.arange(start_epoch, end_epoch + 1, dtype=np.float64)
        return np.interp(grid, epochs, values)
    out = np.zeros(n, dtype=np.float64)
    if not series.samples:
        log.warning("zero_fill on empty series %s/%s", series.channel, series.hand)
        return out
    epochs, values = _sample_arrays(series)
    idx = epochs.astype(np.int64) - start_epoch
    keep = (idx >= 0) & (idx < n)
    out[idx[keep]] = values[keep]
    return out


def interpolation_validity(series: RawSampleSeries, start_epoch: int, end_epoch: int,
                           max_gap_s: int = MAX_INTERPOLATION_GAP_S) -> np.ndarray:
    """False for grid seconds strictly inside a sample gap longer than max_gap_s.

    Interpolating across a long device-idle gap fabricates physiology; those
    seconds are masked instead.  Seconds at the samples themselves, and the
    constant-extension region beyond the ends, stay valid.
    """
    n = end_epoch - start_epoch + 1
    valid = np.ones(n, dtype=bool)
    if len(series.samples) < 2:
        return valid
    epochs = np.array([to_epoch(s.timestamp) for s in series.samples], dtype=np.int64)
    grid = np.arange(start_epoch, end_epoch + 1, dtype=np.int64)
    left = np.searchsorted(epochs, grid, side="right") - 1
    interior = (left >= 0) & (left < len(epochs) - 1)
    li = np.clip(left, 0, len(epochs) - 2)
    gap_long = (epochs[li + 1] - epochs[li]) > max_gap_s
    strictly_between = interior & (grid != epochs[li]) & gap_long
    valid[strictly_between] = False
    return valid


def wear_intervals(entries: list[ContextEntry]) -> list[tuple[int, int | None]]:
    """Half-open [removed, worn) epoch intervals; None end = never re-worn."""
    intervals: list[tuple[int, int | None]] = []
    open_start: int | None = None
    for entry in entries:
        if entry.wear_flag == "removed":
            if open_start is None:
                open_start = to_epoch(entry.timestamp)
        elif entry.wear_flag == "worn":
            if open_start is None:
                log.warning("worn flag at %s with no preceding removed flag, ignored",
                            entry.timestamp.isoformat())
            else:
                intervals.append((open_start, to_epoch(entry.timestamp)))
                open_start = None
    if open_start is not None:
        intervals.append((open_start, None))
    return intervals


def apply_wear_mask(timeline: UniformTimeline, entries: list[ContextEntry],
                    hands: tuple[str, ...] = HANDS) -> UniformTimeline:
    """Mask seconds from each removed flag until the next worn flag.

    Both hands share the mask by default (devices come off together for
    charging); pass a single hand to mask one side only.
    """
    n = len(timeline)
    start = timeline.start_epoch
    off = np.zeros(n, dtype=bool)
    for lo, hi in wear_intervals(entries):
        a = max(lo - start, 0)
        b = n if hi is None else min(hi - start, n)
        if a < b:
            off[a:b] = True
    new_mask = {
        hand: (timeline.wear_mask[hand] & ~off) if hand in hands
        else timeline.wear_mask[hand]
        for hand in HANDS
    }
    return replace(timeline, wear_mask=new_mask)


def assign_time_of_day(timestamp: datetime) -> str:
    """Morning [06,12), Noon [12,14), Afternoon [14,18), Evening otherwise."""
    return TIME_OF_DAY[_tod_code(timestamp.hour)]


def _tod_code(hour: int) -> int:
    if MORNING_START_H <= hour < NOON_START_H:
        return 0
    if NOON_START_H <= hour < AFTERNOON_START_H:
        return 1
    if AFTERNOON_START_H <= hour < EVENING_START_H:
        return 2
    return 3


def time_of_day_codes(grid_epochs: np.ndarray, utc_offset_hours: float = 0.0) -> np.ndarray:
    hours = ((grid_epochs + int(round(utc_offset_hours * 3600))) % 86400) // 3600
    codes = np.full(len(grid_epochs), 3, dtype=np.int64)
    codes[(hours >= MORNING_START_H) & (hours < NOON_START_H)] = 0
    codes[(hours >= NOON_START_H) & (hours < AFTERNOON_START_H)] = 1
    codes[(hours >= AFTERNOON_START_H) & (hours < EVENING_START_H)] = 2
    return codes


def _fill_context(entries: list[ContextEntry], start_epoch: int, n: int,
                  vocab: Vocabularies) -> tuple[np.ndarray, np.ndarray, list[tuple[str, ...]]]:
    """Per-field forward fill.

    Each entry updates only the fields it reports (a survey entry is a delta,
    not a full snapshot); unreported fields keep their previous value.  Before
    the first report a field is unknown (code -1, empty activity set).
    """
    loc = np.full(n, -1, dtype=np.int64)
    act = np.full(n, -1, dtype=np.int64)
    sets: list[tuple[str, ...]] = [()] * n
    cur_loc = -1
    cur_act = -1
    cur_set: tuple[str, ...] = ()
    prev_idx = 0
    for entry in sorted(entries, key=lambda e: e.timestamp):
        idx = min(max(to_epoch(entry.timestamp) - start_epoch, 0), n)
        if idx > prev_idx:
            loc[prev_idx:idx] = cur_loc
            act[prev_idx:idx] = cur_act
            if cur_set:
                sets[prev_idx:idx] = [cur_set] * (idx - prev_idx)
            prev_idx = idx
        if entry.location is not None:
            cur_loc = vocab.locations.index(entry.location)
        if entry.activities:
            cur_act = vocab.activities.index(entry.activities[0])
            cur_set = entry.activities
    if prev_idx < n:
        loc[prev_idx:] = cur_loc
        act[prev_idx:] = cur_act
        if cur_set:
            sets[prev_idx:] = [cur_set] * (n - prev_idx)
    return loc, act, sets


def build_labeled_timeline(series: dict[str, dict[str, RawSampleSeries]],
                           entries: list[ContextEntry],
                           dominant_hand: str,
                           device_setting: str,
                           vocab: Vocabularies | None = None,
                           max_interpolation_gap_s: int = MAX_INTERPOLATION_GAP_S,
                           utc_offset_hours: float = 0.0) -> UniformTimeline:
    """Assemble the labeled 1 Hz timeline from parsed per-hand series.

    The grid is the inclusive intersection of both hands' heart-rate spans;
    zero overlap is fatal.  Wear flags and long interpolation gaps are folded
    into the per-hand wear masks.
    """
    vocab = vocab or Vocabularies()
    if dominant_hand not in HANDS:
        raise TimelineError(f"dominant_hand must be one of {HANDS}")
    spans = {}
    for hand in HANDS:
        hr = series[hand]["heart_rate"]
        if not hr.samples:
            raise TimelineError(f"no heart-rate samples for hand {hand!r}")
        spans[hand] = (to_epoch(hr.samples[0].timestamp), to_epoch(hr.samples[-1].timestamp))
    start_epoch = max(s[0] for s in spans.values())
    end_epoch = min(s[1] for s in spans.values())
    if end_epoch <= start_epoch:
        raise TimelineError("hands' coverage does not overlap")
    n = end_epoch - start_epoch + 1

    hr: dict[str, np.ndarray] = {}
    conf: dict[str, np.ndarray] = {}
    steps: dict[str, np.ndarray] = {}
    calories: dict[str, np.ndarray] = {}
    mask: dict[str, np.ndarray] = {}
    grid = np.arange(start_epoch, end_epoch + 1, dtype=np.int64)
    for hand in HANDS:
        hr_series = series[hand]["heart_rate"]
        hr[hand] = resample_uniform(hr_series, start_epoch, end_epoch, "linear_interpolate")
        epochs = np.array([to_epoch(s.timestamp) for s in hr_series.samples], dtype=np.int64)
        confs = np.array([s.confidence if s.confidence is not None else 0
                          for s in hr_series.samples], dtype=np.int64)
        nearest_prev = np.clip(np.searchsorted(epochs, grid, side="right") - 1,
                               0, len(epochs) - 1)
        conf[hand] = confs[nearest_prev]
        steps[hand] = resample_uniform(series[hand]["steps"], start_epoch, end_epoch,
                                       "zero_fill")
        calories[hand] = resample_uniform(series[hand]["calories"], start_epoch,
                                          end_epoch, "zero_fill")
        mask[hand] = interpolation_validity(hr_series, start_epoch, end_epoch,
                                            max_interpolation_gap_s)

    loc, act, sets = _fill_context(entries, start_epoch, n, vocab)
    timeline = UniformTimeline(
        start=from_epoch(start_epoch),
        hr=hr, hr_confidence=conf, steps=steps, calories=calories, wear_mask=mask,
        location_codes=loc, activity_codes=act,
        tod_codes=time_of_day_codes(grid, utc_offset_hours),
        activity_sets=sets,
        hand_labels={hand: ("dominant" if hand == dominant_hand else "nondominant")
                     for hand in HANDS},
        device_setting=device_setting, vocab=vocab,
        utc_offset_hours=utc_offset_hours,
    )
    return apply_wear_mask(timeline, entries)


# ---------------------------------------------------------------------------
# Timeline file: '#'-prefixed JSON metadata line, then one CSV row per second
# ---------------------------------------------------------------------------

TIMELINE_COLUMNS = (
    "t",
    "hr_left", "hr_confidence_left", "steps_left", "calories_left", "wear_left",
    "hr_right", "hr_confidence_right", "steps_right", "calories_right", "wear_right",
    "location", "activity", "activities", "time_of_day",
)


def write_timeline_file(timeline: UniformTimeline, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "kind": "whichwrist-timeline",
        "version": 1,
        "start": timeline.start.isoformat(sep="T", timespec="seconds"),
        "device_setting": timeline.device_setting,
        "hand_labels": timeline.hand_labels,
        "utc_offset_hours": timeline.utc_offset_hours,
        "locations": list(timeline.vocab.locations),
        "activities": list(timeline.vocab.activities),
    }
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow(TIMELINE_COLUMNS)
        for i in range(len(timeline)):
            row = [str(i)]
            for hand in HANDS:
                row.extend((
                    repr(float(timeline.hr[hand][i])),
                    str(int(timeline.hr_confidence[hand][i])),
                    repr(float(timeline.steps[hand][i])),
                    repr(float(timeline.calories[hand][i])),
                    "1" if timeline.wear_mask[hand][i] else "0",
                ))
            row.extend((
                timeline.location_token(int(timeline.location_codes[i])),
                timeline.activity_token(int(timeline.activity_codes[i])),
                ";".join(timeline.activity_sets[i]),
                TIME_OF_DAY[int(timeline.tod_codes[i])],
            ))
            writer.writerow(row)


def read_timeline_file(path: str | Path) -> UniformTimeline:
    path = Path(path)
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            header = fh.readline()
            if not header.startswith("# "):
                raise TimelineError(f"{path} is not a timeline file (missing metadata line)")
            meta = json.loads(header[2:])
            reader = csv.reader(fh)
            columns = tuple(next(reader))
            if columns != TIMELINE_COLUMNS:
                raise TimelineError(f"{path}: unexpected timeline columns {columns}")
            rows = list(reader)
    except OSError as exc:
        raise TimelineError(f"cannot read timeline file {path}: {exc}") from exc
    if not rows:
        raise TimelineError(f"{path}: timeline file holds no rows")
    vocab = Vocabularies(locations=tuple(meta["locations"]),
                         activities=tuple(meta["activities"]))
    n = len(rows)
    hr = {h: np.empty(n) for h in HANDS}
    conf = {h: np.empty(n, dtype=np.int64) for h in HANDS}
    steps = {h: np.empty(n) for h in HANDS}
    calories = {h: np.empty(n) for h in HANDS}
    mask = {h: np.empty(n, dtype=bool) for h in HANDS}
    loc = np.empty(n, dtype=np.int64)
    act = np.empty(n, dtype=np.int64)
    tod = np.empty(n, dtype=np.int64)
    sets: list[tuple[str, ...]] = [()] * n
    loc_index = {tok: i for i, tok in enumerate(vocab.locations)}
    act_index = {tok: i for i, tok in enumerate(vocab.activities)}
    tod_index = {tok: i for i, tok in enumerate(TIME_OF_DAY)}
    for i, row in enumerate(rows):
        vals = dict(zip(TIMELINE_COLUMNS, row))
        for hand in HANDS:
            hr[hand][i] = float(vals[f"hr_{hand}"])
            conf[hand][i] = int(vals[f"hr_confidence_{hand}"])
            steps[hand][i] = float(vals[f"steps_{hand}"])
            calories[hand][i] = float(vals[f"calories_{hand}"])
            mask[hand][i] = vals[f"wear_{hand}"] == "1"
        loc[i] = loc_index.get(vals["location"], -1)
        act[i] = act_index.get(vals["activity"], -1)
        tod[i] = tod_index[vals["time_of_day"]]
        if vals["activities"]:
            sets[i] = tuple(vals["activities"].split(";"))
    return UniformTimeline(
        start=datetime.fromisoformat(meta["start"]),
        hr=hr, hr_confidence=conf, steps=steps, calories=calories, wear_mask=mask,
        location_codes=loc, activity_codes=act, tod_codes=tod, activity_sets=sets,
        hand_labels=dict(meta["hand_labels"]),
        device_setting=meta["device_setting"], vocab=vocab,
        utc_offset_hours=float(meta.get("utc_offset_hours", 0.0)),
    )
