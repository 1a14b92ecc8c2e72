"""Paired two-hand dataset generator with controllable asymmetry.

Produces raw per-hand export files plus a context log in the ingest format,
with a known dominant hand recorded alongside.  The heart-rate model is a
shared piecewise-constant activity baseline plus wrist-local measurement
effects: a slow AR(1) fluctuation, oscillatory bursts wide enough that the
roughly 7-second sampling cannot step over them, and white sensor noise.
The fluctuation and bursts are drawn independently per wrist (optical
wrist sensors are dominated by arm-motion artifacts, not the common cardiac
trend); keeping them shared would give the two rows of a window a private
signature that row-wise evaluation splits can exploit.  Dominant-hand
channels are perturbed only during hands-busy activity; with the symmetric
parameter set the per-wrist effects are identically distributed and the
hands are exchangeable.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .config import DEFAULT_ACTIVITIES, DEFAULT_LOCATIONS, HANDS
from .ingest import (
    ContextEntry,
    RawSample,
    RawSampleSeries,
    write_context_log,
    write_count_export,
    write_hr_export,
)
from .timeline import from_epoch, to_epoch


class SynthError(Exception):
    pass


@dataclass(frozen=True)
class AsymmetryParams:
    """Knobs for how differently the dominant hand behaves.

    hr_peak_rate_boost adds bursts per minute on the dominant hand during
    hands-busy activity; hr_noise_boost adds sensor noise (bpm std) there;
    step_undercount_factor scales the non-dominant hand's step rate during
    tool-use activities (1.0 means no undercount).
    """
    hr_peak_rate_boost: float = 0.5
    hr_noise_boost: float = 1.0
    step_undercount_factor: float = 0.9

    def __post_init__(self) -> None:
        for name in ("hr_peak_rate_boost", "hr_noise_boost",
                     "step_undercount_factor"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise SynthError(f"{name} must be finite, got {value!r}")
        if self.hr_peak_rate_boost < 0:
            raise SynthError("hr_peak_rate_boost must be >= 0")
        if self.hr_noise_boost < 0:
            raise SynthError("hr_noise_boost must be >= 0")
        if not 0.0 <= self.step_undercount_factor <= 1.0:
            raise SynthError("step_undercount_factor must be in [0, 1]")

    @classmethod
    def symmetric(cls) -> "AsymmetryParams":
        """Zero asymmetry: no extra peaks, no extra noise, no undercount."""
        return cls(hr_peak_rate_boost=0.0, hr_noise_boost=0.0,
                   step_undercount_factor=1.0)

    @property
    def is_symmetric(self) -> bool:
        return (self.hr_peak_rate_boost == 0.0 and self.hr_noise_boost == 0.0
                and self.step_undercount_factor == 1.0)


@dataclass(frozen=True)
class ScheduleSegment:
    start: datetime
    duration_s: int
    activity: str
    location: str

    @property
    def end(self) -> datetime:
        return self.start + timedelta(seconds=self.duration_s)


@dataclass(frozen=True)
class ActivitySchedule:
    segments: tuple[ScheduleSegment, ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise SynthError("schedule has no segments")
        prev = None
        for seg in self.segments:
            if seg.duration_s <= 0:
                raise SynthError(f"non-positive segment duration at {seg.start}")
            if seg.activity not in DEFAULT_ACTIVITIES:
                raise SynthError(f"unknown activity {seg.activity!r}")
            if seg.location not in DEFAULT_LOCATIONS:
                raise SynthError(f"unknown location {seg.location!r}")
            if prev is not None and seg.start != prev.end:
                raise SynthError(f"segments not contiguous at {seg.start}")
            prev = seg

    @property
    def start(self) -> datetime:
        return self.segments[0].start

    @property
    def end(self) -> datetime:
        return self.segments[-1].end

    @property
    def total_seconds(self) -> int:
        return int((self.end - self.start).total_seconds())


BASE_DATE = datetime(2022, 10, 3)

# no hand asymmetry while hands are idle; matches the premise that only
# hands-busy activity separates the wrists
IDLE_ACTIVITIES = frozenset({"sleeping", "movies", "meeting"})
TOOL_USE_ACTIVITIES = frozenset({"writing", "eating", "cooking", "dishwashing"})

ACTIVITY_HR_MEAN = {
    "sleeping": 55.0, "movies": 60.0, "working": 62.0, "writing": 62.0,
    "meeting": 64.0, "eating": 66.0, "hygiene": 66.0, "socializing": 68.0,
    "dishwashing": 70.0, "cooking": 72.0, "shopping": 76.0, "chores": 78.0,
    "commuting": 85.0, "walking": 90.0, "exercising": 130.0, "other": 65.0,
}

# steps per minute; sedentary activities sit near zero so their windows are
# dropped by the default nonzero-count filter
ACTIVITY_STEP_RATE = {
    "sleeping": 0.0, "movies": 0.02, "meeting": 0.05, "working": 0.05,
    "writing": 0.1, "eating": 0.25, "socializing": 0.3, "hygiene": 0.35,
    "dishwashing": 1.0, "cooking": 1.2, "other": 2.0, "commuting": 0.8,
    "chores": 25.0, "shopping": 45.0, "exercising": 20.0, "walking": 105.0,
}

# kcal per minute; strictly positive everywhere so calories never read zero
ACTIVITY_CALORIE_RATE = {
    "sleeping": 1.1, "movies": 1.3, "working": 1.4, "writing": 1.4,
    "meeting": 1.4, "eating": 1.5, "socializing": 1.5, "hygiene": 1.6,
    "dishwashing": 2.0, "cooking": 2.2, "other": 1.4, "commuting": 1.8,
    "chores": 3.5, "shopping": 3.0, "exercising": 9.0, "walking": 4.5,
}

# shared oscillatory-burst rate per minute
ACTIVITY_BURST_RATE = {
    "sleeping": 0.02, "movies": 0.1, "working": 0.15, "writing": 0.15,
    "meeting": 0.15, "eating": 0.2, "socializing": 0.2, "hygiene": 0.2,
    "dishwashing": 0.25, "cooking": 0.25, "other": 0.2, "commuting": 0.3,
    "chores": 0.4, "shopping": 0.4, "exercising": 0.15, "walking": 0.3,
}

ACTIVITY_AROUSAL = {
    "sleeping": 1, "movies": 2, "working": 3, "writing": 3, "meeting": 3,
    "eating": 2, "socializing": 4, "hygiene": 2, "dishwashing": 2,
    "cooking": 3, "other": 2, "commuting": 2, "chores": 3, "shopping": 3,
    "exercising": 5, "walking": 3,
}

HR_AR1_PHI = 0.995
HR_AR1_STD = 2.0
HR_SENSOR_NOISE_STD = 0.6
BURST_AMP_RANGE = (7.0, 12.0)
BURST_WIDTH_RANGE = (12.0, 20.0)
# boost-injected bursts ride on top of everything else, so they get extra
# height to survive merging with coincident background bursts, and extra
# width so the sparse raw sampling cannot straddle one without catching a
# prominent sample (a 12 s bump sampled 5 s off-center keeps 7% of its
# height; a 24 s bump keeps 63%)
BOOST_AMP_RANGE = (9.0, 14.0)
BOOST_WIDTH_RANGE = (20.0, 28.0)
# minimum gap between burst centers: half-width sums reach 20 s and the peak
# counter suppresses maxima closer than its separation rule, so anything
# tighter than this merges two injected bursts into one counted peak
BURST_MIN_SPACING_S = 30.0

HR_INTERVAL_RANGE = (5, 10)        # uniform ints; mean 7 s
CALORIE_INTERVAL_RANGE = (45, 76)  # mean 60 s

# Step exports arrive densely while the wearer moves and sparsely at rest
# (count channels report when counts change); the blend still averages the
# documented ~2 min cadence over a full day.
STEP_DENSE_INTERVAL_RANGE = (50, 71)
STEP_SPARSE_INTERVAL_RANGE = (110, 151)
STEP_DENSE_RATE_PER_MIN = 5.0

# (activity, location, min minutes, max minutes); durations jittered per day
_DAY_TEMPLATE = (
    ("hygiene", "home", 12, 20),
    ("eating", "home", 20, 35),
    ("walking", "outdoors", 8, 15),
    ("working", "office", 150, 200),
    ("meeting", "office", 30, 60),
    ("eating", "restaurant", 30, 45),
    ("working", "office", 150, 200),
    ("commuting", "transit", 20, 35),
    ("exercising", "gym", 30, 45),
    ("cooking", "home", 25, 40),
    ("eating", "home", 25, 35),
    ("dishwashing", "home", 10, 18),
)

_EVENING_OPTIONS = (
    ("movies", "home", 60, 110),
    ("socializing", "friend_home", 60, 110),
    ("writing", "home", 60, 100),
    ("chores", "home", 45, 75),
    ("shopping", "store", 45, 75),
)


def generate_schedule(days: int, seed: int) -> ActivitySchedule:
    """Deterministic diurnal schedule: sleep to the small hours, work blocks,
    meals, one exercise block per day, and a varying evening activity."""
    if days < 1:
        raise SynthError(f"days must be >= 1, got {days}")
    rng = np.random.default_rng(seed)
    segments: list[ScheduleSegment] = []
    for day in range(days):
        midnight = BASE_DATE + timedelta(days=day)
        cursor = 0  # minutes into the day
        wake = 390 + int(rng.integers(0, 46))
        plan: list[tuple[str, str, int]] = [("sleeping", "home", wake)]
        cursor = wake
        for activity, location, lo, hi in _DAY_TEMPLATE:
            plan.append((activity, location, int(rng.integers(lo, hi + 1))))
        evening = _EVENING_OPTIONS[int(rng.integers(0, len(_EVENING_OPTIONS)))]
        plan.append((evening[0], evening[1], int(rng.integers(evening[2], evening[3] + 1))))
        plan.append(("hygiene", "home", 10 + int(rng.integers(0, 6))))
        cursor = sum(d for _, _, d in plan)
        if cursor >= 1440:
            raise SynthError("day template overflows 24 hours")
        plan.append(("sleeping", "home", 1440 - cursor))
        minute = 0
        for activity, location, duration in plan:
            segments.append(ScheduleSegment(
                start=midnight + timedelta(minutes=minute),
                duration_s=duration * 60, activity=activity, location=location))
            minute += duration
    return ActivitySchedule(segments=tuple(segments))


def _ar1_series(rng: np.random.Generator, n: int, phi: float,
                stationary_std: float) -> np.ndarray:
    """Stationary AR(1) sampled blockwise so long series stay vectorized."""
    innov_std = stationary_std * math.sqrt(1.0 - phi * phi)
    eps = rng.normal(0.0, innov_std, size=n)
    out = np.empty(n)
    x = float(rng.normal(0.0, stationary_std))
    block = 2048
    for start in range(0, n, block):
        e = eps[start:start + block]
        m = len(e)
        steps = np.arange(1, m + 1)
        # x_t = phi^(t+1) x0 + phi^t * cumsum(e_i / phi^i)
        scaled = np.cumsum(e * phi ** (-steps))
        out[start:start + m] = phi ** steps * (x + scaled)
        x = float(out[start + m - 1])
    return out


def _per_second_table(schedule: ActivitySchedule, table: dict[str, float]) -> np.ndarray:
    values = [table[seg.activity] for seg in schedule.segments]
    lengths = [seg.duration_s for seg in schedule.segments]
    return np.repeat(np.asarray(values, dtype=np.float64), lengths)


def _per_second_mask(schedule: ActivitySchedule, members: frozenset[str]) -> np.ndarray:
    values = [seg.activity in members for seg in schedule.segments]
    lengths = [seg.duration_s for seg in schedule.segments]
    return np.repeat(np.asarray(values, dtype=bool), lengths)


def _place_center(kept: list[float], cand: float) -> bool:
    """Insert cand into the sorted center list unless a neighbor is too close."""
    i = bisect.bisect_left(kept, cand)
    if i > 0 and cand - kept[i - 1] < BURST_MIN_SPACING_S:
        return False
    if i < len(kept) and kept[i] - cand < BURST_MIN_SPACING_S:
        return False
    kept.insert(i, cand)
    return True


def _draw_bursts(rng: np.random.Generator, schedule: ActivitySchedule,
                 rate_per_min, mask: np.ndarray | None = None,
                 amp_range: tuple[float, float] = BURST_AMP_RANGE,
                 width_range: tuple[float, float] = BURST_WIDTH_RANGE,
                 avoid: list[float] | None = None,
                 minute_interior: bool = False,
                 ) -> tuple[np.ndarray, list[float]]:
    """Sum of raised-cosine bumps at near-Poisson times; 1 Hz series + centers.

    Burst counts per segment are Poisson, but centers keep BURST_MIN_SPACING_S
    from each other and from `avoid`, so every bump stays an individually
    countable peak instead of merging with a neighbor into one maximum.  A
    candidate that cannot find room after a bounded number of draws is dropped
    (only plausible at rates far beyond the configured ones).

    minute_interior keeps centers in the middle half of each civil minute.
    Analysis windows tile on minute marks, and a peak whose nearest sample
    lands first or last inside a window slice has no in-window neighbors and
    is invisible to windowed counting; interior placement makes every such
    bump countable regardless of window length.
    """
    n = schedule.total_seconds
    out = np.zeros(n)
    kept = sorted(avoid) if avoid else []
    offset = 0
    for seg in schedule.segments:
        if callable(rate_per_min):
            rate = rate_per_min(seg.activity)
        else:
            rate = rate_per_min
        if mask is not None and not mask[offset]:
            rate = 0.0
        count = int(rng.poisson(rate * seg.duration_s / 60.0)) if rate > 0 else 0
        for _ in range(count):
            center = None
            for _attempt in range(50):
                cand = offset + float(rng.uniform(0.0, seg.duration_s))
                if minute_interior and not 15.0 <= cand % 60.0 <= 45.0:
                    continue
                if _place_center(kept, cand):
                    center = cand
                    break
            if center is None:
                continue
            amp = float(rng.uniform(*amp_range))
            width = float(rng.uniform(*width_range))
            lo = max(0, int(math.ceil(center - width / 2.0)))
            hi = min(n - 1, int(math.floor(center + width / 2.0)))
            if hi < lo:
                continue
            t = np.arange(lo, hi + 1, dtype=np.float64)
            out[lo:hi + 1] += amp * 0.5 * (1.0 + np.cos(2.0 * np.pi * (t - center) / width))
        offset += seg.duration_s
    return out, kept


def _sample_offsets(rng: np.random.Generator, span_s: int,
                    interval_range: tuple[int, int]) -> np.ndarray:
    lo, hi = interval_range
    n_draw = span_s // lo + 2
    gaps = rng.integers(lo, hi, size=n_draw)
    offsets = np.cumsum(gaps) - gaps[0] + int(rng.integers(0, lo))
    return offsets[offsets < span_s].astype(np.int64)


def _step_offsets(rng: np.random.Generator, dense: np.ndarray) -> np.ndarray:
    """Step sample times: short gaps while moving, long gaps otherwise."""
    n = len(dense)
    offsets = []
    t = int(rng.integers(0, STEP_DENSE_INTERVAL_RANGE[0]))
    while t < n:
        offsets.append(t)
        lo, hi = (STEP_DENSE_INTERVAL_RANGE if dense[t]
                  else STEP_SPARSE_INTERVAL_RANGE)
        t += int(rng.integers(lo, hi))
    return np.asarray(offsets, dtype=np.int64)


def _drop_removed(offsets: np.ndarray, removals: list[tuple[int, int]]) -> np.ndarray:
    keep = np.ones(len(offsets), dtype=bool)
    for lo, hi in removals:
        keep &= ~((offsets >= lo) & (offsets < hi))
    return offsets[keep]


@dataclass
class SynthResult:
    root: Path
    dominant_hand: str
    params: AsymmetryParams
    seed: int
    schedule: ActivitySchedule
    context_log: Path
    ground_truth: Path


def synthesize_paired_dataset(schedule: ActivitySchedule, params: AsymmetryParams,
                              seed: int, out_dir: str | Path,
                              dominant_hand: str = "right") -> SynthResult:
    if dominant_hand not in HANDS:
        raise SynthError(f"dominant_hand must be one of {HANDS}")
    root = Path(out_dir)
    rng = np.random.default_rng(seed)
    n = schedule.total_seconds
    t0 = to_epoch(schedule.start)

    hr_mean = _per_second_table(schedule, ACTIVITY_HR_MEAN)
    step_rate = _per_second_table(schedule, ACTIVITY_STEP_RATE) / 60.0
    cal_rate = _per_second_table(schedule, ACTIVITY_CALORIE_RATE) / 60.0
    busy = ~_per_second_mask(schedule, IDLE_ACTIVITIES)
    tool_use = _per_second_mask(schedule, TOOL_USE_ACTIVITIES)

    # the first hygiene block of each day is a shower: device off both wrists
    removals: list[tuple[int, int]] = []
    seen_days: set = set()
    for seg in schedule.segments:
        day = seg.start.date()
        if seg.activity == "hygiene" and day not in seen_days:
            seen_days.add(day)
            lo = to_epoch(seg.start) - t0
            removals.append((lo, lo + seg.duration_s))

    step_cumrate = {
        hand: np.concatenate([[0.0], np.cumsum(
            step_rate * np.where(tool_use & (hand != dominant_hand),
                                 params.step_undercount_factor, 1.0))])
        for hand in HANDS
    }
    cal_cum = np.concatenate([[0.0], np.cumsum(cal_rate)])

    dense = _per_second_table(schedule, ACTIVITY_STEP_RATE) >= STEP_DENSE_RATE_PER_MIN

    per_hand: dict[str, dict[str, RawSampleSeries]] = {}
    for hand in HANDS:
        is_dominant = hand == dominant_hand

        # fluctuation and bursts are wrist-local; only hr_mean is shared
        trace = hr_mean + _ar1_series(rng, n, HR_AR1_PHI, HR_AR1_STD)
        base_bumps, burst_centers = _draw_bursts(
            rng, schedule, lambda a: ACTIVITY_BURST_RATE[a])
        trace += base_bumps
        if is_dominant:
            boost_bumps, _ = _draw_bursts(
                rng, schedule, params.hr_peak_rate_boost, mask=busy,
                amp_range=BOOST_AMP_RANGE, width_range=BOOST_WIDTH_RANGE,
                avoid=burst_centers, minute_interior=True)
            trace += boost_bumps
        hr_off = _drop_removed(
            _sample_offsets(rng, n, HR_INTERVAL_RANGE), removals)
        values = trace[hr_off]
        values += rng.normal(0.0, HR_SENSOR_NOISE_STD, size=len(hr_off))
        if is_dominant:
            boosted = rng.normal(0.0, 1.0, size=len(hr_off)) * params.hr_noise_boost
            values += np.where(busy[hr_off], boosted, 0.0)
        values = np.clip(np.rint(values), 25, 250)
        hr_samples = [RawSample(timestamp=from_epoch(t0 + int(o)),
                                value=float(v), confidence=3)
                      for o, v in zip(hr_off, values)]

        step_off = _drop_removed(_step_offsets(rng, dense), removals)
        cum = step_cumrate[hand]
        prev = np.concatenate([[0], step_off[:-1] + 1])
        lam = cum[step_off + 1] - cum[prev]
        counts = rng.poisson(lam)
        step_samples = [RawSample(timestamp=from_epoch(t0 + int(o)),
                                  value=float(c))
                        for o, c in zip(step_off, counts)]

        cal_off = _drop_removed(
            _sample_offsets(rng, n, CALORIE_INTERVAL_RANGE), removals)
        prev = np.concatenate([[0], cal_off[:-1] + 1])
        kcal = cal_cum[cal_off + 1] - cal_cum[prev]
        kcal = kcal * (1.0 + rng.normal(0.0, 0.03, size=len(cal_off)))
        kcal = np.maximum(np.round(kcal, 2), 0.01)
        cal_samples = [RawSample(timestamp=from_epoch(t0 + int(o)),
                                 value=float(v))
                       for o, v in zip(cal_off, kcal)]

        per_hand[hand] = {
            "heart_rate": RawSampleSeries("heart_rate", hand, hr_samples),
            "steps": RawSampleSeries("steps", hand, step_samples),
            "calories": RawSampleSeries("calories", hand, cal_samples),
        }

    entries = _context_entries(schedule, removals, t0)
    _write_dataset(root, per_hand, entries)
    ground_truth = root / "ground_truth.txt"
    ground_truth.write_text(
        f"dominant_hand: {dominant_hand}\n"
        f"seed: {seed}\n"
        f"days: {len({s.start.date() for s in schedule.segments})}\n"
        f"start: {schedule.start.isoformat()}\n"
        f"hr_peak_rate_boost: {params.hr_peak_rate_boost!r}\n"
        f"hr_noise_boost: {params.hr_noise_boost!r}\n"
        f"step_undercount_factor: {params.step_undercount_factor!r}\n",
        encoding="utf-8")
    return SynthResult(root=root, dominant_hand=dominant_hand, params=params,
                       seed=seed, schedule=schedule,
                       context_log=root / "context_log.csv",
                       ground_truth=ground_truth)


def _context_entries(schedule: ActivitySchedule, removals: list[tuple[int, int]],
                     t0: int) -> list[ContextEntry]:
    removal_starts = {lo for lo, _ in removals}
    removal_ends = {hi for _, hi in removals}
    entries = []
    for seg in schedule.segments:
        seg_off = to_epoch(seg.start) - t0
        wear = "none"
        if seg_off in removal_starts:
            wear = "removed"
        elif seg_off in removal_ends:
            wear = "worn"
        entries.append(ContextEntry(
            timestamp=seg.start, location=seg.location,
            activities=(seg.activity,),
            arousal=ACTIVITY_AROUSAL[seg.activity], wear_flag=wear))
    return entries


def _write_dataset(root: Path, per_hand: dict[str, dict[str, RawSampleSeries]],
                   entries: list[ContextEntry]) -> None:
    for hand, channels in per_hand.items():
        for channel, series in channels.items():
            by_day: dict = {}
            for sample in series.samples:
                by_day.setdefault(sample.timestamp.date(), []).append(sample)
            for day, samples in sorted(by_day.items()):
                path = root / hand / channel / f"{channel}-{day.isoformat()}.json"
                day_series = RawSampleSeries(channel, hand, samples)
                if channel == "heart_rate":
                    write_hr_export(day_series, path)
                else:
                    write_count_export(day_series, path)
    write_context_log(entries, root / "context_log.csv")
