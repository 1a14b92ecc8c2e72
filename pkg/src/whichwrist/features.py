"""Windowed feature extraction: 25 features per (window, hand).

Windows are tumbling, anchored at timeline start.  Each emitted window yields
two rows, one per hand, sharing the same context columns.  Feature order is
fixed by FEATURE_COLUMNS; the label column is hand_role.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from .config import (
    HANDS,
    PEAK_MIN_SEPARATION_S,
    PEAK_PROMINENCE_BPM,
    STANDARD_WINDOW_MINUTES,
    TIME_OF_DAY,
    UNKNOWN_CATEGORY,
)
from .timeline import UniformTimeline, from_epoch, to_epoch

log = logging.getLogger(__name__)

HR_TIME_FEATURES = (
    "hr_mean", "hr_median", "hr_std", "hr_variance", "hr_min", "hr_max",
    "hr_range", "hr_rms", "hr_iqr", "hr_p25", "hr_p75", "hr_mad",
    "hr_skewness", "hr_kurtosis", "hr_trend_slope", "hr_mean_abs_diff",
    "hr_peak_count",
)
HR_FREQ_FEATURES = ("hr_dominant_freq", "hr_total_power", "hr_spectral_entropy")
COUNT_FEATURES = ("steps_cumsum", "calories_cumsum")
CATEGORICAL_FEATURES = ("location", "activity", "time_of_day")
FEATURE_COLUMNS = HR_TIME_FEATURES + HR_FREQ_FEATURES + COUNT_FEATURES + CATEGORICAL_FEATURES

LABEL_COLUMN = "hand_role"
LABEL_TOKENS = ("nondominant", "dominant")
METADATA_COLUMNS = ("window_id", "hand", "window_start", "window_len_s", "device_setting")

# Spectral summaries need a handful of non-zero frequency bins to mean anything.
MIN_WINDOW_SECONDS = 8


class FeatureError(Exception):
    """Fatal problem while building or loading a feature matrix."""


@dataclass(frozen=True)
class WindowSpec:
    """Tumbling-window layout over the 1 Hz timeline."""

    length_minutes: int = 1
    min_valid_fraction: float = 0.5
    allow_custom_length: bool = False

    def __post_init__(self) -> None:
        if self.length_minutes not in STANDARD_WINDOW_MINUTES and not self.allow_custom_length:
            raise ValueError(
                f"window length {self.length_minutes} min is not one of "
                f"{STANDARD_WINDOW_MINUTES}; pass allow_custom_length to override")
        if self.length_minutes < 1:
            raise ValueError("window length must be at least one minute")
        if not 0.0 < self.min_valid_fraction <= 1.0:
            raise ValueError("min_valid_fraction must be in (0, 1]")

    @property
    def length_s(self) -> int:
        return self.length_minutes * 60


def partition_windows(timeline: UniformTimeline, spec: WindowSpec) -> list[tuple[int, int]]:
    """Index ranges [a, b) of emitted windows.

    A window survives when both hands' wear masks are true for at least
    min_valid_fraction of its seconds (and at least MIN_WINDOW_SECONDS, so the
    spectral features are defined).  The trailing partial window is dropped.
    """
    n = len(timeline)
    length = spec.length_s
    valid = timeline.wear_mask[HANDS[0]] & timeline.wear_mask[HANDS[1]]
    out = []
    for a in range(0, n - length + 1, length):
        count = int(valid[a:a + length].sum())
        if count >= max(spec.min_valid_fraction * length, MIN_WINDOW_SECONDS):
            out.append((a, a + length))
    return out


def extract_hr_time_features(hr: np.ndarray,
                             peak_prominence: float = PEAK_PROMINENCE_BPM,
                             peak_min_separation: int = PEAK_MIN_SEPARATION_S,
                             ) -> tuple[float, ...]:
    """The 17 time-domain summaries, in FEATURE_COLUMNS order.

    Moments are population moments (ddof 0), percentiles interpolate linearly
    between order statistics, and a zero-variance window gets skewness and
    excess kurtosis 0 by convention.
    """
    if len(hr) < 2:
        raise FeatureError("need at least 2 valid seconds for time features")
    x = np.asarray(hr, dtype=np.float64)
    mean = float(x.mean())
    centered = x - mean
    m2 = float((centered ** 2).mean())
    p25 = float(np.percentile(x, 25))
    p75 = float(np.percentile(x, 75))
    median = float(np.median(x))
    if m2 > 0.0:
        skew = float((centered ** 3).mean() / m2 ** 1.5)
        kurt = float((centered ** 4).mean() / m2 ** 2 - 3.0)
    else:
        skew = 0.0
        kurt = 0.0
    t = np.arange(len(x), dtype=np.float64)
    tc = t - t.mean()
    slope = float((tc * x).sum() / (tc ** 2).sum())
    return (
        mean,
        median,
        float(np.sqrt(m2)),
        m2,
        float(x.min()),
        float(x.max()),
        float(x.max() - x.min()),
        float(np.sqrt((x ** 2).mean())),
        p75 - p25,
        p25,
        p75,
        float(np.median(np.abs(x - median))),
        skew,
        kurt,
        slope,
        float(np.abs(np.diff(x)).mean()),
        float(count_peaks(x, peak_prominence, peak_min_separation)),
    )


def count_peaks(signal: np.ndarray, prominence: float, min_separation: int) -> int:
    """Strict local maxima with topographic prominence >= the threshold.

    Among surviving maxima closer than min_separation, a peak is suppressed
    only by a strictly higher kept peak (equal-height neighbors both count).
    """
    if prominence <= 0:
        raise ValueError("prominence must be positive")
    if min_separation < 1:
        raise ValueError("min_separation must be at least 1")
    x = np.asarray(signal, dtype=np.float64)
    if len(x) < 3:
        return 0
    inner = x[1:-1]
    maxima = np.nonzero((inner > x[:-2]) & (inner > x[2:]))[0] + 1
    if len(maxima) == 0:
        return 0

    candidates = [i for i in maxima if _prominence(x, int(i), maxima) >= prominence]
    # Highest first; leftmost first among equals so suppression is deterministic.
    candidates.sort(key=lambda i: (-x[i], i))
    kept: list[int] = []
    for i in candidates:
        if any(abs(i - j) < min_separation and x[j] > x[i] for j in kept):
            continue
        kept.append(i)
    return len(kept)


def _prominence(x: np.ndarray, peak: int, maxima: np.ndarray) -> float:
    """Height above the higher of the two bases flanking the peak.

    Each base is the minimum between the peak and the nearest strictly higher
    point on that side (or the signal end if none exists).
    """
    height = x[peak]
    left = peak
    while left > 0 and x[left - 1] <= height:
        left -= 1
    left_base = x[left:peak].min() if left < peak else height
    right = peak
    n = len(x)
    while right < n - 1 and x[right + 1] <= height:
        right += 1
    right_base = x[peak + 1:right + 1].min() if right > peak else height
    return float(height - max(left_base, right_base))


def extract_hr_freq_features(hr: np.ndarray) -> tuple[float, float, float]:
    """Dominant frequency (Hz), total power, spectral entropy (bits) at 1 Hz.

    The mean is removed, the zero-frequency bin excluded, and bin powers
    normalized so they sum to the population variance; an all-constant window
    returns (0, 0, 0) by convention.
    """
    x = np.asarray(hr, dtype=np.float64)
    n = len(x)
    if n < MIN_WINDOW_SECONDS:
        raise FeatureError(f"need at least {MIN_WINDOW_SECONDS} valid seconds "
                           "for frequency features")
    centered = x - x.mean()
    spectrum = np.fft.rfft(centered)
    power = np.abs(spectrum[1:]) ** 2 * (2.0 / n ** 2)
    if n % 2 == 0:
        power[-1] /= 2.0  # the Nyquist bin appears once in the full spectrum
    total = float(power.sum())
    if total <= 0.0:
        return 0.0, 0.0, 0.0
    dominant_bin = int(np.argmax(power)) + 1
    q = power / total
    nz = q[q > 0.0]
    entropy = float(-(nz * np.log2(nz)).sum())
    return dominant_bin / n, total, entropy


def extract_count_features(channel: np.ndarray) -> float:
    """Per-window cumulative sum over the valid seconds handed in."""
    return float(np.asarray(channel, dtype=np.float64).sum())


def _mode(codes: np.ndarray) -> int:
    values, counts = np.unique(codes, return_counts=True)
    return int(values[np.argmax(counts)])


@dataclass
class FeatureMatrix:
    """Row-per-(window, hand) matrix with fixed feature columns.

    values holds float64 data; categorical columns store indices into
    categories[name].  labels index LABEL_TOKENS.
    """

    values: np.ndarray
    labels: np.ndarray
    window_ids: np.ndarray
    hands: tuple[str, ...]
    window_starts: np.ndarray
    window_len_s: int
    device_setting: str
    categories: dict[str, tuple[str, ...]]
    feature_names: tuple[str, ...] = FEATURE_COLUMNS

    def __post_init__(self) -> None:
        n = len(self.values)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.feature_names):
            raise FeatureError("values shape does not match feature_names")
        for arr, name in ((self.labels, "labels"), (self.window_ids, "window_ids"),
                          (self.window_starts, "window_starts")):
            if len(arr) != n:
                raise FeatureError(f"{name} length mismatch")
        if len(self.hands) != n:
            raise FeatureError("hands length mismatch")
        for name in self.feature_names:
            if name in CATEGORICAL_FEATURES and name not in self.categories:
                raise FeatureError(f"missing category table for {name}")

    def __len__(self) -> int:
        return len(self.values)

    def feature_index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise KeyError(f"unknown feature {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.feature_index(name)]

    def is_categorical(self, name: str) -> bool:
        return name in self.categories

    def category_tokens(self, name: str) -> tuple[str, ...]:
        return self.categories[name]

    def label_tokens(self) -> list[str]:
        return [LABEL_TOKENS[i] for i in self.labels]

    def subset_rows(self, keep: np.ndarray) -> "FeatureMatrix":
        keep = np.asarray(keep)
        idx = np.nonzero(keep)[0] if keep.dtype == bool else keep
        return FeatureMatrix(
            values=self.values[idx].copy(),
            labels=self.labels[idx].copy(),
            window_ids=self.window_ids[idx].copy(),
            hands=tuple(self.hands[i] for i in idx),
            window_starts=self.window_starts[idx].copy(),
            window_len_s=self.window_len_s,
            device_setting=self.device_setting,
            categories=dict(self.categories),
            feature_names=self.feature_names,
        )

    def select_features(self, names: tuple[str, ...] | list[str]) -> "FeatureMatrix":
        idx = [self.feature_index(n) for n in names]
        return FeatureMatrix(
            values=self.values[:, idx].copy(),
            labels=self.labels.copy(),
            window_ids=self.window_ids.copy(),
            hands=self.hands,
            window_starts=self.window_starts.copy(),
            window_len_s=self.window_len_s,
            device_setting=self.device_setting,
            categories={n: t for n, t in self.categories.items() if n in names},
            feature_names=tuple(names),
        )


def build_feature_matrix(timeline: UniformTimeline, spec: WindowSpec,
                         peak_prominence: float = PEAK_PROMINENCE_BPM,
                         peak_min_separation: int = PEAK_MIN_SEPARATION_S,
                         ) -> FeatureMatrix:
    """Two rows per emitted window (one per hand), shared context columns.

    Context categoricals take the most common value over the window's valid
    seconds (ties break toward the smaller category index).  The heart-rate
    confidence channel is deliberately never read here.
    """
    windows = partition_windows(timeline, spec)
    if not windows:
        raise FeatureError("empty feature matrix: no window met the validity threshold")
    combined = timeline.wear_mask[HANDS[0]] & timeline.wear_mask[HANDS[1]]
    loc_tokens = timeline.vocab.locations + (UNKNOWN_CATEGORY,)
    act_tokens = timeline.vocab.activities + (UNKNOWN_CATEGORY,)
    unknown_loc = len(timeline.vocab.locations)
    unknown_act = len(timeline.vocab.activities)
    start_epoch = timeline.start_epoch

    rows = []
    labels = []
    window_ids = []
    hands: list[str] = []
    window_starts = []
    for ordinal, (a, b) in enumerate(windows):
        valid = combined[a:b]
        loc_code = _mode(timeline.location_codes[a:b][valid])
        act_code = _mode(timeline.activity_codes[a:b][valid])
        tod_code = _mode(timeline.tod_codes[a:b][valid])
        loc_idx = unknown_loc if loc_code < 0 else loc_code
        act_idx = unknown_act if act_code < 0 else act_code
        for hand in HANDS:
            hr = timeline.hr[hand][a:b][valid]
            time_feats = extract_hr_time_features(hr, peak_prominence, peak_min_separation)
            freq_feats = extract_hr_freq_features(hr)
            steps_sum = extract_count_features(timeline.steps[hand][a:b][valid])
            cal_sum = extract_count_features(timeline.calories[hand][a:b][valid])
            rows.append(time_feats + freq_feats
                        + (steps_sum, cal_sum, float(loc_idx), float(act_idx),
                           float(tod_code)))
            labels.append(LABEL_TOKENS.index(timeline.hand_labels[hand]))
            window_ids.append(ordinal)
            hands.append(hand)
            window_starts.append(start_epoch + a)

    return FeatureMatrix(
        values=np.array(rows, dtype=np.float64),
        labels=np.array(labels, dtype=np.int64),
        window_ids=np.array(window_ids, dtype=np.int64),
        hands=tuple(hands),
        window_starts=np.array(window_starts, dtype=np.int64),
        window_len_s=spec.length_s,
        device_setting=timeline.device_setting,
        categories={"location": loc_tokens, "activity": act_tokens,
                    "time_of_day": TIME_OF_DAY},
    )


# ---------------------------------------------------------------------------
# CSV persistence: '#'-prefixed JSON metadata line, header, one row per line
# ---------------------------------------------------------------------------

def write_feature_matrix(matrix: FeatureMatrix, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "kind": "whichwrist-features",
        "version": 1,
        "categories": {k: list(v) for k, v in matrix.categories.items()},
        "feature_names": list(matrix.feature_names),
    }
    header = list(METADATA_COLUMNS) + list(matrix.feature_names) + [LABEL_COLUMN]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(len(matrix)):
            row = [
                str(int(matrix.window_ids[i])),
                matrix.hands[i],
                from_epoch(int(matrix.window_starts[i])).isoformat(sep="T",
                                                                   timespec="seconds"),
                str(matrix.window_len_s),
                matrix.device_setting,
            ]
            for j, name in enumerate(matrix.feature_names):
                v = matrix.values[i, j]
                if name in matrix.categories:
                    row.append(matrix.categories[name][int(v)])
                else:
                    row.append(repr(float(v)))
            row.append(LABEL_TOKENS[int(matrix.labels[i])])
            writer.writerow(row)


def read_feature_matrix(path: str | Path) -> FeatureMatrix:
    path = Path(path)
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            first = fh.readline()
            if not first.startswith("# "):
                raise FeatureError(f"{path} is not a feature matrix file")
            meta = json.loads(first[2:])
            reader = csv.reader(fh)
            header = next(reader)
            rows = list(reader)
    except OSError as exc:
        raise FeatureError(f"cannot read feature matrix {path}: {exc}") from exc
    feature_names = tuple(meta["feature_names"])
    expected = list(METADATA_COLUMNS) + list(feature_names) + [LABEL_COLUMN]
    if header != expected:
        raise FeatureError(f"{path}: unexpected feature matrix header")
    if not rows:
        raise FeatureError(f"{path}: feature matrix holds no rows")
    categories = {k: tuple(v) for k, v in meta["categories"].items()}
    n = len(rows)
    values = np.empty((n, len(feature_names)), dtype=np.float64)
    labels = np.empty(n, dtype=np.int64)
    window_ids = np.empty(n, dtype=np.int64)
    window_starts = np.empty(n, dtype=np.int64)
    hands = []
    base = len(METADATA_COLUMNS)
    for i, row in enumerate(rows):
        window_ids[i] = int(row[0])
        hands.append(row[1])
        window_starts[i] = to_epoch(datetime.fromisoformat(row[2]))
        for j, name in enumerate(feature_names):
            cell = row[base + j]
            if name in categories:
                values[i, j] = categories[name].index(cell)
            else:
                values[i, j] = float(cell)
        labels[i] = LABEL_TOKENS.index(row[-1])
    return FeatureMatrix(
        values=values, labels=labels, window_ids=window_ids, hands=tuple(hands),
        window_starts=window_starts, window_len_s=int(rows[0][3]),
        device_setting=rows[0][4], categories=categories,
        feature_names=feature_names,
    )
