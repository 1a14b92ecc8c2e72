"""Vocabularies, defaults, and the validated pipeline configuration."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

HANDS = ("left", "right")
CHANNELS = ("heart_rate", "steps", "calories", "altitude")
COUNT_CHANNELS = ("steps", "calories", "altitude")
HAND_ROLES = ("dominant", "nondominant")
DEVICE_SETTINGS = ("default_both_nondominant", "configured_per_hand")
WEAR_FLAGS = ("none", "removed", "worn")
TIME_OF_DAY = ("Morning", "Noon", "Afternoon", "Evening")

# 10 locations / 16 activities; the source study never enumerates its
# vocabularies, so these are the documented defaults and stay configurable.
DEFAULT_LOCATIONS = (
    "home", "office", "campus", "gym", "store",
    "restaurant", "transit", "outdoors", "friend_home", "other",
)
DEFAULT_ACTIVITIES = (
    "sleeping", "eating", "cooking", "dishwashing", "chores", "writing",
    "working", "meeting", "movies", "exercising", "walking", "commuting",
    "shopping", "socializing", "hygiene", "other",
)

# Implicit token for seconds that precede the first context entry.
UNKNOWN_CATEGORY = "unknown"

AROUSAL_LEVELS = (1, 2, 3, 4, 5)
MAX_SELECTIONS = 4

HR_BPM_MIN = 25.0
HR_BPM_MAX = 250.0
MALFORMED_TOLERANCE = 0.01

# Seconds inside a heart-rate sampling gap longer than this are masked out
# instead of being bridged by interpolation.
MAX_INTERPOLATION_GAP_S = 900

STANDARD_WINDOW_MINUTES = (1, 5, 10, 20, 40)

PEAK_PROMINENCE_BPM = 3.0
PEAK_MIN_SEPARATION_S = 5

# Time-of-day boundaries (start hour of each range; Evening wraps past
# midnight).  The four ranges tile the 24-hour day.
MORNING_START_H = 6
NOON_START_H = 12
AFTERNOON_START_H = 14
EVENING_START_H = 18


class ConfigError(ValueError):
    """Invalid pipeline configuration or vocabulary."""


@dataclass(frozen=True)
class Vocabularies:
    locations: tuple[str, ...] = DEFAULT_LOCATIONS
    activities: tuple[str, ...] = DEFAULT_ACTIVITIES

    def validate(self) -> None:
        for name, vocab in (("locations", self.locations), ("activities", self.activities)):
            if len(vocab) != len(set(vocab)):
                raise ConfigError(f"duplicate tokens in {name} vocabulary")
            if UNKNOWN_CATEGORY in vocab:
                raise ConfigError(f"'{UNKNOWN_CATEGORY}' is reserved and may not appear in {name}")


@dataclass
class PipelineConfig:
    """Everything a pipeline run needs, validated before any stage runs.

    Loaded from a JSON file (see README for the schema); unknown keys are
    rejected rather than ignored so typos fail loudly.
    """

    input_dir: str = "."
    output_dir: str = "out"
    dominant_hand: str = "left"
    device_setting: str = "default_both_nondominant"
    window_minutes: int = 1
    allow_custom_window: bool = False
    min_valid_fraction: float = 0.5
    max_interpolation_gap_s: int = MAX_INTERPOLATION_GAP_S
    peak_prominence_bpm: float = PEAK_PROMINENCE_BPM
    peak_min_separation_s: int = PEAK_MIN_SEPARATION_S
    discretization_bins: int = 16
    discretization_strategy: str = "quantile"
    mrmr_scheme: str = "miq"
    mrmr_top_k: int = 4
    excluded_activities: tuple[str, ...] = ("sleeping", "movies", "meeting")
    require_nonzero: tuple[str, ...] = ("steps_cumsum", "calories_cumsum")
    activity_whitelist: tuple[str, ...] = ()
    models: tuple[str, ...] = ("decision_tree",)
    cv_folds: int = 5
    test_fraction: float = 0.10
    seed: int = 0
    utc_offset_hours: float = 0.0
    locations: tuple[str, ...] = DEFAULT_LOCATIONS
    activities: tuple[str, ...] = DEFAULT_ACTIVITIES

    def __post_init__(self) -> None:
        self.validate()

    @property
    def vocab(self) -> Vocabularies:
        return Vocabularies(tuple(self.locations), tuple(self.activities))

    def validate(self) -> None:
        if self.dominant_hand not in HANDS:
            raise ConfigError(f"dominant_hand must be one of {HANDS}, got {self.dominant_hand!r}")
        if self.device_setting not in DEVICE_SETTINGS:
            raise ConfigError(f"device_setting must be one of {DEVICE_SETTINGS}")
        if self.window_minutes not in STANDARD_WINDOW_MINUTES and not self.allow_custom_window:
            raise ConfigError(
                f"window length {self.window_minutes} min is not in {STANDARD_WINDOW_MINUTES}; "
                "set allow_custom_window to override"
            )
        if self.window_minutes < 1:
            raise ConfigError("window_minutes must be >= 1")
        if not 0.0 < self.min_valid_fraction <= 1.0:
            raise ConfigError("min_valid_fraction must be in (0, 1]")
        if self.discretization_bins < 2:
            raise ConfigError("discretization_bins must be >= 2")
        if self.discretization_strategy not in ("quantile", "equal_width"):
            raise ConfigError("discretization_strategy must be 'quantile' or 'equal_width'")
        if self.mrmr_scheme not in ("miq", "mid"):
            raise ConfigError("mrmr_scheme must be 'miq' or 'mid'")
        if self.mrmr_top_k < 1:
            raise ConfigError("mrmr_top_k must be >= 1")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must be in (0, 1)")
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be >= 2")
        if self.peak_prominence_bpm <= 0:
            raise ConfigError("peak_prominence_bpm must be > 0")
        if self.peak_min_separation_s < 1:
            raise ConfigError("peak_min_separation_s must be >= 1")
        whitelist = set(self.activity_whitelist)
        if whitelist & set(self.excluded_activities):
            raise ConfigError("activity_whitelist and excluded_activities must be disjoint")
        self.vocab.validate()
        known = set(self.activities) | {UNKNOWN_CATEGORY}
        for token in list(self.excluded_activities) + list(self.activity_whitelist):
            if token not in known:
                raise ConfigError(f"unknown activity token in filter rules: {token!r}")
        from .models import MODEL_KINDS  # local import to avoid a cycle

        for kind in self.models:
            if kind not in MODEL_KINDS:
                raise ConfigError(f"unknown model kind {kind!r}; choose from {sorted(MODEL_KINDS)}")

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        allowed = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - allowed)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = dict(raw)
        for key in ("excluded_activities", "require_nonzero", "activity_whitelist",
                    "models", "locations", "activities"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out
