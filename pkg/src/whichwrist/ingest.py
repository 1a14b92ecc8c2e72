"""Parsers for manufacturer-style export files and the context log.

Export layout: one directory per hand, one subdirectory per channel, each
holding JSON files that are arrays of ``{"dateTime": "MM/DD/YY HH:MM:SS",
"value": ...}`` records.  Heart-rate values are ``{"bpm": int,
"confidence": int}``; count channels carry a scalar or numeric string.

The context log is a UTF-8 CSV with header
``timestamp,location,activities,arousal,wear_flag`` (activities are
``;``-separated, timestamps ISO-8601 to second resolution).
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

from .config import (
    CHANNELS,
    COUNT_CHANNELS,
    HANDS,
    HR_BPM_MAX,
    HR_BPM_MIN,
    MALFORMED_TOLERANCE,
    MAX_SELECTIONS,
    WEAR_FLAGS,
    Vocabularies,
)

log = logging.getLogger(__name__)

EXPORT_TS_FORMAT = "%m/%d/%y %H:%M:%S"


class IngestError(Exception):
    """Fatal problem with an export file or the context log."""


@dataclass(frozen=True)
class RawSample:
    timestamp: datetime
    value: float
    confidence: int | None = None


@dataclass
class RawSampleSeries:
    """Sorted, de-duplicated samples for one channel of one hand.

    ``rejected`` counts records dropped for being malformed or out of range;
    ``duplicates`` counts records displaced by a later record with the same
    timestamp.  accepted + rejected + duplicates == input record count.
    """

    channel: str
    hand: str
    samples: list[RawSample] = field(default_factory=list)
    rejected: int = 0
    duplicates: int = 0

    def __post_init__(self) -> None:
        if self.channel not in CHANNELS:
            raise ValueError(f"unknown channel {self.channel!r}")
        if self.hand not in HANDS:
            raise ValueError(f"unknown hand {self.hand!r}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def span(self) -> tuple[datetime, datetime] | None:
        if not self.samples:
            return None
        return self.samples[0].timestamp, self.samples[-1].timestamp


@dataclass(frozen=True)
class ContextEntry:
    """One self-report row: what the subject was doing, where, and wear state.

    ``activities`` preserves file order; the first listed activity becomes the
    timeline's primary activity.
    """

    timestamp: datetime
    location: str | None = None
    activities: tuple[str, ...] = ()
    arousal: int | None = None
    wear_flag: str = "none"

    @property
    def selection_count(self) -> int:
        count = len(self.activities)
        count += 1 if self.location is not None else 0
        count += 1 if self.arousal is not None else 0
        count += 1 if self.wear_flag != "none" else 0
        return count


def parse_export_timestamp(text: str) -> datetime:
    """Parse 'MM/DD/YY HH:MM:SS' quickly; raises ValueError when malformed."""
    # Manual split is ~5x faster than strptime and this runs per record.
    date_part, _, time_part = text.partition(" ")
    m, d, y = date_part.split("/")
    hh, mm, ss = time_part.split(":")
    return datetime(2000 + int(y), int(m), int(d), int(hh), int(mm), int(ss))


def format_export_timestamp(ts: datetime) -> str:
    return ts.strftime(EXPORT_TS_FORMAT)


def _load_records(path: Path) -> list:
    try:
        with open(path, encoding="utf-8") as fh:
            records = json.load(fh)
    except OSError as exc:
        raise IngestError(f"cannot read export file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IngestError(f"export file {path} is not valid JSON: {exc}") from exc
    if not isinstance(records, list):
        raise IngestError(f"export file {path} must hold a JSON array of records")
    return records


def _finalize(channel: str, hand: str, parsed: list[tuple[datetime, float, int | None]],
              rejected: int, total: int, source: str) -> RawSampleSeries:
    if total and rejected / total > MALFORMED_TOLERANCE:
        raise IngestError(
            f"{source}: {rejected} of {total} records rejected "
            f"(> {MALFORMED_TOLERANCE:.0%} tolerance)"
        )
    # Stable sort, then last record wins on duplicate timestamps.
    parsed.sort(key=lambda rec: rec[0])
    samples: list[RawSample] = []
    duplicates = 0
    for ts, value, conf in parsed:
        if samples and samples[-1].timestamp == ts:
            samples[-1] = RawSample(ts, value, conf)
            duplicates += 1
        else:
            samples.append(RawSample(ts, value, conf))
    if rejected:
        log.warning("%s: rejected %d of %d records", source, rejected, total)
    return RawSampleSeries(channel=channel, hand=hand, samples=samples,
                           rejected=rejected, duplicates=duplicates)


def parse_hr_export(files: list[str | Path], hand: str) -> RawSampleSeries:
    """Parse heart-rate export files into one sorted series.

    Records with bpm outside the plausible [25, 250] range or with a broken
    structure are rejected and counted; more than 1% rejections is fatal.
    Duplicate timestamps keep the last record seen (files are processed in
    sorted-path order so the result does not depend on argument order).
    """
    paths = sorted(Path(f) for f in files)
    if not paths:
        log.warning("parse_hr_export(%s): no input files, returning empty series", hand)
        return RawSampleSeries(channel="heart_rate", hand=hand)
    parsed: list[tuple[datetime, float, int | None]] = []
    rejected = 0
    total = 0
    for path in paths:
        for rec in _load_records(path):
            total += 1
            try:
                ts = parse_export_timestamp(rec["dateTime"])
                value = rec["value"]
                bpm = float(value["bpm"])
                confidence = int(value["confidence"])
            except (KeyError, TypeError, ValueError, AttributeError):
                rejected += 1
                continue
            if not HR_BPM_MIN <= bpm <= HR_BPM_MAX or not 0 <= confidence <= 3:
                rejected += 1
                continue
            parsed.append((ts, bpm, confidence))
    return _finalize("heart_rate", hand, parsed, rejected, total,
                     f"heart_rate/{hand}")


def parse_count_export(files: list[str | Path], channel: str, hand: str) -> RawSampleSeries:
    """Parse a steps/calories/altitude export into one sorted series.

    Values may be numeric strings.  Negative steps or calories are rejected
    (altitude may legitimately be negative).  Same duplicate and rejection
    policy as heart rate.
    """
    if channel not in COUNT_CHANNELS:
        raise ValueError(f"channel must be one of {COUNT_CHANNELS}, got {channel!r}")
    paths = sorted(Path(f) for f in files)
    if not paths:
        log.warning("parse_count_export(%s/%s): no input files, returning empty series",
                    channel, hand)
        return RawSampleSeries(channel=channel, hand=hand)
    parsed: list[tuple[datetime, float, int | None]] = []
    rejected = 0
    total = 0
    nonnegative = channel in ("steps", "calories")
    for path in paths:
        for rec in _load_records(path):
            total += 1
            try:
                ts = parse_export_timestamp(rec["dateTime"])
                value = float(rec["value"])
            except (KeyError, TypeError, ValueError, AttributeError):
                rejected += 1
                continue
            if nonnegative and value < 0:
                rejected += 1
                continue
            parsed.append((ts, value, None))
    return _finalize(channel, hand, parsed, rejected, total, f"{channel}/{hand}")


def parse_context_log(file: str | Path, vocab: Vocabularies | None = None) -> list[ContextEntry]:
    """Parse the context log into entries sorted by timestamp.

    Raises IngestError on unknown category tokens, a selection count outside
    1..4, or an unparseable timestamp; the message names the offender.
    """
    vocab = vocab or Vocabularies()
    path = Path(file)
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise IngestError(f"context log {path} is empty")
            expected = ["timestamp", "location", "activities", "arousal", "wear_flag"]
            if list(reader.fieldnames) != expected:
                raise IngestError(
                    f"context log {path} header must be {','.join(expected)}, "
                    f"got {','.join(reader.fieldnames)}"
                )
            rows = list(reader)
    except OSError as exc:
        raise IngestError(f"cannot read context log {path}: {exc}") from exc

    entries = []
    for lineno, row in enumerate(rows, start=2):
        entries.append(_parse_context_row(row, vocab, f"{path}:{lineno}"))
    entries.sort(key=lambda e: e.timestamp)
    return entries


def _parse_context_row(row: dict, vocab: Vocabularies, where: str) -> ContextEntry:
    raw_ts = (row.get("timestamp") or "").strip()
    try:
        ts = datetime.fromisoformat(raw_ts)
    except ValueError as exc:
        raise IngestError(f"{where}: unparseable timestamp {raw_ts!r}") from exc
    if ts.tzinfo is not None:
        ts = ts.replace(tzinfo=None)

    location = (row.get("location") or "").strip() or None
    if location is not None and location not in vocab.locations:
        raise IngestError(f"{where}: unknown location token {location!r}")

    activities: list[str] = []
    for token in (row.get("activities") or "").split(";"):
        token = token.strip()
        if not token:
            continue
        if token not in vocab.activities:
            raise IngestError(f"{where}: unknown activity token {token!r}")
        if token not in activities:
            activities.append(token)

    raw_arousal = (row.get("arousal") or "").strip()
    arousal = None
    if raw_arousal:
        try:
            arousal = int(raw_arousal)
        except ValueError as exc:
            raise IngestError(f"{where}: arousal must be an integer, got {raw_arousal!r}") from exc
        if not 1 <= arousal <= 5:
            raise IngestError(f"{where}: arousal {arousal} outside 1..5")

    wear_flag = (row.get("wear_flag") or "").strip() or "none"
    if wear_flag not in WEAR_FLAGS:
        raise IngestError(f"{where}: unknown wear_flag {wear_flag!r}")

    entry = ContextEntry(timestamp=ts, location=location,
                         activities=tuple(activities), arousal=arousal,
                         wear_flag=wear_flag)
    count = entry.selection_count
    if count < 1:
        raise IngestError(f"{where}: entry makes no selections")
    if count > MAX_SELECTIONS:
        raise IngestError(f"{where}: selection count {count} exceeds {MAX_SELECTIONS}")
    return entry


# ---------------------------------------------------------------------------
# Writers (the synthetic generator and the round-trip tests share these)
# ---------------------------------------------------------------------------

def write_hr_export(series: RawSampleSeries, path: str | Path) -> None:
    records = [
        {"dateTime": format_export_timestamp(s.timestamp),
         "value": {"bpm": int(round(s.value)), "confidence": int(s.confidence or 0)}}
        for s in series.samples
    ]
    _write_json(records, path)


def write_count_export(series: RawSampleSeries, path: str | Path) -> None:
    records = [
        {"dateTime": format_export_timestamp(s.timestamp), "value": _format_value(s.value)}
        for s in series.samples
    ]
    _write_json(records, path)


def _format_value(value: float):
    # Count exports carry integers for steps and decimal strings for the rest.
    if value == int(value):
        return int(value)
    return f"{value:.2f}"


def _write_json(records: list, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(records, fh, separators=(",", ":"), sort_keys=True)


def context_entry_to_row(entry: ContextEntry) -> list[str]:
    return [
        entry.timestamp.isoformat(sep="T", timespec="seconds"),
        entry.location or "",
        ";".join(entry.activities),
        "" if entry.arousal is None else str(entry.arousal),
        "" if entry.wear_flag == "none" else entry.wear_flag,
    ]


def write_context_log(entries: list[ContextEntry], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "location", "activities", "arousal", "wear_flag"])
        for entry in entries:
            writer.writerow(context_entry_to_row(entry))


# ---------------------------------------------------------------------------
# Directory-level ingest and the manifest
# ---------------------------------------------------------------------------

def parse_hand_directory(root: str | Path, hand: str) -> dict[str, RawSampleSeries]:
    """Parse every channel subdirectory under ``root/<hand>/``.

    Missing channel directories yield empty series (with a warning from the
    parser); altitude is optional and often absent.
    """
    base = Path(root) / hand
    if not base.is_dir():
        raise IngestError(f"hand directory not found: {base}")
    out: dict[str, RawSampleSeries] = {}
    for channel in CHANNELS:
        files = sorted((base / channel).glob("*.json")) if (base / channel).is_dir() else []
        if channel == "heart_rate":
            out[channel] = parse_hr_export(files, hand)
        else:
            out[channel] = parse_count_export(files, channel, hand)
    return out


def parse_dataset(root: str | Path, vocab: Vocabularies | None = None,
                  context_log: str | Path | None = None,
                  ) -> tuple[dict[str, dict[str, RawSampleSeries]], list[ContextEntry]]:
    """Parse a full two-hand dataset directory plus its context log."""
    root = Path(root)
    series = {hand: parse_hand_directory(root, hand) for hand in HANDS}
    log_path = Path(context_log) if context_log else root / "context_log.csv"
    entries = parse_context_log(log_path, vocab) if log_path.exists() else []
    if not entries:
        log.warning("no context entries found at %s", log_path)
    return series, entries


def write_ingest_manifest(series: dict[str, dict[str, RawSampleSeries]],
                          entries: list[ContextEntry], path: str | Path) -> None:
    """Plain-text report of per-channel sample counts, rejections, time span."""
    lines = ["ingest manifest", "==============="]
    for hand in HANDS:
        for channel in CHANNELS:
            s = series[hand][channel]
            span = s.span
            span_txt = f"{span[0].isoformat()} .. {span[1].isoformat()}" if span else "empty"
            lines.append(
                f"{hand}/{channel}: {len(s)} samples, "
                f"{s.rejected} rejected, {s.duplicates} duplicates, span {span_txt}"
            )
    lines.append(f"context entries: {len(entries)}")
    if entries:
        lines.append(f"context span: {entries[0].timestamp.isoformat()} .. "
                     f"{entries[-1].timestamp.isoformat()}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
