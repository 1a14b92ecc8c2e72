import json
import random
from datetime import datetime, timedelta

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from whichwrist.config import Vocabularies
from whichwrist.ingest import (
    ContextEntry,
    IngestError,
    RawSampleSeries,
    parse_context_log,
    parse_count_export,
    parse_export_timestamp,
    parse_hr_export,
    write_context_log,
    write_count_export,
    write_hr_export,
    write_ingest_manifest,
)

T0 = datetime(2022, 11, 3, 14, 5, 0)


def hr_record(ts, bpm, confidence=2):
    return {"dateTime": ts.strftime("%m/%d/%y %H:%M:%S"),
            "value": {"bpm": bpm, "confidence": confidence}}


def count_record(ts, value):
    return {"dateTime": ts.strftime("%m/%d/%y %H:%M:%S"), "value": value}


def dump(tmp_path, name, records):
    path = tmp_path / name
    path.write_text(json.dumps(records), encoding="utf-8")
    return path


class TestParseHrExport:
    def test_two_files_concatenate_and_sort(self, tmp_path):
        day1 = [hr_record(T0 + timedelta(seconds=7 * i), 60 + i) for i in range(10)]
        day2 = [hr_record(T0 + timedelta(days=1, seconds=7 * i), 70 + i) for i in range(10)]
        f1 = dump(tmp_path, "day1.json", day1)
        f2 = dump(tmp_path, "day2.json", day2)
        series = parse_hr_export([f2, f1], hand="left")
        assert len(series) == 20
        stamps = [s.timestamp for s in series.samples]
        assert stamps == sorted(stamps)
        assert series.samples[0].value == 60
        assert series.samples[-1].value == 79

    def test_bpm_300_rejected(self, tmp_path):
        f = dump(tmp_path, "a.json", [hr_record(T0, 300), hr_record(T0 + timedelta(seconds=7), 70)])
        # One bad record out of two exceeds the 1% tolerance and is fatal.
        with pytest.raises(IngestError, match="1 of 2"):
            parse_hr_export([f], hand="left")

    def test_bpm_300_rejected_below_tolerance(self, tmp_path):
        records = [hr_record(T0 + timedelta(seconds=7 * i), 70) for i in range(200)]
        records[5] = hr_record(T0 + timedelta(seconds=7 * 5), 300)
        f = dump(tmp_path, "a.json", records)
        series = parse_hr_export([f], hand="left")
        assert series.rejected == 1
        assert len(series) == 199

    def test_duplicate_timestamp_keeps_last(self, tmp_path):
        records = [hr_record(T0, 60), hr_record(T0, 62),
                   hr_record(T0 + timedelta(seconds=7), 70)]
        f = dump(tmp_path, "a.json", records)
        series = parse_hr_export([f], hand="left")
        assert [(s.timestamp, s.value) for s in series.samples] == [
            (T0, 62.0), (T0 + timedelta(seconds=7), 70.0)]
        assert series.duplicates == 1

    def test_confidence_out_of_range_rejected(self, tmp_path):
        records = [hr_record(T0 + timedelta(seconds=7 * i), 70) for i in range(200)]
        records[0] = hr_record(T0, 70, confidence=9)
        f = dump(tmp_path, "a.json", records)
        series = parse_hr_export([f], hand="left")
        assert series.rejected == 1

    def test_unreadable_file_is_fatal(self, tmp_path):
        with pytest.raises(IngestError, match="cannot read"):
            parse_hr_export([tmp_path / "missing.json"], hand="left")

    def test_non_json_file_is_fatal(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("not json", encoding="utf-8")
        with pytest.raises(IngestError, match="not valid JSON"):
            parse_hr_export([path], hand="left")


class TestParseCountExport:
    def test_numeric_string_values(self, tmp_path):
        records = [count_record(T0, "0"), count_record(T0 + timedelta(seconds=120), "34")]
        f = dump(tmp_path, "steps.json", records)
        series = parse_count_export([f], channel="steps", hand="right")
        assert [(s.timestamp, s.value) for s in series.samples] == [
            (T0, 0.0), (T0 + timedelta(seconds=120), 34.0)]
        assert all(s.confidence is None for s in series.samples)

    def test_negative_calories_rejected(self, tmp_path):
        records = [count_record(T0 + timedelta(seconds=60 * i), 1.2) for i in range(200)]
        records[3] = count_record(T0 + timedelta(seconds=180), -3)
        f = dump(tmp_path, "cal.json", records)
        series = parse_count_export([f], channel="calories", hand="left")
        assert series.rejected == 1
        assert len(series) == 199

    def test_negative_altitude_allowed(self, tmp_path):
        f = dump(tmp_path, "alt.json", [count_record(T0, -12.0)])
        series = parse_count_export([f], channel="altitude", hand="left")
        assert series.samples[0].value == -12.0

    def test_empty_file_list_warns(self, caplog):
        with caplog.at_level("WARNING"):
            series = parse_count_export([], channel="steps", hand="left")
        assert len(series) == 0
        assert series.span is None
        assert any("no input files" in rec.message for rec in caplog.records)

    def test_bad_channel(self):
        with pytest.raises(ValueError, match="channel"):
            parse_count_export([], channel="heart_rate", hand="left")


class TestParseContextLog:
    def write_log(self, tmp_path, rows):
        path = tmp_path / "context_log.csv"
        body = "timestamp,location,activities,arousal,wear_flag\n" + "\n".join(rows)
        path.write_text(body + "\n", encoding="utf-8")
        return path

    def test_direct_mapping(self, tmp_path):
        path = self.write_log(tmp_path, ["2022-11-03T14:05:00,office,working,,"])
        entries = parse_context_log(path)
        assert len(entries) == 1
        e = entries[0]
        assert e.timestamp == T0
        assert e.location == "office"
        assert e.activities == ("working",)
        assert e.arousal is None
        assert e.wear_flag == "none"
        assert e.selection_count == 2

    def test_five_selections_rejected(self, tmp_path):
        path = self.write_log(
            tmp_path, ["2022-11-03T14:05:00,office,working;eating;walking,3,"])
        with pytest.raises(IngestError, match="selection count 5 exceeds 4"):
            parse_context_log(path)

    def test_wear_flag_only_is_one_selection(self, tmp_path):
        path = self.write_log(tmp_path, ["2022-11-03T14:05:00,,,,removed"])
        entries = parse_context_log(path)
        assert entries[0].wear_flag == "removed"
        assert entries[0].selection_count == 1

    def test_zero_selections_rejected(self, tmp_path):
        path = self.write_log(tmp_path, ["2022-11-03T14:05:00,,,,"])
        with pytest.raises(IngestError, match="no selections"):
            parse_context_log(path)

    def test_unknown_activity_named(self, tmp_path):
        path = self.write_log(tmp_path, ["2022-11-03T14:05:00,,skydiving,,"])
        with pytest.raises(IngestError, match="skydiving"):
            parse_context_log(path)

    def test_unknown_location_named(self, tmp_path):
        path = self.write_log(tmp_path, ["2022-11-03T14:05:00,moon,,2,"])
        with pytest.raises(IngestError, match="moon"):
            parse_context_log(path)

    def test_bad_timestamp(self, tmp_path):
        path = self.write_log(tmp_path, ["yesterday,office,working,,"])
        with pytest.raises(IngestError, match="yesterday"):
            parse_context_log(path)

    def test_arousal_bounds(self, tmp_path):
        path = self.write_log(tmp_path, ["2022-11-03T14:05:00,,working,6,"])
        with pytest.raises(IngestError, match="outside 1..5"):
            parse_context_log(path)

    def test_sorted_output(self, tmp_path):
        path = self.write_log(tmp_path, [
            "2022-11-03T16:00:00,home,eating,,",
            "2022-11-03T14:05:00,office,working,,",
        ])
        entries = parse_context_log(path)
        assert [e.location for e in entries] == ["office", "home"]

    def test_custom_vocabulary(self, tmp_path):
        vocab = Vocabularies(locations=("boat",), activities=("fishing",))
        path = self.write_log(tmp_path, ["2022-11-03T14:05:00,boat,fishing,,"])
        entries = parse_context_log(path, vocab)
        assert entries[0].activities == ("fishing",)

    def test_wrong_header_rejected(self, tmp_path):
        path = tmp_path / "log.csv"
        path.write_text("when,where\n1,2\n", encoding="utf-8")
        with pytest.raises(IngestError, match="header"):
            parse_context_log(path)


class TestRoundTrip:
    def test_hr_round_trip(self, tmp_path):
        records = [hr_record(T0 + timedelta(seconds=7 * i), 60 + (i % 30)) for i in range(50)]
        f = dump(tmp_path, "orig.json", records)
        first = parse_hr_export([f], hand="left")
        out = tmp_path / "rt.json"
        write_hr_export(first, out)
        second = parse_hr_export([out], hand="left")
        assert second.samples == first.samples

    def test_count_round_trip(self, tmp_path):
        records = [count_record(T0 + timedelta(seconds=120 * i), i * 3) for i in range(40)]
        f = dump(tmp_path, "orig.json", records)
        first = parse_count_export([f], channel="steps", hand="right")
        out = tmp_path / "rt.json"
        write_count_export(first, out)
        second = parse_count_export([out], channel="steps", hand="right")
        assert second.samples == first.samples

    def test_context_round_trip(self, tmp_path):
        entries = [
            ContextEntry(T0, "office", ("working", "eating"), 3, "none"),
            ContextEntry(T0 + timedelta(hours=2), None, (), None, "removed"),
        ]
        path = tmp_path / "log.csv"
        write_context_log(entries, path)
        assert parse_context_log(path) == entries


@st.composite
def hr_export_records(draw):
    n = draw(st.integers(min_value=0, max_value=40))
    offsets = draw(st.lists(st.integers(min_value=0, max_value=5000),
                            min_size=n, max_size=n))
    return [hr_record(T0 + timedelta(seconds=o),
                      draw(st.integers(min_value=25, max_value=250)))
            for o in offsets]


class TestProperties:
    @given(records=hr_export_records(), seed=st.integers(0, 2**16))
    @settings(max_examples=40, deadline=None)
    def test_sorted_regardless_of_file_order(self, records, seed, tmp_path_factory):
        tmp_path = tmp_path_factory.mktemp("shuffle")
        rng = random.Random(seed)
        shuffled = records[:]
        rng.shuffle(shuffled)
        cut = len(shuffled) // 2
        f1 = dump(tmp_path, "a.json", shuffled[:cut])
        f2 = dump(tmp_path, "b.json", shuffled[cut:])
        series = parse_hr_export([f1, f2], hand="left")
        stamps = [s.timestamp for s in series.samples]
        assert stamps == sorted(stamps)
        assert len(set(stamps)) == len(stamps)
        # accepted (kept + displaced duplicates) + rejected covers every input record
        assert len(series) + series.duplicates + series.rejected == len(records)

    @given(records=hr_export_records())
    @settings(max_examples=25, deadline=None)
    def test_parse_serialize_parse_is_identity(self, records, tmp_path_factory):
        tmp_path = tmp_path_factory.mktemp("idem")
        f = dump(tmp_path, "a.json", records)
        first = parse_hr_export([f], hand="left")
        out = tmp_path / "rt.json"
        write_hr_export(first, out)
        second = parse_hr_export([out], hand="left")
        assert second.samples == first.samples


def test_manifest_contents(tmp_path):
    f = dump(tmp_path, "hr.json", [hr_record(T0, 60), hr_record(T0 + timedelta(seconds=7), 65)])
    hr = parse_hr_export([f], hand="left")
    series = {
        "left": {"heart_rate": hr,
                 "steps": RawSampleSeries("steps", "left"),
                 "calories": RawSampleSeries("calories", "left"),
                 "altitude": RawSampleSeries("altitude", "left")},
        "right": {"heart_rate": RawSampleSeries("heart_rate", "right"),
                  "steps": RawSampleSeries("steps", "right"),
                  "calories": RawSampleSeries("calories", "right"),
                  "altitude": RawSampleSeries("altitude", "right")},
    }
    entries = [ContextEntry(T0, "office", ("working",), None, "none")]
    out = tmp_path / "manifest.txt"
    write_ingest_manifest(series, entries, out)
    text = out.read_text(encoding="utf-8")
    assert "left/heart_rate: 2 samples" in text
    assert "context entries: 1" in text
    assert "right/steps: 0 samples" in text


def test_parse_export_timestamp():
    assert parse_export_timestamp("11/03/22 14:05:00") == T0
    with pytest.raises(ValueError):
        parse_export_timestamp("2022-11-03 14:05:00")
