from datetime import timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from whichwrist.features import CATEGORICAL_FEATURES, WindowSpec, build_feature_matrix
from whichwrist.ingest import parse_dataset
from whichwrist.synth import (
    BASE_DATE,
    BURST_MIN_SPACING_S,
    ActivitySchedule,
    AsymmetryParams,
    ScheduleSegment,
    SynthError,
    _place_center,
    generate_schedule,
    synthesize_paired_dataset,
)
from whichwrist.timeline import build_labeled_timeline, to_epoch


def featurize(root, dominant_hand, minutes=1):
    series, entries = parse_dataset(root)
    tl = build_labeled_timeline(series, entries, dominant_hand=dominant_hand,
                                device_setting="configured_per_hand")
    return build_feature_matrix(tl, WindowSpec(length_minutes=minutes))


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    """Two symmetric days, reused by every file-inspection test."""
    out = tmp_path_factory.mktemp("synth_small")
    sched = generate_schedule(days=2, seed=3)
    res = synthesize_paired_dataset(sched, AsymmetryParams.symmetric(), seed=3,
                                    out_dir=out)
    series, entries = parse_dataset(res.root)
    return res, series, entries


class TestAsymmetryParams:
    def test_defaults(self):
        p = AsymmetryParams()
        assert p.hr_peak_rate_boost == 0.5
        assert p.hr_noise_boost == 1.0
        assert p.step_undercount_factor == 0.9
        assert not p.is_symmetric

    def test_symmetric_constructor(self):
        p = AsymmetryParams.symmetric()
        assert (p.hr_peak_rate_boost, p.hr_noise_boost) == (0.0, 0.0)
        assert p.step_undercount_factor == 1.0
        assert p.is_symmetric

    @pytest.mark.parametrize("kwargs", [
        {"hr_peak_rate_boost": -0.1},
        {"hr_noise_boost": -1e-9},
        {"step_undercount_factor": -0.01},
        {"step_undercount_factor": 1.01},
        {"hr_peak_rate_boost": float("nan")},
        {"hr_noise_boost": float("inf")},
    ])
    def test_out_of_range_rejected(self, kwargs):
        with pytest.raises(SynthError):
            AsymmetryParams(**kwargs)

    @given(boost=st.floats(0.0, 10.0), noise=st.floats(0.0, 10.0),
           factor=st.floats(0.0, 1.0))
    def test_stated_ranges_accepted(self, boost, noise, factor):
        p = AsymmetryParams(boost, noise, factor)
        assert p.hr_peak_rate_boost == boost


class TestGenerateSchedule:
    def test_single_day_covers_24_hours(self):
        sched = generate_schedule(days=1, seed=0)
        assert sched.total_seconds == 86400
        assert sched.start == BASE_DATE
        assert sched.end == BASE_DATE + timedelta(days=1)

    def test_same_seed_identical(self):
        assert generate_schedule(days=3, seed=11) == generate_schedule(days=3, seed=11)

    def test_different_seed_differs(self):
        assert generate_schedule(days=3, seed=11) != generate_schedule(days=3, seed=12)

    def test_fourteen_days_has_fourteen_exercise_blocks(self):
        sched = generate_schedule(days=14, seed=2)
        exercising = [s for s in sched.segments if s.activity == "exercising"]
        assert len(exercising) >= 14

    @given(days=st.integers(1, 4), seed=st.integers(0, 999))
    @settings(max_examples=25, deadline=None)
    def test_per_day_guarantees(self, days, seed):
        """Every simulated day exercises at least once and sleeps >= 6 h."""
        sched = generate_schedule(days=days, seed=seed)
        per_day_sleep: dict = {}
        per_day_exercise: dict = {}
        for seg in sched.segments:
            day = seg.start.date()
            if seg.activity == "sleeping":
                per_day_sleep[day] = per_day_sleep.get(day, 0) + seg.duration_s
            if seg.activity == "exercising":
                per_day_exercise[day] = per_day_exercise.get(day, 0) + 1
        assert len(per_day_sleep) == days
        assert all(total >= 6 * 3600 for total in per_day_sleep.values())
        assert len(per_day_exercise) == days

    def test_locations_track_activities(self):
        sched = generate_schedule(days=5, seed=4)
        where = {"exercising": "gym", "sleeping": "home", "working": "office",
                 "commuting": "transit"}
        for seg in sched.segments:
            if seg.activity in where:
                assert seg.location == where[seg.activity]

    def test_zero_days_rejected(self):
        with pytest.raises(SynthError, match="days"):
            generate_schedule(days=0, seed=0)


class TestScheduleValidation:
    def seg(self, minute, duration_min, activity="working", location="office"):
        return ScheduleSegment(start=BASE_DATE + timedelta(minutes=minute),
                               duration_s=duration_min * 60,
                               activity=activity, location=location)

    def test_gap_between_segments_rejected(self):
        with pytest.raises(SynthError, match="contiguous"):
            ActivitySchedule(segments=(self.seg(0, 10), self.seg(15, 10)))

    def test_overlap_rejected(self):
        with pytest.raises(SynthError, match="contiguous"):
            ActivitySchedule(segments=(self.seg(0, 10), self.seg(5, 10)))

    def test_unknown_activity_rejected(self):
        with pytest.raises(SynthError, match="activity"):
            ActivitySchedule(segments=(self.seg(0, 10, activity="juggling"),))

    def test_unknown_location_rejected(self):
        with pytest.raises(SynthError, match="location"):
            ActivitySchedule(segments=(self.seg(0, 10, location="moon"),))

    def test_empty_rejected(self):
        with pytest.raises(SynthError, match="no segments"):
            ActivitySchedule(segments=())

    def test_zero_duration_rejected(self):
        with pytest.raises(SynthError, match="duration"):
            ActivitySchedule(segments=(self.seg(0, 0),))


class TestBurstPlacement:
    @given(st.lists(st.floats(0.0, 5000.0), min_size=1, max_size=60))
    def test_kept_centers_stay_sorted_and_spaced(self, cands):
        kept: list = []
        for cand in cands:
            _place_center(kept, cand)
        assert kept == sorted(kept)
        gaps = np.diff(kept)
        assert (gaps >= BURST_MIN_SPACING_S).all()

    def test_too_close_is_refused_either_side(self):
        kept = [100.0]
        assert not _place_center(kept, 100.0 + BURST_MIN_SPACING_S / 2)
        assert not _place_center(kept, 100.0 - BURST_MIN_SPACING_S / 2)
        assert _place_center(kept, 100.0 + BURST_MIN_SPACING_S)
        assert kept == [100.0, 100.0 + BURST_MIN_SPACING_S]


class TestGeneratedFiles:
    def test_layout(self, small_run):
        res, _, _ = small_run
        for hand in ("left", "right"):
            for channel in ("heart_rate", "steps", "calories"):
                files = sorted((res.root / hand / channel).glob("*.json"))
                assert len(files) == 2
                assert files[0].name == f"{channel}-2022-10-03.json"
        assert res.context_log.exists()
        assert res.ground_truth.exists()

    def test_round_trip_is_clean(self, small_run):
        """Everything the generator writes comes back without rejections."""
        res, series, entries = small_run
        for hand in ("left", "right"):
            for channel in ("heart_rate", "steps", "calories"):
                s = series[hand][channel]
                assert s.rejected == 0
                assert s.duplicates == 0
                assert len(s.samples) > 0
        assert len(entries) == len(res.schedule.segments)

    def test_hr_values_are_bounded_ints_with_confidence(self, small_run):
        _, series, _ = small_run
        for hand in ("left", "right"):
            for s in series[hand]["heart_rate"].samples:
                assert 25 <= s.value <= 250
                assert s.value == int(s.value)
                assert s.confidence == 3

    def test_calories_positive(self, small_run):
        _, series, _ = small_run
        for hand in ("left", "right"):
            assert all(s.value > 0 for s in series[hand]["calories"].samples)

    def test_sample_cadence(self, small_run):
        """Mean inter-sample gaps: HR ~7 s, steps ~2 min, calories ~1 min."""
        _, series, _ = small_run
        targets = {"heart_rate": 7.0, "steps": 120.0, "calories": 60.0}
        for hand in ("left", "right"):
            for channel, target in targets.items():
                epochs = np.array([to_epoch(s.timestamp)
                                   for s in series[hand][channel].samples])
                mean_gap = float(np.diff(epochs).mean())
                assert abs(mean_gap - target) <= 0.1 * target, (channel, mean_gap)

    def test_shower_removal_leaves_a_gap(self, small_run):
        res, series, entries = small_run
        removed = [e for e in entries if e.wear_flag == "removed"]
        worn = [e for e in entries if e.wear_flag == "worn"]
        assert len(removed) == 2 and len(worn) == 2  # one shower per day
        for r, w in zip(removed, worn):
            lo, hi = to_epoch(r.timestamp), to_epoch(w.timestamp)
            assert hi > lo
            for hand in ("left", "right"):
                for channel in ("heart_rate", "steps", "calories"):
                    inside = [s for s in series[hand][channel].samples
                              if lo <= to_epoch(s.timestamp) < hi]
                    assert inside == []

    def test_context_entries_one_per_segment(self, small_run):
        res, _, entries = small_run
        for entry, seg in zip(entries, res.schedule.segments):
            assert entry.timestamp == seg.start
            assert entry.activities == (seg.activity,)
            assert entry.location == seg.location
            assert entry.arousal in (1, 2, 3, 4, 5)

    def test_ground_truth_contents(self, small_run):
        res, _, _ = small_run
        text = res.ground_truth.read_text()
        fields = dict(line.split(": ", 1) for line in text.splitlines())
        assert fields["dominant_hand"] == res.dominant_hand == "right"
        assert fields["seed"] == "3"
        assert fields["days"] == "2"
        assert fields["hr_peak_rate_boost"] == "0.0"

    def test_bad_dominant_hand_rejected(self, tmp_path):
        sched = generate_schedule(days=1, seed=0)
        with pytest.raises(SynthError, match="dominant_hand"):
            synthesize_paired_dataset(sched, AsymmetryParams.symmetric(), seed=0,
                                      out_dir=tmp_path, dominant_hand="upper")

    def test_dominant_hand_flows_to_labels(self, tmp_path):
        sched = generate_schedule(days=1, seed=9)
        res = synthesize_paired_dataset(sched, AsymmetryParams.symmetric(), seed=9,
                                        out_dir=tmp_path, dominant_hand="left")
        matrix = featurize(res.root, res.dominant_hand, minutes=40)
        hands = np.array(matrix.hands)
        assert (hands[matrix.labels == 1] == "left").all()
        assert (hands[matrix.labels == 0] == "right").all()


class TestDeterminism:
    def test_reruns_are_byte_identical(self, tmp_path):
        sched = generate_schedule(days=1, seed=6)
        a = synthesize_paired_dataset(sched, AsymmetryParams(), seed=6,
                                      out_dir=tmp_path / "a")
        b = synthesize_paired_dataset(sched, AsymmetryParams(), seed=6,
                                      out_dir=tmp_path / "b")
        files_a = sorted(p.relative_to(a.root) for p in a.root.rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(b.root) for p in b.root.rglob("*") if p.is_file())
        assert files_a == files_b
        for rel in files_a:
            assert (a.root / rel).read_bytes() == (b.root / rel).read_bytes(), rel

    def test_seed_changes_output(self, tmp_path):
        sched = generate_schedule(days=1, seed=6)
        a = synthesize_paired_dataset(sched, AsymmetryParams(), seed=6,
                                      out_dir=tmp_path / "a")
        c = synthesize_paired_dataset(sched, AsymmetryParams(), seed=7,
                                      out_dir=tmp_path / "c")
        day = "2022-10-03"
        assert ((a.root / "left/heart_rate" / f"heart_rate-{day}.json").read_bytes()
                != (c.root / "left/heart_rate" / f"heart_rate-{day}.json").read_bytes())


class TestExchangeability:
    def test_symmetric_hands_pass_label_permutation(self, tmp_path):
        """Block sign-flip test on per-window hand differences.

        Under zero asymmetry the two hands are the same process, so flipping
        which hand is called dominant (in hour blocks, to respect the serial
        correlation of the fluctuation term) must not make the observed
        feature-mean differences look extreme.  Max-|t| across features
        handles the multiple comparisons.
        """
        sched = generate_schedule(days=4, seed=5)
        res = synthesize_paired_dataset(sched, AsymmetryParams.symmetric(),
                                        seed=5, out_dir=tmp_path)
        matrix = featurize(res.root, res.dominant_hand)
        numeric = [n for n in matrix.feature_names if n not in CATEGORICAL_FEATURES]
        dom = matrix.values[matrix.labels == 1][:, [matrix.feature_names.index(n) for n in numeric]]
        nond = matrix.values[matrix.labels == 0][:, [matrix.feature_names.index(n) for n in numeric]]
        d = dom - nond
        n = len(d)
        assert n > 1000
        rms = np.sqrt((d ** 2).mean(axis=0))
        scale = np.where(rms > 0, rms, 1.0)
        t_obs = np.abs(d.mean(axis=0)) / scale * np.sqrt(n)
        m_obs = t_obs.max()

        block_of = np.arange(n) // 60
        n_blocks = block_of[-1] + 1
        rng = np.random.default_rng(0)
        flips = rng.choice([-1.0, 1.0], size=(1000, n_blocks))
        signs = flips[:, block_of]                      # (B, n)
        means = signs @ d / n                           # (B, features)
        m_null = np.abs(means / scale * np.sqrt(n)).max(axis=1)
        p = (1 + int((m_null >= m_obs).sum())) / (len(m_null) + 1)
        assert p > 0.01, f"asymmetry detected in symmetric data (p={p:.4f})"


class TestPeakRateBoost:
    def test_boost_shows_up_in_windowed_peak_counts(self, tmp_path):
        """Injecting 0.5 extra peaks/min lifts the dominant hand's mean
        1-minute exercise-window peak count by about that much."""
        sched = generate_schedule(days=16, seed=7)
        params = AsymmetryParams(hr_peak_rate_boost=0.5, hr_noise_boost=0.0,
                                 step_undercount_factor=1.0)
        res = synthesize_paired_dataset(sched, params, seed=11, out_dir=tmp_path)
        matrix = featurize(res.root, res.dominant_hand)
        peak = matrix.column("hr_peak_count")
        act = matrix.column("activity")
        exercising = matrix.categories["activity"].index("exercising")
        mask = act == exercising
        dom = peak[mask & (matrix.labels == 1)]
        nond = peak[mask & (matrix.labels == 0)]
        assert len(dom) >= 500 and len(nond) >= 500
        diff = float(dom.mean() - nond.mean())
        assert 0.38 <= diff <= 0.62, diff
