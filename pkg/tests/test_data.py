import numpy as np
import pytest

from fallwatch.data import (
    ADL_CODES,
    DEFAULT_COUNTS,
    FALL_CODES,
    GenConfig,
    GRAVITY,
    LabeledRecording,
    Window,
    WindowOrigin,
    generate_synthetic,
    load_csv,
    make_windows,
    prepare_split,
    scaled_counts,
    stratified_split,
    windows_to_arrays,
    write_csv,
)
from fallwatch.errors import (
    DataFormatError,
    DataValidationError,
    InvalidInputError,
    StratificationError,
)
from fallwatch.signals import RawSeries


def count_windows(recordings, window_len=50, stride=25):
    return sum(len(make_windows(r, window_len, stride)) for r in recordings)


def acc_magnitude(recording):
    return np.linalg.norm(recording.series.values[:, :3], axis=1)


def make_recording(rec_id, n, activity="NF1", subject="s01", session=0, rate=50.0, fill=0.0):
    values = np.full((n, 6), fill)
    return LabeledRecording(rec_id, RawSeries(values, rate), activity, subject, session)


class TestGenerator:
    def test_default_counts_match_the_published_totals(self):
        recs = generate_synthetic(GenConfig(seed=42))
        adl = count_windows([r for r in recs if r.activity in ADL_CODES])
        fall = count_windows([r for r in recs if r.activity in FALL_CODES])
        assert adl == 6480
        assert fall == 4290
        assert adl + fall == 10770

    def test_per_activity_counts(self):
        recs = generate_synthetic(GenConfig(seed=1, counts=scaled_counts(0.1)))
        for code, want in scaled_counts(0.1).items():
            got = count_windows([r for r in recs if r.activity == code])
            assert got == want, code

    def test_same_seed_is_bitwise_identical(self):
        a = generate_synthetic(GenConfig(seed=7, counts=scaled_counts(0.02)))
        b = generate_synthetic(GenConfig(seed=7, counts=scaled_counts(0.02)))
        assert len(a) == len(b)
        for ra, rb in zip(a, b):
            assert ra.recording_id == rb.recording_id
            assert np.array_equal(ra.series.values, rb.series.values)

    def test_different_seeds_differ(self):
        a = generate_synthetic(GenConfig(seed=1, counts={"NF1": 10}))
        b = generate_synthetic(GenConfig(seed=2, counts={"NF1": 10}))
        assert not np.array_equal(a[0].series.values, b[0].series.values)

    def test_zero_counts_empty(self):
        assert generate_synthetic(GenConfig(seed=0, counts={k: 0 for k in DEFAULT_COUNTS})) == []

    def test_binary_label_matches_activity(self):
        recs = generate_synthetic(GenConfig(seed=3, counts=scaled_counts(0.02)))
        for r in recs:
            assert r.binary_label == (1 if r.activity in FALL_CODES else 0)

    def test_fall_recordings_spike_above_1_8g(self):
        recs = generate_synthetic(GenConfig(seed=5, counts=scaled_counts(0.1)))
        for r in recs:
            if r.activity in FALL_CODES:
                peak = acc_magnitude(r).max()
                assert peak > 1.8 * GRAVITY
                assert peak < 4.2 * GRAVITY

    def test_lying_sitting_stay_below_1_5g(self):
        recs = generate_synthetic(GenConfig(seed=5, counts=scaled_counts(0.1)))
        for r in recs:
            if r.activity in ("NF2", "NF3"):
                assert acc_magnitude(r).max() < 1.5 * GRAVITY


class TestWindows:
    def test_window_count_formula(self):
        assert len(make_windows(make_recording("a", 200), 50, 25)) == 7
        assert len(make_windows(make_recording("a", 50), 50, 25)) == 1
        assert len(make_windows(make_recording("a", 50), 50, 7)) == 1

    def test_short_recording_yields_nothing(self):
        assert make_windows(make_recording("a", 49), 50, 25) == []

    def test_windows_inherit_label_and_read_within_bounds(self):
        rec = generate_synthetic(GenConfig(seed=9, counts={"F1": 2}))[0]
        for w in make_windows(rec, 50, 25):
            assert w.label == 1
            assert w.values.shape == (50, 6)
            sliced = rec.series.values[w.origin.start : w.origin.start + 50]
            assert np.array_equal(w.values, sliced)

    def test_window_shape_validated(self):
        with pytest.raises(InvalidInputError):
            Window(values=np.zeros((50, 5)), label=0, origin=WindowOrigin("x", 0))
        with pytest.raises(InvalidInputError):
            Window(values=np.zeros((50, 6)), label=2, origin=WindowOrigin("x", 0))


class TestStratifiedSplit:
    @staticmethod
    def _windows(n_per_class, windows_each=1):
        out = []
        for cls, code in ((0, "NF1"), (1, "F1")):
            for i in range(n_per_class):
                rid = f"{code}-{i}"
                for k in range(windows_each):
                    out.append(
                        Window(np.zeros((50, 6)), cls, WindowOrigin(rid, k * 25))
                    )
        return out

    def test_counting_oracle_50_50(self):
        windows = self._windows(50)
        split = stratified_split(windows, 0.2, seed=7)
        test_ids = {w.origin.recording_id for w in split.test}
        assert len(test_ids) == 20
        assert sum(1 for r in test_ids if r.startswith("NF1")) == 10
        assert sum(1 for r in test_ids if r.startswith("F1")) == 10

    def test_partition_by_recording(self):
        windows = self._windows(20, windows_each=3)
        split = stratified_split(windows, 0.3, seed=1)
        train_ids = {w.origin.recording_id for w in split.train}
        test_ids = {w.origin.recording_id for w in split.test}
        assert train_ids.isdisjoint(test_ids)
        assert len(split.train) + len(split.test) == len(windows)

    def test_deterministic(self):
        windows = self._windows(30)
        a = stratified_split(windows, 0.25, seed=11)
        b = stratified_split(windows, 0.25, seed=11)
        assert [w.origin for w in a.test] == [w.origin for w in b.test]

    def test_too_few_recordings_rejected(self):
        windows = [
            Window(np.zeros((50, 6)), 0, WindowOrigin("a", 0)),
            Window(np.zeros((50, 6)), 1, WindowOrigin("b", 0)),
            Window(np.zeros((50, 6)), 0, WindowOrigin("c", 0)),
        ]
        with pytest.raises(StratificationError):
            stratified_split(windows, 0.5, seed=0)

    def test_bad_fraction_rejected(self):
        with pytest.raises(Exception):
            stratified_split(self._windows(10), 1.0, seed=0)

    def test_full_corpus_test_count_near_1898(self):
        recs = generate_synthetic(GenConfig(seed=42))
        windows = [w for r in recs for w in make_windows(r)]
        split = stratified_split(windows, 0.176, seed=42)
        assert abs(len(split.test) - 1898) <= 0.02 * 1898
        x, y = windows_to_arrays(split.test)
        overall = 4290 / 10770
        assert abs(y.mean() - overall) < 0.02


class TestPrepareSplit:
    def test_normalizer_fitted_on_train_side_only(self, tiny_recordings):
        split, norm = prepare_split(
            tiny_recordings, preprocess=None, seed=3, test_fraction=0.25
        )
        test_ids = {w.origin.recording_id for w in split.test}
        train_series = [r.series for r in tiny_recordings if r.recording_id not in test_ids]
        stacked = np.concatenate([s.values for s in train_series])
        assert np.allclose(norm.minimum, stacked.min(axis=0))
        assert np.allclose(norm.maximum, stacked.max(axis=0))

    def test_minmax_train_windows_in_unit_range(self, tiny_recordings):
        split, _ = prepare_split(tiny_recordings, preprocess=None, seed=3, test_fraction=0.25)
        x, _ = windows_to_arrays(split.train)
        assert x.min() >= 0.0 and x.max() <= 1.0


class TestCsv:
    def test_round_trip(self, tmp_path):
        recs = generate_synthetic(GenConfig(seed=21, counts={"NF1": 10, "F1": 4}))
        path = tmp_path / "data.csv"
        write_csv(recs, path)
        back = load_csv(path)
        assert len(back) == len(recs)
        for a, b in zip(recs, back):
            assert np.array_equal(a.series.values, b.series.values)
            assert (a.activity, a.subject_id, a.session) == (b.activity, b.subject_id, b.session)
            assert b.series.sample_rate_hz == pytest.approx(50.0)

    def test_gen_output_is_deterministic(self, tmp_path):
        recs = generate_synthetic(GenConfig(seed=4, counts={"NF2": 10}))
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(recs, p1)
        write_csv(recs, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_fifty_row_fall_file(self, tmp_path):
        rec = make_recording("r", 50, activity="F1", fill=1.0)
        path = tmp_path / "one.csv"
        write_csv([rec], path)
        out = load_csv(path)
        assert len(out) == 1
        assert out[0].binary_label == 1

    def test_header_only_file_is_empty(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("t,ax,ay,az,gx,gy,gz,activity,subject,session\n")
        assert load_csv(path) == []

    def test_malformed_value_names_the_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "t,ax,ay,az,gx,gy,gz,activity,subject,session\n"
            "0.0,1,2,3,4,5,6,NF1,s01,0\n"
            "0.02,abc,2,3,4,5,6,NF1,s01,0\n"
        )
        with pytest.raises(DataFormatError, match="line 3"):
            load_csv(path)

    def test_non_monotonic_timestamps_rejected(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text(
            "t,ax,ay,az,gx,gy,gz,activity,subject,session\n"
            "0.0,1,2,3,4,5,6,NF1,s01,0\n"
            "0.02,1,2,3,4,5,6,NF1,s01,0\n"
            "0.01,1,2,3,4,5,6,NF1,s01,0\n"
        )
        with pytest.raises(DataValidationError, match="line 4"):
            load_csv(path)

    def test_wrong_header_rejected(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("time,ax\n")
        with pytest.raises(DataFormatError):
            load_csv(path)

    def test_unknown_activity_rejected(self, tmp_path):
        path = tmp_path / "a.csv"
        path.write_text(
            "t,ax,ay,az,gx,gy,gz,activity,subject,session\n"
            "0.0,1,2,3,4,5,6,XYZ,s01,0\n"
        )
        with pytest.raises(DataFormatError, match="line 2"):
            load_csv(path)
