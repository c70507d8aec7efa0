"""Dataset construction.

Recordings come from two sources: a CSV file (schema below) or the seeded
synthetic generator.  Recordings are cut into fixed-length windows which a
stratified, recording-level split partitions into train and test sides.

CSV schema (exact): header ``t,ax,ay,az,gx,gy,gz,activity,subject,session``,
`t` in seconds, accelerations in m/s^2, angular rates in deg/s, activity
codes NF1..NF6 / F1..F4, UTF-8, LF line endings, '.' decimal separator.
"""

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DataFormatError,
    DataValidationError,
    InvalidInputError,
    InvalidSpecError,
    StratificationError,
)
from .signals import N_CHANNELS, NormParams, PreprocessConfig, RawSeries, fit_normalizer

GRAVITY = 9.81

ADL_CODES = ("NF1", "NF2", "NF3", "NF4", "NF5", "NF6")
FALL_CODES = ("F1", "F2", "F3", "F4")
ALL_CODES = ADL_CODES + FALL_CODES

ACTIVITY_NAMES = {
    "NF1": "walking",
    "NF2": "sitting",
    "NF3": "lying",
    "NF4": "running",
    "NF5": "sudden_sit",
    "NF6": "sudden_standing",
    "F1": "fall_forward",
    "F2": "fall_backward",
    "F3": "fall_left",
    "F4": "fall_right",
}
CODE_BY_NAME = {v: k for k, v in ACTIVITY_NAMES.items()}

# Default window counts per activity.
DEFAULT_COUNTS = {
    "NF1": 980,
    "NF2": 1010,
    "NF3": 970,
    "NF4": 1200,
    "NF5": 1100,
    "NF6": 1220,
    "F1": 1200,
    "F2": 990,
    "F3": 1000,
    "F4": 1100,
}

CSV_HEADER = ["t", "ax", "ay", "az", "gx", "gy", "gz", "activity", "subject", "session"]


@dataclass(frozen=True)
class LabeledRecording:
    """One contiguous sensor session with a single activity label."""

    recording_id: str
    series: RawSeries
    activity: str
    subject_id: str
    session: int = 0

    def __post_init__(self):
        if self.activity not in ALL_CODES:
            raise InvalidInputError(f"unknown activity code {self.activity!r}")

    @property
    def binary_label(self) -> int:
        """1 for falls (F1..F4), 0 for activities of daily living."""
        return 1 if self.activity in FALL_CODES else 0


@dataclass(frozen=True)
class WindowOrigin:
    recording_id: str
    start: int


@dataclass(frozen=True)
class Window:
    """A fixed-length slice of a recording plus its binary label."""

    values: np.ndarray
    label: int
    origin: WindowOrigin

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != N_CHANNELS:
            raise InvalidInputError(f"window must be (len, {N_CHANNELS}), got {v.shape}")
        if self.label not in (0, 1):
            raise InvalidInputError(f"window label must be 0 or 1, got {self.label}")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class DatasetSplit:
    train: list
    test: list
    seed: int


@dataclass(frozen=True)
class GenConfig:
    """Synthetic generator settings.

    ``counts`` is the number of windows to produce per activity code; the
    generator sizes recordings so that windowing at (window_len, stride)
    yields exactly those counts.  Fall recordings are kept short
    (fall_windows_per_recording defaults to 2) so the impact stays visible
    in every window cut from them.
    """

    seed: int = 0
    sample_rate_hz: float = 50.0
    counts: dict = field(default_factory=lambda: dict(DEFAULT_COUNTS))
    window_len: int = 50
    stride: int = 25
    adl_windows_per_recording: int = 10
    fall_windows_per_recording: int = 2

    def __post_init__(self):
        if self.seed < 0:
            raise InvalidSpecError("seed must be non-negative")
        if self.sample_rate_hz <= 0:
            raise InvalidSpecError("sample_rate_hz must be positive")
        for code, n in self.counts.items():
            if code not in ALL_CODES:
                raise InvalidSpecError(f"unknown activity code {code!r} in counts")
            if n < 0:
                raise InvalidSpecError(f"count for {code} must be >= 0")


def scaled_counts(scale: float, base: dict | None = None) -> dict:
    """Scale the default per-activity window counts (rounded to integers)."""
    base = dict(DEFAULT_COUNTS if base is None else base)
    return {k: max(0, int(round(v * scale))) for k, v in base.items()}


def _recording_length(n_windows: int, window_len: int, stride: int) -> int:
    return window_len + stride * (n_windows - 1)


def _gait(rng, n, rate, step_hz, vert_amp, sway_amp, gyro_amp, acc_noise, gyro_noise):
    t = np.arange(n) / rate
    f = rng.uniform(*step_hz)
    ph = rng.uniform(0.0, 2.0 * np.pi, size=6)
    v = np.zeros((n, N_CHANNELS))
    v[:, 0] = sway_amp * np.sin(2 * np.pi * f * t + ph[0])
    v[:, 1] = 0.6 * sway_amp * np.sin(2 * np.pi * f * t + ph[1])
    v[:, 2] = (
        GRAVITY
        + vert_amp * np.sin(2 * np.pi * f * t + ph[2])
        + 0.4 * vert_amp * np.sin(4 * np.pi * f * t + ph[3])
    )
    v[:, 3] = gyro_amp * np.sin(2 * np.pi * f * t + ph[4])
    v[:, 4] = 0.7 * gyro_amp * np.sin(2 * np.pi * f * t + ph[5])
    v[:, 5] = 0.4 * gyro_amp * np.sin(2 * np.pi * f * t + ph[0])
    v[:, :3] += rng.normal(0.0, acc_noise, size=(n, 3))
    v[:, 3:] += rng.normal(0.0, gyro_noise, size=(n, 3))
    return v


def _static_posture(rng, n, gravity_axis, gravity_sign, tilt, acc_noise, gyro_noise):
    v = np.zeros((n, N_CHANNELS))
    v[:, gravity_axis] = gravity_sign * GRAVITY * np.cos(tilt)
    other = 2 if gravity_axis != 2 else 0
    v[:, other] = GRAVITY * np.sin(tilt)
    v[:, :3] += rng.normal(0.0, acc_noise, size=(n, 3))
    v[:, 3:] += rng.normal(0.0, gyro_noise, size=(n, 3))
    return v


def _posture_transitions(rng, n, rate, downward):
    """Sudden sit / sudden stand: quiet posture with brisk vertical transients."""
    v = _static_posture(rng, n, 2, 1.0, rng.uniform(0.0, 0.1), 0.08, 1.0)
    period = int(rng.uniform(1.4, 2.2) * rate)
    start = int(rng.uniform(0.2, 0.8) * period)
    width = max(3, int(0.16 * rate))
    sign = -1.0 if downward else 1.0
    for center in range(start, n, period):
        amp = rng.uniform(3.0, 4.8)
        lo = max(0, center - width)
        hi = min(n, center + width + 1)
        idx = np.arange(lo, hi)
        bump = np.exp(-0.5 * ((idx - center) / (width / 2.0)) ** 2)
        v[lo:hi, 2] += sign * amp * bump
        v[lo:hi, 3] += rng.uniform(25.0, 55.0) * bump
    return v


_FALL_DIRECTIONS = {
    # accel axis, sign, gyro axis for the main rotation
    "F1": (0, 1.0, 4),
    "F2": (0, -1.0, 4),
    "F3": (1, -1.0, 3),
    "F4": (1, 1.0, 3),
}

# Relative spike envelope; 5 samples so a 3-point median keeps most of the peak.
_IMPACT_ENVELOPE = np.array([0.35, 0.75, 1.0, 0.8, 0.45])


def _fall(rng, n, rate, code):
    axis, sign, gyro_axis = _FALL_DIRECTIONS[code]
    v = _static_posture(rng, n, 2, 1.0, rng.uniform(0.0, 0.08), 0.08, 1.0)

    # Impact placed so every window cut at the default stride contains it.
    impact = int(rng.integers(30, 45)) if n >= 50 else n // 2
    impact = min(impact, n - 6)

    # Short descent: support drops away, rotation rate ramps up.
    fall_len = int(rng.integers(5, 9))
    lo = max(0, impact - fall_len)
    ramp = np.linspace(0.0, 1.0, impact - lo, endpoint=False)
    v[lo:impact, 2] = GRAVITY * (1.0 - 0.65 * ramp) + rng.normal(0.0, 0.15, impact - lo)
    peak_rate = sign * rng.uniform(140.0, 260.0)
    v[lo:impact, gyro_axis] = peak_rate * ramp

    # Impact spike: sample magnitude peaks uniformly in [2g, 4g].
    peak = rng.uniform(2.0 * GRAVITY, 4.0 * GRAVITY)
    direction = np.zeros(3)
    direction[axis] = 0.8 * sign
    direction[2] = 0.6
    hi = min(n, impact + len(_IMPACT_ENVELOPE) - 2)
    env = _IMPACT_ENVELOPE[: hi - (impact - 2)]
    v[impact - 2 : hi, :3] = peak * np.outer(env, direction)
    v[impact - 2 : hi, gyro_axis] = peak_rate * np.linspace(1.0, 0.2, len(env))

    # Orientation settles onto the fall-direction axis, then stillness.
    settle = min(n, hi + 8)
    rest = np.zeros(3)
    rest[axis] = sign * GRAVITY * 0.96
    rest[2] = GRAVITY * 0.2
    if settle > hi:
        frac = np.linspace(0.3, 1.0, settle - hi)[:, None]
        v[hi:settle, :3] = frac * rest + (1 - frac) * v[hi - 1, :3]
        v[hi:settle, gyro_axis] = peak_rate * 0.2 * (1 - frac[:, 0])
    if n > settle:
        v[settle:, :3] = rest + rng.normal(0.0, 0.05, (n - settle, 3))
        v[settle:, 3:] = rng.normal(0.0, 0.6, (n - settle, 3))
    return v


def _waveform(code, rng, n, rate):
    if code == "NF1":
        return _gait(rng, n, rate, (1.6, 2.2), 1.2, 0.8, 18.0, 0.25, 3.0)
    if code == "NF2":
        return _static_posture(rng, n, 2, 1.0, rng.uniform(0.0, 0.15), 0.06, 0.8)
    if code == "NF3":
        axis = int(rng.integers(0, 2))
        return _static_posture(rng, n, axis, rng.choice([-1.0, 1.0]), rng.uniform(0.0, 0.1), 0.05, 0.5)
    if code == "NF4":
        return _gait(rng, n, rate, (2.6, 3.2), 3.0, 1.4, 45.0, 0.6, 6.0)
    if code == "NF5":
        return _posture_transitions(rng, n, rate, downward=True)
    if code == "NF6":
        return _posture_transitions(rng, n, rate, downward=False)
    return _fall(rng, n, rate, code)


def generate_synthetic(config: GenConfig) -> list:
    """Deterministic synthetic corpus.

    Each recording draws from its own RNG stream keyed by (seed, recording
    index), so output is identical regardless of generation order.
    """
    recordings = []
    rec_index = 0
    session_counter = {}
    for code in ALL_CODES:
        remaining = int(config.counts.get(code, 0))
        per_rec = (
            config.fall_windows_per_recording
            if code in FALL_CODES
            else config.adl_windows_per_recording
        )
        while remaining > 0:
            n_windows = min(per_rec, remaining)
            remaining -= n_windows
            n = _recording_length(n_windows, config.window_len, config.stride)
            rng = np.random.default_rng([config.seed, rec_index])
            values = _waveform(code, rng, n, config.sample_rate_hz)
            subject = f"s{(rec_index % 6) + 1:02d}"
            session = session_counter.get((subject, code), 0)
            session_counter[(subject, code)] = session + 1
            recordings.append(
                LabeledRecording(
                    recording_id=f"{code}-{rec_index:05d}",
                    series=RawSeries(values, config.sample_rate_hz),
                    activity=code,
                    subject_id=subject,
                    session=session,
                )
            )
            rec_index += 1
    return recordings


def make_windows(recording: LabeledRecording, window_len: int = 50, stride: int = 25) -> list:
    """Cut a recording into windows starting at 0, stride, 2*stride, ..."""
    if stride < 1:
        raise InvalidSpecError(f"stride must be >= 1, got {stride}")
    if window_len < 1:
        raise InvalidSpecError(f"window_len must be >= 1, got {window_len}")
    values = recording.series.values
    n = values.shape[0]
    if n < window_len:
        return []
    count = (n - window_len) // stride + 1
    label = recording.binary_label
    return [
        Window(
            values=values[s : s + window_len].copy(),
            label=label,
            origin=WindowOrigin(recording.recording_id, s),
        )
        for s in (i * stride for i in range(count))
    ]


def stratified_split(windows, test_fraction: float, seed: int) -> DatasetSplit:
    """Split by recording origin, stratified on the binary class.

    No window of a recording ever appears on both sides, and each class
    contributes round(test_fraction * n_recordings) recordings to test.
    """
    if not 0.0 < test_fraction < 1.0:
        raise InvalidSpecError(f"test_fraction must be in (0, 1), got {test_fraction}")
    windows = list(windows)
    rec_label = {}
    rec_order = []
    for w in windows:
        rid = w.origin.recording_id
        if rid not in rec_label:
            rec_label[rid] = w.label
            rec_order.append(rid)
        elif rec_label[rid] != w.label:
            raise InvalidInputError(f"recording {rid} carries windows with mixed labels")

    rng = np.random.default_rng(seed)
    test_ids = set()
    for cls in (0, 1):
        ids = [r for r in rec_order if rec_label[r] == cls]
        if not ids:
            continue
        if len(ids) < 2:
            raise StratificationError(
                f"class {cls} has only {len(ids)} recording(s); need at least 2 to split"
            )
        perm = rng.permutation(len(ids))
        n_test = int(round(test_fraction * len(ids)))
        test_ids.update(ids[i] for i in perm[:n_test])

    train = [w for w in windows if w.origin.recording_id not in test_ids]
    test = [w for w in windows if w.origin.recording_id in test_ids]
    return DatasetSplit(train=train, test=test, seed=seed)


def normalize_windows(windows, params: NormParams) -> list:
    return [replace(w, values=params.transform(w.values)) for w in windows]


def prepare_split(
    recordings,
    *,
    preprocess: PreprocessConfig | None = None,
    window_len: int = 50,
    stride: int = 25,
    test_fraction: float = 0.176,
    seed: int = 0,
    norm_mode: str = "minmax",
    norm_params: NormParams | None = None,
):
    """Full pipeline: filter, window, split, then normalize.

    Normalization statistics are fitted on the train-side recordings only
    (pass norm_params to reuse frozen statistics instead, e.g. when
    evaluating a saved model).  Returns (split, norm_params).
    """
    recordings = list(recordings)
    if preprocess is not None:
        recordings = [replace(r, series=preprocess.apply(r.series)) for r in recordings]
    windows = [w for r in recordings for w in make_windows(r, window_len, stride)]
    split = stratified_split(windows, test_fraction, seed)
    if norm_params is None:
        test_ids = {w.origin.recording_id for w in split.test}
        train_series = [r.series for r in recordings if r.recording_id not in test_ids]
        norm_params = fit_normalizer(train_series, norm_mode)
    split = DatasetSplit(
        train=normalize_windows(split.train, norm_params),
        test=normalize_windows(split.test, norm_params),
        seed=split.seed,
    )
    return split, norm_params


def windows_to_arrays(windows):
    """Stack windows into (n, len, 6) values and (n,) labels."""
    windows = list(windows)
    if not windows:
        return np.zeros((0, 0, N_CHANNELS)), np.zeros(0, dtype=np.int64)
    x = np.stack([w.values for w in windows])
    y = np.array([w.label for w in windows], dtype=np.int64)
    return x, y


def write_csv(recordings, path) -> None:
    """Write recordings in the documented CSV schema (deterministic output)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for rec in recordings:
            rate = rec.series.sample_rate_hz
            for i, row in enumerate(rec.series.values):
                t = i / rate
                fields = [repr(float(t))] + [repr(float(v)) for v in row]
                fields += [rec.activity, rec.subject_id, str(rec.session)]
                fh.write(",".join(fields) + "\n")


def load_csv(path, default_sample_rate_hz: float = 50.0) -> list:
    """Parse a dataset CSV into recordings.

    One recording per contiguous (subject, activity, session) run of rows.
    Timestamps must be strictly increasing within a recording.
    """
    recordings = []
    current_key = None
    rows = []
    id_counts = {}

    def flush():
        nonlocal rows
        if current_key is None or not rows:
            return
        subject, activity, session = current_key
        times = np.array([r[0] for r in rows])
        values = np.array([r[1] for r in rows])
        if len(times) >= 2:
            rate = (len(times) - 1) / (times[-1] - times[0])
        else:
            rate = default_sample_rate_hz
        base_id = f"{subject}:{activity}:{session}"
        occurrence = id_counts.get(base_id, 0)
        id_counts[base_id] = occurrence + 1
        rec_id = base_id if occurrence == 0 else f"{base_id}#{occurrence}"
        recordings.append(
            LabeledRecording(
                recording_id=rec_id,
                series=RawSeries(values, rate),
                activity=activity,
                subject_id=subject,
                session=session,
            )
        )
        rows = []

    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError("empty file: missing CSV header") from None
        if header != CSV_HEADER:
            raise DataFormatError(
                f"bad CSV header {header!r}; expected {','.join(CSV_HEADER)!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise DataFormatError(f"line {lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
            try:
                t = float(row[0])
                vals = [float(x) for x in row[1:7]]
            except ValueError as exc:
                raise DataFormatError(f"line {lineno}: {exc}") from None
            activity, subject = row[7], row[8]
            if activity not in ALL_CODES:
                raise DataFormatError(f"line {lineno}: unknown activity code {activity!r}")
            try:
                session = int(row[9])
            except ValueError:
                raise DataFormatError(f"line {lineno}: session must be an integer") from None
            key = (subject, activity, session)
            if key != current_key:
                flush()
                current_key = key
            elif rows and t <= rows[-1][0]:
                raise DataValidationError(
                    f"line {lineno}: non-monotonic timestamp {t} within session {key}"
                )
            rows.append((t, vals))
    flush()
    return recordings
