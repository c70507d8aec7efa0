"""Preprocessing for 6-channel motion streams.

Covers the three steps applied to raw sensor data before windowing:
a low-pass IIR filter (Butterworth prototype, bilinear transform with
cutoff prewarping, realized as cascaded second-order sections), a
centered median filter with reflect padding, and per-channel
normalization (min-max or z-score) whose statistics are fitted once on
training data and frozen.

All filtering is causal (forward-only) so that offline preprocessing and
the live streaming path see the same transfer function.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidInputError, InvalidSpecError

N_CHANNELS = 6
CHANNEL_NAMES = ("ax", "ay", "az", "gx", "gy", "gz")


@dataclass(frozen=True)
class RawSeries:
    """A fixed-rate recording: one row per sample, columns ax..az (m/s^2), gx..gz (deg/s)."""

    values: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != N_CHANNELS:
            raise InvalidInputError(
                f"series must be (n_samples, {N_CHANNELS}), got {np.shape(self.values)}"
            )
        if v.shape[0] < 1:
            raise InvalidInputError("series must contain at least one sample")
        if not self.sample_rate_hz > 0:
            raise InvalidInputError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class FilterSpec:
    """Low-pass filter design parameters."""

    cutoff_hz: float
    order: int = 4
    kind: str = "lowpass"

    def __post_init__(self):
        if self.kind != "lowpass":
            raise InvalidSpecError(f"unsupported filter kind {self.kind!r}")
        if not self.cutoff_hz > 0:
            raise InvalidSpecError(f"cutoff_hz must be positive, got {self.cutoff_hz}")
        if not 1 <= int(self.order) <= 8:
            raise InvalidSpecError(f"order must be in [1, 8], got {self.order}")


def butterworth_sos(spec: FilterSpec, sample_rate_hz: float) -> np.ndarray:
    """Design second-order sections for a digital Butterworth low-pass.

    Analog prototype poles are prewarped so the -3 dB point lands exactly
    on spec.cutoff_hz after the bilinear transform, then conjugate pole
    pairs are mapped to biquads (plus one first-order section for odd
    orders).  Each section is normalized to unit DC gain, so the cascade
    has DC gain exactly 1.

    Returns an array of rows [b0, b1, b2, 1, a1, a2].
    """
    nyquist = sample_rate_hz / 2.0
    if not spec.cutoff_hz < nyquist:
        raise InvalidSpecError(
            f"cutoff {spec.cutoff_hz} Hz must lie strictly below the Nyquist "
            f"frequency {nyquist} Hz"
        )
    n = int(spec.order)
    fs2 = 2.0 * sample_rate_hz
    warped = fs2 * math.tan(math.pi * spec.cutoff_hz / sample_rate_hz)

    sections = []
    # Conjugate pole pairs of the analog prototype, scaled to the warped cutoff.
    for k in range(n // 2):
        theta = math.pi * (2 * k + n + 1) / (2 * n)
        pole = warped * complex(math.cos(theta), math.sin(theta))
        z = (fs2 + pole) / (fs2 - pole)
        a1 = -2.0 * z.real
        a2 = abs(z) ** 2
        g = (1.0 + a1 + a2) / 4.0
        sections.append([g, 2.0 * g, g, 1.0, a1, a2])
    if n % 2:
        pole = -warped
        zp = (fs2 + pole) / (fs2 - pole)
        g = (1.0 - zp) / 2.0
        sections.append([g, g, 0.0, 1.0, -zp, 0.0])
    return np.asarray(sections, dtype=np.float64)


def sosfilt(sos: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Apply cascaded biquads causally (direct form II transposed, zero state)."""
    y = np.array(x, dtype=np.float64, copy=True)
    n = y.shape[0]
    for b0, b1, b2, _, a1, a2 in sos:
        z1 = np.zeros(y.shape[1:])
        z2 = np.zeros(y.shape[1:])
        for i in range(n):
            xi = y[i]
            out = b0 * xi + z1
            z1 = b1 * xi - a1 * out + z2
            z2 = b2 * xi - a2 * out
            y[i] = out
    return y


def butterworth_lowpass(series: RawSeries, spec: FilterSpec) -> RawSeries:
    """Low-pass filter every channel of a series. Length and rate are preserved."""
    sos = butterworth_sos(spec, series.sample_rate_hz)
    return RawSeries(sosfilt(sos, series.values), series.sample_rate_hz)


def median_filter(series: RawSeries, window_len: int) -> RawSeries:
    """Centered running median per channel, reflect-padded so length is preserved."""
    if window_len < 1 or window_len % 2 == 0:
        raise InvalidSpecError(f"median window must be odd and positive, got {window_len}")
    if window_len > len(series):
        raise InvalidSpecError(
            f"median window {window_len} exceeds series length {len(series)}"
        )
    if window_len == 1:
        return RawSeries(series.values.copy(), series.sample_rate_hz)
    pad = (window_len - 1) // 2
    padded = np.pad(series.values, ((pad, pad), (0, 0)), mode="reflect")
    windows = sliding_window_view(padded, window_len, axis=0)
    return RawSeries(np.median(windows, axis=-1), series.sample_rate_hz)


@dataclass(frozen=True)
class NormParams:
    """Frozen per-channel normalization statistics (population convention for std)."""

    mode: str
    minimum: np.ndarray
    maximum: np.ndarray
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        if self.mode not in ("minmax", "zscore"):
            raise InvalidSpecError(f"unknown normalization mode {self.mode!r}")
        for name in ("minimum", "maximum", "mean", "std"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (N_CHANNELS,):
                raise InvalidInputError(f"{name} must have shape ({N_CHANNELS},)")
            object.__setattr__(self, name, arr)

    def transform(self, values: np.ndarray) -> np.ndarray:
        """Normalize an (..., 6) array. Degenerate channels map to zero."""
        v = np.asarray(values, dtype=np.float64)
        if self.mode == "minmax":
            span = self.maximum - self.minimum
            safe = np.where(span > 0, span, 1.0)
            out = (v - self.minimum) / safe
            return np.where(span > 0, out, 0.0)
        safe = np.where(self.std > 0, self.std, 1.0)
        out = (v - self.mean) / safe
        return np.where(self.std > 0, out, 0.0)

    def inverse_transform(self, values: np.ndarray) -> np.ndarray:
        v = np.asarray(values, dtype=np.float64)
        if self.mode == "minmax":
            return v * (self.maximum - self.minimum) + self.minimum
        return v * self.std + self.mean

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "min": self.minimum.tolist(),
            "max": self.maximum.tolist(),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormParams":
        return cls(
            mode=d["mode"],
            minimum=np.asarray(d["min"], dtype=np.float64),
            maximum=np.asarray(d["max"], dtype=np.float64),
            mean=np.asarray(d["mean"], dtype=np.float64),
            std=np.asarray(d["std"], dtype=np.float64),
        )


def fit_normalizer(train_series, mode: str = "minmax") -> NormParams:
    """Compute per-channel statistics over every sample of a training collection."""
    series_list = list(train_series)
    if not series_list:
        raise InvalidInputError("cannot fit a normalizer on an empty collection")
    stacked = np.concatenate([s.values for s in series_list], axis=0)
    return NormParams(
        mode=mode,
        minimum=stacked.min(axis=0),
        maximum=stacked.max(axis=0),
        mean=stacked.mean(axis=0),
        std=stacked.std(axis=0),
    )


def apply_normalizer(series: RawSeries, params: NormParams) -> RawSeries:
    return RawSeries(params.transform(series.values), series.sample_rate_hz)


@dataclass(frozen=True)
class PreprocessConfig:
    """Which cleanup steps run before windowing: median first, then low-pass."""

    median_window: int | None = 3
    lowpass: FilterSpec | None = field(default_factory=lambda: FilterSpec(cutoff_hz=5.0, order=4))

    def apply(self, series: RawSeries) -> RawSeries:
        out = series
        if self.median_window is not None and self.median_window > 1:
            out = median_filter(out, self.median_window)
        if self.lowpass is not None:
            out = butterworth_lowpass(out, self.lowpass)
        return out

    def to_dict(self) -> dict:
        return {
            "median_window": self.median_window,
            "lowpass": None
            if self.lowpass is None
            else {"cutoff_hz": self.lowpass.cutoff_hz, "order": self.lowpass.order},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessConfig":
        lp = d.get("lowpass")
        return cls(
            median_window=d.get("median_window"),
            lowpass=None if lp is None else FilterSpec(cutoff_hz=lp["cutoff_hz"], order=lp["order"]),
        )
