"""Streaming inference: rolling-window evaluation of an ordered frame feed
with debounced fall alerts.

The preprocessing here is the causal, incremental twin of the offline
pipeline: a stateful biquad cascade plus a centered median with reflect
padding (which needs (window-1)/2 frames of lookahead, so it emits with
that small delay).  ``finalize()`` flushes the median tail with the same
reflection the offline filter uses, so a finite replay is preprocessed
bit-identically to the offline path.
"""

import threading
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, InvalidSpecError
from .network import LstmModel, forward
from .signals import N_CHANNELS, butterworth_sos


@dataclass(frozen=True)
class SensorFrame:
    """One timestamped 6-channel reading."""

    t: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (N_CHANNELS,):
            raise InvalidInputError(f"frame must carry {N_CHANNELS} channels, got {v.shape}")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class StreamConfig:
    threshold: float = 0.5
    consecutive_windows: int = 3
    refractory_seconds: float = 10.0
    stride: int = 25
    device_id: str = "dev0"

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise InvalidSpecError(f"threshold must be in (0, 1), got {self.threshold}")
        if self.consecutive_windows < 1:
            raise InvalidSpecError("consecutive_windows must be >= 1")
        if self.refractory_seconds < 0:
            raise InvalidSpecError("refractory_seconds must be >= 0")
        if self.stride < 1:
            raise InvalidSpecError("stride must be >= 1")


@dataclass(frozen=True)
class FallAlert:
    event_time: float
    probability: float
    window_index: int
    device_id: str


@dataclass(frozen=True)
class WindowEval:
    window_index: int
    event_time: float
    p_fall: float
    alerted: bool


class AlertGate:
    """Debounce: alert on the k-th consecutive above-threshold evaluation,
    then stay silent for the refractory period."""

    def __init__(self, config: StreamConfig):
        self.config = config
        self._streak = 0
        self._quiet_until = -np.inf

    def update(self, p_fall: float, event_time: float, window_index: int):
        if p_fall < self.config.threshold:
            self._streak = 0
            return None
        self._streak += 1
        if self._streak < self.config.consecutive_windows:
            return None
        if event_time < self._quiet_until:
            return None
        self._streak = 0
        self._quiet_until = event_time + self.config.refractory_seconds
        return FallAlert(
            event_time=event_time,
            probability=p_fall,
            window_index=window_index,
            device_id=self.config.device_id,
        )


class _MedianStream:
    """Incremental centered median; equals the offline reflect-padded filter."""

    def __init__(self, window: int):
        if window < 1 or window % 2 == 0:
            raise InvalidSpecError(f"median window must be odd and positive, got {window}")
        self.window = window
        self.delay = (window - 1) // 2
        self._frames = deque(maxlen=window)
        self._count = 0

    def _value(self, abs_index: int, newest: int):
        # Reflect indexing past either end of what has been seen so far.
        if abs_index < 0:
            abs_index = -abs_index
        elif abs_index > newest:
            abs_index = 2 * newest - abs_index
        return self._frames[abs_index - (self._count - len(self._frames))]

    def _emit(self, center: int, newest: int):
        window = [self._value(center + k, newest) for k in range(-self.delay, self.delay + 1)]
        return np.median(np.stack(window), axis=0)

    def push(self, values: np.ndarray):
        self._frames.append(values)
        self._count += 1
        newest = self._count - 1
        center = newest - self.delay
        if center < 0:
            return []
        return [self._emit(center, newest)]

    def finalize(self):
        if self._count == 0:
            return []
        newest = self._count - 1
        return [self._emit(c, newest) for c in range(newest - self.delay + 1, newest + 1) if c >= 0]


class _BiquadStream:
    """Per-frame second-order-section cascade (direct form II transposed)."""

    def __init__(self, sos: np.ndarray):
        self.sos = sos
        self._z1 = np.zeros((len(sos), N_CHANNELS))
        self._z2 = np.zeros((len(sos), N_CHANNELS))

    def push(self, values: np.ndarray):
        x = values
        for s, (b0, b1, b2, _, a1, a2) in enumerate(self.sos):
            y = b0 * x + self._z1[s]
            self._z1[s] = b1 * x - a1 * y + self._z2[s]
            self._z2[s] = b2 * x - a2 * y
            x = y
        return x


@dataclass
class StreamResult:
    evaluations: list = field(default_factory=list)
    alerts: list = field(default_factory=list)
    dropped_frames: int = 0


class StreamSession:
    """Stateful driver: push frames, collect per-window evaluations and alerts.

    Frames must arrive in strictly increasing timestamp order; stale frames
    are dropped and counted.  The first evaluation happens once 50
    preprocessed samples are buffered, then every ``stride`` samples.
    """

    def __init__(self, model: LstmModel, config: StreamConfig):
        if model.norm_params is None:
            raise InvalidInputError("streaming needs a model with frozen normalization statistics")
        self.model = model
        self.config = config
        self.gate = AlertGate(config)
        self.result = StreamResult()
        pre = model.preprocess
        self._median = None
        self._biquad = None
        if pre is not None and pre.median_window is not None and pre.median_window > 1:
            self._median = _MedianStream(pre.median_window)
        if pre is not None and pre.lowpass is not None:
            self._biquad = _BiquadStream(butterworth_sos(pre.lowpass, model.sample_rate_hz))
        self._window = deque(maxlen=model.window_len)
        self._times = deque(maxlen=model.window_len)
        self._pending_times = deque()
        self._emitted = 0
        self._last_t = -np.inf

    @property
    def evaluations(self):
        return self.result.evaluations

    @property
    def alerts(self):
        return self.result.alerts

    def _ingest(self, values: np.ndarray, t: float):
        if self._biquad is not None:
            values = self._biquad.push(values)
        self._window.append(self.model.norm_params.transform(values))
        self._times.append(t)
        self._emitted += 1
        win = self.model.window_len
        if self._emitted < win or (self._emitted - win) % self.config.stride != 0:
            return
        window = np.stack(self._window)
        probs, _ = forward(self.model, window)
        p_fall = float(probs[1])
        index = (self._emitted - win) // self.config.stride
        event_time = self._times[-1]
        alert = self.gate.update(p_fall, event_time, index)
        self.result.evaluations.append(
            WindowEval(window_index=index, event_time=event_time, p_fall=p_fall, alerted=alert is not None)
        )
        if alert is not None:
            self.result.alerts.append(alert)

    def push(self, frame: SensorFrame) -> None:
        if frame.t <= self._last_t:
            self.result.dropped_frames += 1
            return
        self._last_t = frame.t
        if self._median is not None:
            self._pending_times.append(frame.t)
            for values in self._median.push(frame.values):
                self._ingest(values, self._pending_times.popleft())
        else:
            self._ingest(frame.values, frame.t)

    def finalize(self) -> None:
        """Flush the median lookahead (reflecting at the tail, like offline)."""
        if self._median is None:
            return
        for values in self._median.finalize():
            self._ingest(values, self._pending_times.popleft())


def stream_infer(frames, model: LstmModel, config: StreamConfig) -> StreamResult:
    """Replay an ordered frame feed through a session, finalizing at the end."""
    session = StreamSession(model, config)
    for frame in frames:
        session.push(frame)
    session.finalize()
    return session.result


def frames_from_recording(recording, t_offset: float = 0.0):
    """Yield SensorFrames for a recording, timestamps offset by t_offset."""
    rate = recording.series.sample_rate_hz
    for i, row in enumerate(recording.series.values):
        yield SensorFrame(t=t_offset + i / rate, values=row)


def frames_from_recordings(recordings):
    """Concatenate recordings into one monotonic stream."""
    offset = 0.0
    for rec in recordings:
        rate = rec.series.sample_rate_hz
        for frame in frames_from_recording(rec, t_offset=offset):
            yield frame
        offset += len(rec.series) / rate


class FrameQueue:
    """Bounded producer/consumer hand-off. On overflow the oldest frame is
    dropped and counted; stale motion data is worthless for fall detection."""

    def __init__(self, capacity: int = 256):
        self._frames = deque()
        self.capacity = capacity
        self.dropped = 0
        self._closed = False
        self._lock = threading.Lock()
        self._ready = threading.Condition(self._lock)

    def put(self, frame: SensorFrame) -> None:
        with self._ready:
            if len(self._frames) >= self.capacity:
                self._frames.popleft()
                self.dropped += 1
            self._frames.append(frame)
            self._ready.notify()

    def get(self, timeout: float = 0.1):
        with self._ready:
            while not self._frames and not self._closed:
                self._ready.wait(timeout)
                if timeout is not None:
                    break
            if self._frames:
                return self._frames.popleft()
            return None

    def close(self) -> None:
        with self._ready:
            self._closed = True
            self._ready.notify_all()

    @property
    def closed(self) -> bool:
        with self._lock:
            return self._closed and not self._frames


class LiveRunner:
    """Threaded wiring: frame producer -> bounded queue -> inference,
    with alert delivery on its own thread so it never blocks inference."""

    def __init__(self, model, config: StreamConfig, deliver=None, queue_capacity: int = 256):
        self.session = StreamSession(model, config)
        self.queue = FrameQueue(queue_capacity)
        self.deliver = deliver
        self._alert_queue = deque()
        self._alert_ready = threading.Condition()
        self._stop = threading.Event()
        self.delivery_results = []

    def _notify_loop(self):
        while True:
            with self._alert_ready:
                while not self._alert_queue and not self._stop.is_set():
                    self._alert_ready.wait(0.05)
                alert = self._alert_queue.popleft() if self._alert_queue else None
            if alert is None:
                if self._stop.is_set():
                    return
                continue
            self.delivery_results.append(self.deliver(alert))

    def run(self, frames, pace_s: float = 0.0):
        """Consume ``frames`` through the queue; returns the StreamResult."""
        notifier = None
        if self.deliver is not None:
            notifier = threading.Thread(target=self._notify_loop, daemon=True)
            notifier.start()

        def produce():
            for frame in frames:
                self.queue.put(frame)
                if pace_s > 0:
                    time.sleep(pace_s)
            self.queue.close()

        producer = threading.Thread(target=produce, daemon=True)
        producer.start()
        seen_alerts = 0
        while True:
            frame = self.queue.get()
            if frame is None:
                if self.queue.closed:
                    break
                continue
            self.session.push(frame)
            for alert in self.session.alerts[seen_alerts:]:
                with self._alert_ready:
                    self._alert_queue.append(alert)
                    self._alert_ready.notify()
            seen_alerts = len(self.session.alerts)
        self.session.finalize()
        for alert in self.session.alerts[seen_alerts:]:
            with self._alert_ready:
                self._alert_queue.append(alert)
                self._alert_ready.notify()
        producer.join()
        if notifier is not None:
            while True:
                with self._alert_ready:
                    if not self._alert_queue:
                        break
                time.sleep(0.01)
            self._stop.set()
            with self._alert_ready:
                self._alert_ready.notify_all()
            notifier.join()
        result = self.session.result
        result.dropped_frames += self.queue.dropped
        return result
