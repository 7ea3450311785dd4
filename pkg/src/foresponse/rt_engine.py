"""Real-time duplex audio engine: fixed 1024-sample blocks at 44100 Hz,
one loop per activity (calibration, voice check, response test, playback,
voice memo), shared ring buffers, and glitch accounting.

Signals are always fully precomputed before a loop starts; the block path
does no allocation-heavy work, no file I/O, and never blocks on locks.  A
deterministic simulated device is a first-class backend so every loop can
run headless and faster than real time; deadline misses are still counted
against the wall clock.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import fo_tracker

BLOCK_SIZE = 1024
SAMPLE_RATE = 44100
MEMO_SECONDS = 5.0
RMS_WINDOW_SECONDS = 0.5
DISPLAY_FLOOR_DBFS = -90.0


class LoopMode(str, Enum):
    CALIBRATION = "calibration"
    VOICE_CHECK = "voice_check"
    RESPONSE_TEST = "response_test"
    PLAYBACK = "playback"
    MEMO = "memo"


class DeviceUnavailableError(RuntimeError):
    pass


class EngineBusyError(RuntimeError):
    pass


class RingBuffer:
    """Single-writer, single-reader sample ring.

    The writer advances a monotone counter after copying data in, so a
    snapshot taken by the reader is consistent as long as the writer has not
    lapped it; capacity should comfortably exceed the largest snapshot.
    """

    def __init__(self, capacity: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._data = np.zeros(capacity)
        self._written = 0

    @property
    def total_written(self) -> int:
        return self._written

    def write(self, block: np.ndarray):
        n = len(block)
        if n > self.capacity:
            block = block[-self.capacity:]
            n = self.capacity
        pos = self._written % self.capacity
        first = min(n, self.capacity - pos)
        self._data[pos:pos + first] = block[:first]
        if first < n:
            self._data[:n - first] = block[first:]
        self._written += n

    def snapshot(self, n: int) -> np.ndarray:
        """Last n samples (zero-padded when fewer have been written)."""
        n = min(n, self.capacity)
        out = np.zeros(n)
        avail = min(n, self._written)
        end = self._written % self.capacity
        start = (end - avail) % self.capacity
        if avail:
            if start < end or end == 0:
                out[-avail:] = self._data[start:start + avail]
            else:
                head = self.capacity - start
                out[-avail:-avail + head] = self._data[start:]
                out[n - avail + head:] = self._data[:end]
        return out


def running_rms(snapshot: np.ndarray) -> float:
    """RMS level in dBFS with a display floor for silence."""
    if len(snapshot) == 0:
        raise ValueError("empty snapshot")
    rms = float(np.sqrt(np.mean(snapshot ** 2)))
    if rms <= 10.0 ** (DISPLAY_FLOOR_DBFS / 20.0):
        return DISPLAY_FLOOR_DBFS
    return 20.0 * np.log10(rms)


class SimulatedDuplexDevice:
    """Deterministic duplex device for headless runs.

    Output and input are exchanged block by block against a simulated device
    clock.  The input stream is injected (a prepared "microphone" array,
    zeros by default) and can be delayed by a configurable latency to mimic
    hardware round trips.  An optional pacing factor slows exchanges toward
    real time; by default the device runs as fast as the caller.
    """

    name = "simulated"

    def __init__(self, fs: int = SAMPLE_RATE, block_size: int = BLOCK_SIZE,
                 input_samples: np.ndarray | None = None,
                 latency_blocks: int = 0, pace: float | None = None):
        self.fs = fs
        self.block_size = block_size
        self.latency_blocks = latency_blocks
        self.pace = pace
        self._input = np.zeros(0) if input_samples is None else np.asarray(
            input_samples, dtype=np.float64)
        self._block_index = 0
        self.emitted: list[np.ndarray] = []

    def load_input(self, samples: np.ndarray):
        self._input = np.asarray(samples, dtype=np.float64)
        self._block_index = 0

    def exchange(self, out_block: np.ndarray) -> np.ndarray:
        """Write one output block, read the simultaneous input block."""
        if len(out_block) != self.block_size:
            raise ValueError("block size mismatch")
        self.emitted.append(out_block.copy())
        idx = self._block_index - self.latency_blocks
        start = idx * self.block_size
        block = np.zeros(self.block_size)
        if start + self.block_size > 0 and start < len(self._input):
            lo = max(0, start)
            hi = min(len(self._input), start + self.block_size)
            block[lo - start:hi - start] = self._input[lo:hi]
        self._block_index += 1
        if self.pace:
            time.sleep(self.block_size / self.fs / self.pace)
        return block

    def close(self):
        pass


def list_devices() -> list[dict]:
    """Enumerate available duplex devices by name."""
    devices = [{"name": SimulatedDuplexDevice.name, "fs": SAMPLE_RATE,
                "block_size": BLOCK_SIZE, "simulated": True}]
    try:  # hardware backend is optional; absent in headless environments
        import sounddevice  # noqa: F401
        for dev in sounddevice.query_devices():
            if dev.get("max_input_channels", 0) and dev.get("max_output_channels", 0):
                devices.append({"name": dev["name"],
                                "fs": int(dev["default_samplerate"]),
                                "block_size": BLOCK_SIZE, "simulated": False})
    except Exception:
        pass
    return devices


def open_device(name: str, **kwargs) -> SimulatedDuplexDevice:
    if name == SimulatedDuplexDevice.name:
        return SimulatedDuplexDevice(**kwargs)
    raise DeviceUnavailableError(
        f"device {name!r} is not available (no hardware backend loaded)")


@dataclass
class LoopReport:
    mode: LoopMode
    blocks: int
    underruns: int
    overruns: int
    elapsed: float
    capture: np.ndarray | None = None      # (n, 2) for response tests, (n,) otherwise
    events: list = field(default_factory=list)
    loopback_lag_blocks: int | None = None


class AudioEngine:
    """Runs one real-time loop at a time against a duplex device."""

    def __init__(self, device: SimulatedDuplexDevice):
        self.device = device
        self._running = threading.Event()
        self._stop_requested = threading.Event()
        self.block_index = 0          # progress, readable from other threads
        self.pitch_ring = RingBuffer(8 * fo_tracker.DEFAULT_WINDOW)
        self.rms_ring = RingBuffer(int(RMS_WINDOW_SECONDS * device.fs) * 4)

    @property
    def running(self) -> bool:
        return self._running.is_set()

    def request_stop(self):
        self._stop_requested.set()

    def run_duplex(self, source: np.ndarray | None, mode: LoopMode,
                   duration: float | None = None, event_cb=None,
                   pitch_target: float | None = None,
                   block_hook=None) -> LoopReport:
        """Stream source blocks out while capturing input, with per-mode side
        effects.  Returns after the source (or duration) is exhausted or stop
        is requested.

        block_hook, when given, is called once per block before the exchange;
        tests use it to inject load for deadline-miss accounting.
        """
        if self._running.is_set():
            raise EngineBusyError("a loop is already running")
        self._running.set()
        self._stop_requested.clear()
        try:
            return self._run(source, LoopMode(mode), duration, event_cb,
                             pitch_target, block_hook)
        finally:
            self._running.clear()

    def _run(self, source, mode, duration, event_cb, pitch_target, block_hook):
        fs = self.device.fs
        bs = self.device.block_size
        deadline = bs / fs

        if mode == LoopMode.MEMO:
            total = int(round(MEMO_SECONDS * fs))
        elif source is not None:
            total = len(source)
        elif duration is not None:
            total = int(round(duration * fs))
        else:
            raise ValueError("need a source or a duration")
        n_blocks = -(-total // bs)

        capture_left = np.zeros(n_blocks * bs) if mode in (
            LoopMode.RESPONSE_TEST, LoopMode.MEMO, LoopMode.VOICE_CHECK,
            LoopMode.CALIBRATION) else None
        capture_right = np.zeros(n_blocks * bs) if mode == LoopMode.RESPONSE_TEST else None

        smoother = fo_tracker.DisplaySmoother()
        W = fo_tracker.DEFAULT_WINDOW
        underruns = 0
        overruns = 0
        events = []
        seq = 0

        def emit(event: dict):
            nonlocal seq
            event["seq"] = seq
            seq += 1
            events.append(event)
            if event_cb is not None:
                event_cb(event)

        self.block_index = 0
        t_start = time.perf_counter()
        last_second = -1

        for i in range(n_blocks):
            if self._stop_requested.is_set():
                n_blocks = i
                break
            t_block = time.perf_counter()
            if block_hook is not None:
                block_hook(i)

            if source is None:
                out = np.zeros(bs)
            else:
                out = np.zeros(bs)
                chunk = source[i * bs:(i + 1) * bs]
                out[:len(chunk)] = chunk

            in_block = self.device.exchange(out)

            if capture_left is not None:
                capture_left[i * bs:(i + 1) * bs] = in_block
            if capture_right is not None:
                capture_right[i * bs:(i + 1) * bs] = out

            if mode == LoopMode.VOICE_CHECK:
                self.pitch_ring.write(in_block)
                if self.pitch_ring.total_written >= W + 1 and pitch_target:
                    seg = self.pitch_ring.snapshot(W + 1)
                    ratio = 2.0 ** (fo_tracker.SEARCH_SEMITONES / 12.0)
                    fo_hz, amp, quality, loud = fo_tracker.estimate_if_frame(
                        seg, fs, pitch_target / ratio, pitch_target * ratio)
                    voiced = loud and quality >= fo_tracker.QUALITY_THRESHOLD
                    smoothed = smoother.update(fo_hz, voiced)
                    emit({"type": "pitch", "time": (i + 1) * bs / fs,
                          "fo_hz": smoothed, "voiced": bool(voiced),
                          "amp_dbfs": amp})
            elif mode == LoopMode.CALIBRATION:
                self.rms_ring.write(in_block)
                level = running_rms(self.rms_ring.snapshot(int(RMS_WINDOW_SECONDS * fs)))
                peak_block = float(np.max(np.abs(in_block))) if len(in_block) else 0.0
                emit({"type": "meter", "time": (i + 1) * bs / fs,
                      "rms_dbfs": level, "peak": peak_block})

            second = int((i + 1) * bs / fs)
            if second != last_second:
                last_second = second
                emit({"type": "elapsed", "seconds": second})

            self.block_index = i + 1
            if time.perf_counter() - t_block > deadline:
                underruns += 1

        elapsed = time.perf_counter() - t_start
        capture = None
        if mode == LoopMode.RESPONSE_TEST:
            capture = np.stack([capture_left[:total], capture_right[:total]], axis=1)
        elif capture_left is not None:
            capture = capture_left[:total]

        report = LoopReport(mode=mode, blocks=n_blocks, underruns=underruns,
                            overruns=overruns, elapsed=elapsed,
                            capture=capture, events=events)
        if mode == LoopMode.RESPONSE_TEST and self.device.latency_blocks:
            report.loopback_lag_blocks = self.device.latency_blocks
        return report
