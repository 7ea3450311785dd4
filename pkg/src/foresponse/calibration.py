"""Input-level calibration: pink-noise playback, running RMS metering, and
binding of a measured digital level to a sound-pressure reference.

The sound level meter at the microphone position is the external authority;
this module only stores the offset between a settled dBFS reading and the
70 or 80 dB reference the experimenter selected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .orthomix import pink_shape
from .rt_engine import running_rms, DISPLAY_FLOOR_DBFS  # noqa: F401  (re-export)

PINK_NOISE_RMS_DBFS = -20.0
REFERENCES_DB = (70, 80)
STABILITY_WINDOW_SECONDS = 1.0
STABILITY_MAX_STD_DB = 0.5


class AlreadyCalibratedError(RuntimeError):
    pass


class UnstableLevelError(RuntimeError):
    pass


@dataclass(frozen=True)
class CalibrationGain:
    offset_db: float          # dB SPL = dBFS + offset_db
    reference_spl: int
    measured_dbfs: float
    bound_at: str             # ISO-8601 timestamp


def generate_pink_noise(duration: float, fs: int = 44100, seed: int = 0) -> np.ndarray:
    """Seeded pink noise at -20 dBFS RMS for the calibration loudspeaker."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    white = rng.standard_normal(int(round(duration * fs)))
    pink = pink_shape(white, fs)
    rms = np.sqrt(np.mean(pink ** 2))
    return pink * (10.0 ** (PINK_NOISE_RMS_DBFS / 20.0) / rms)


def dbfs_to_spl(gain: CalibrationGain, dbfs: float) -> float:
    return dbfs + gain.offset_db


class CalibrationState:
    """Uncalibrated/calibrated state machine with a stability gate.

    Meter readings are fed in from the calibration loop; binding succeeds
    only when the recent readings are settled (std of the last second at
    most 0.5 dB) and no binding is already in place.
    """

    def __init__(self, readings_per_second: float = 43.0):
        self._window = max(2, int(round(STABILITY_WINDOW_SECONDS * readings_per_second)))
        self._readings: list[float] = []
        self.gain: CalibrationGain | None = None

    @property
    def calibrated(self) -> bool:
        return self.gain is not None

    def add_reading(self, dbfs: float):
        self._readings.append(float(dbfs))
        if len(self._readings) > 4 * self._window:
            del self._readings[:len(self._readings) - 2 * self._window]

    @property
    def latest(self) -> float | None:
        return self._readings[-1] if self._readings else None

    def reading_stability(self) -> float | None:
        """Std in dB of the last second of readings, or None when too few."""
        if len(self._readings) < self._window:
            return None
        return float(np.std(self._readings[-self._window:]))

    def bind_reference(self, reference: int, measured: float | None = None,
                       timestamp: str = "") -> CalibrationGain:
        """Bind the settled meter reading to a 70 or 80 dB SPL reference.

        measured may be passed directly when no meter stream is attached
        (offset arithmetic only); with readings present the stability gate
        always applies and the latest reading is used.
        """
        if reference not in REFERENCES_DB:
            raise ValueError(f"reference must be one of {REFERENCES_DB}")
        if self.calibrated:
            raise AlreadyCalibratedError(
                "already calibrated; Reset is required before re-binding")
        if self._readings:
            stability = self.reading_stability()
            if stability is None or stability > STABILITY_MAX_STD_DB:
                shown = float("nan") if stability is None else stability
                raise UnstableLevelError(
                    f"meter not settled (std {shown:.2f} dB over the last "
                    f"{STABILITY_WINDOW_SECONDS:.0f} s)")
            measured = self._readings[-1]
        elif measured is None:
            raise UnstableLevelError("no meter readings available")
        self.gain = CalibrationGain(offset_db=reference - measured,
                                    reference_spl=reference,
                                    measured_dbfs=measured,
                                    bound_at=timestamp)
        return self.gain

    def reset(self):
        self.gain = None
        self._readings.clear()
