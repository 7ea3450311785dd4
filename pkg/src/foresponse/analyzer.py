"""Turn a saved two-channel recording (voice + loop-back) into the
three-trace response display: stimulation, linear response, and
random-and-time-varying level.

Both channels are tracked offline and converted to musical cents; the
code-separated recovery then runs at frame rate against frame-rate
decimated kernels.  The lag axis is shifted so the stimulation maximum
sits at lag zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import butter, filtfilt, resample_poly

from . import fo_tracker
from .orthomix import (CombinationCatalog, build_mixture, build_code_matrix,
                       coded_block_estimates, combine_estimates,
                       DEFAULT_T0_SECONDS)
from .stimulus import StimulusSpec, component_table

MIN_VOICED_SECONDS = 10.0
MAX_BRIDGE_SECONDS = 0.1
LOOPBACK_TOLERANCE_CENTS = 50.0
DRIFT_CUTOFF_HZ = 1.0
# Loopback tracking is a known-signal context, so quality gating can be loose;
# silence is still rejected by the RMS gate.
ANALYSIS_QUALITY_THRESHOLD = 0.2


@dataclass
class RecordingPair:
    voice: np.ndarray
    loopback: np.ndarray
    fs: int
    spec: StimulusSpec
    calibration_gain: float | None = None

    def __post_init__(self):
        if len(self.voice) != len(self.loopback):
            raise ValueError("voice and loopback channels differ in length")


@dataclass
class ResponseDecomposition:
    lag: np.ndarray          # seconds, lag[0] == 0 at the stimulation maximum
    stimulation: np.ndarray  # cents
    linear: np.ndarray       # cents
    random_tv: np.ndarray    # cents
    voiced_span: tuple[float, float]
    n_averages: int
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "lag": self.lag.tolist(),
            "stimulation": self.stimulation.tolist(),
            "linear": self.linear.tolist(),
            "random_tv": self.random_tv.tolist(),
            "voiced_span": list(self.voiced_span),
            "n_averages": self.n_averages,
            "diagnostics": self.diagnostics,
        }
        # per-channel trajectories for the troubleshooting graphs
        trajectories = {}
        for key, name in (("voice_trajectory", "voice"),
                          ("loopback_trajectory", "loopback")):
            traj = self.diagnostics.get(key)
            if traj is not None:
                trajectories[name] = {
                    "time": [round(f.time, 4) for f in traj.frames],
                    "cents": [round(f.cents_re_target, 2) for f in traj.frames],
                    "voiced": [f.voiced for f in traj.frames],
                    "level_dbfs": [round(f.amplitude_dbfs, 1)
                                   if np.isfinite(f.amplitude_dbfs) else -120.0
                                   for f in traj.frames],
                }
        if trajectories:
            d["trajectories"] = trajectories
        return d

    def to_csv(self) -> str:
        lines = ["lag_s,stimulation_cents,linear_cents,random_tv_cents"]
        for i in range(len(self.lag)):
            lines.append(f"{self.lag[i]:.6f},{self.stimulation[i]:.6f},"
                         f"{self.linear[i]:.6f},{self.random_tv[i]:.6f}")
        return "\n".join(lines) + "\n"


class InsufficientVoicingError(ValueError):
    pass


class LoopbackMismatchError(ValueError):
    pass


def voiced_region(traj: fo_tracker.FoTrajectory) -> tuple[float, float]:
    """Longest contiguous voiced run, bridging gaps up to 0.1 s."""
    times = traj.times
    voiced = traj.voiced
    if len(times) == 0 or not np.any(voiced):
        raise InsufficientVoicingError("no voicing detected")
    frame_dt = times[1] - times[0] if len(times) > 1 else MAX_BRIDGE_SECONDS
    max_gap = int(round(MAX_BRIDGE_SECONDS / frame_dt))

    runs = []
    start = None
    gap = 0
    for i, v in enumerate(voiced):
        if v:
            if start is None:
                start = i
            gap = 0
        elif start is not None:
            gap += 1
            if gap > max_gap:
                runs.append((start, i - gap))
                start = None
                gap = 0
    if start is not None:
        last = len(voiced) - 1
        while not voiced[last]:
            last -= 1
        runs.append((start, last))
    best = max(runs, key=lambda r: r[1] - r[0])
    return float(times[best[0]]), float(times[best[1]])


def _interpolate_unvoiced(cents: np.ndarray, voiced: np.ndarray) -> np.ndarray:
    """Linear interpolation across short unvoiced gaps inside the span."""
    if np.all(voiced):
        return cents
    idx = np.arange(len(cents))
    good = np.nonzero(voiced)[0]
    return np.interp(idx, good, cents[good])


def _remove_slow_drift(cents: np.ndarray, frame_rate: float) -> np.ndarray:
    """Zero-phase high-pass below the code-block rate.

    The all-ones code row passes slow drift straight into its recovered
    trace; removing sub-hertz content up front protects it without the step
    artifacts a per-block mean subtraction would introduce.
    """
    b, a = butter(4, DRIFT_CUTOFF_HZ / (frame_rate / 2.0), btype="high")
    return filtfilt(b, a, cents)


def analyze_recording(rec: RecordingPair, catalog: CombinationCatalog,
                      hop: int = fo_tracker.DEFAULT_HOP_OFFLINE) -> ResponseDecomposition:
    """Full analysis pipeline; see module docstring.

    Raises InsufficientVoicingError when the usable voiced span is shorter
    than 10 s and LoopbackMismatchError when the loop-back channel does not
    carry the expected test signal.
    """
    spec = rec.spec
    fs = rec.fs
    W = fo_tracker.DEFAULT_WINDOW
    T0 = int(round(DEFAULT_T0_SECONDS * fs))
    if T0 % hop:
        raise ValueError(f"hop {hop} must divide the repetition interval {T0}")
    T0_frames = T0 // hop
    frame_rate = fs / hop

    # The loop-back carries a known signal: guide the peak search along the
    # lowest synthesized component so missing-fundamental types track cleanly.
    mixture = build_mixture(catalog, spec.combination_id, T0, spec.duration,
                            spec.depth, spec.seed)
    k_min = component_table(spec.signal_type, spec.fo, fs)[0][0]
    m_ref = mixture.m_cents
    n_frames_max = (len(rec.loopback) - (W + 1)) // hop + 1
    frame_samples = np.minimum(np.arange(n_frames_max) * hop + W // 2,
                               len(m_ref) - 1)
    guide = k_min * spec.fo * np.exp2(m_ref[frame_samples] / 1200.0)

    lb_traj = fo_tracker.track(rec.loopback, fs, hop=hop,
                               target_fo=k_min * spec.fo,
                               quality_threshold=ANALYSIS_QUALITY_THRESHOLD,
                               guide_hz=guide,
                               guide_half_range_cents=max(100.0, spec.depth))
    voice_traj = fo_tracker.track(rec.voice, fs, hop=hop,
                                  target_fo=spec.target_fo,
                                  quality_threshold=ANALYSIS_QUALITY_THRESHOLD,
                                  cancel_harmonics=4)

    span = voiced_region(voice_traj)
    if span[1] - span[0] < MIN_VOICED_SECONDS:
        raise InsufficientVoicingError(
            f"voiced span {span[1] - span[0]:.1f}s is shorter than "
            f"{MIN_VOICED_SECONDS:.0f}s")

    # Loop-back sanity: tracked cents re the guided component must sit near
    # the expected modulation.
    lb_voiced = lb_traj.voiced
    if not np.any(lb_voiced):
        raise LoopbackMismatchError("loop-back channel has no trackable signal")
    lb_cents_raw = lb_traj.cents
    expected = 1200.0 * np.log2(guide[:len(lb_cents_raw)] / (k_min * spec.fo))
    err = np.abs(lb_cents_raw[lb_voiced] - expected[:len(lb_cents_raw)][lb_voiced])
    if np.median(err) > LOOPBACK_TOLERANCE_CENTS:
        raise LoopbackMismatchError(
            f"loop-back fo deviates {np.median(err):.0f} cents from the "
            "declared test signal")

    # Voice cents re the median produced pitch: participants hold arbitrary
    # constant pitches, the response lives in the deviations.
    v_voiced = voice_traj.voiced
    median_fo = float(np.median(voice_traj.fo_hz[v_voiced]))
    voice_cents = np.where(
        voice_traj.fo_hz > 0,
        1200.0 * np.log2(np.maximum(voice_traj.fo_hz, 1e-6) / median_fo), 0.0)

    lb_cents = _interpolate_unvoiced(lb_cents_raw, lb_voiced)
    voice_cents = _interpolate_unvoiced(voice_cents, v_voiced)

    lb_cents = _remove_slow_drift(lb_cents, frame_rate)
    voice_cents = _remove_slow_drift(voice_cents, frame_rate)

    # Whole code blocks whose pulses and responses lie inside the voiced span.
    n_periods = mixture.n_periods
    first = max(0, int(np.ceil(span[0] * fs / T0)))
    last = min(n_periods - 1, int(np.floor((span[1] * fs - T0) / T0)))
    usable = last - first + 1
    usable -= usable % 4
    if usable < 4:
        raise InsufficientVoicingError(
            "fewer than one full code period inside the voiced span")
    pulse_index = np.arange(first, first + usable)

    kernels = [resample_poly(u.samples, 1, hop)
               for u in catalog.kernels_for(spec.combination_id)]
    positions = (pulse_index * float(T0) - W / 2.0) / hop
    codes = build_code_matrix()

    est_stim = coded_block_estimates(lb_cents, kernels, codes.rows, T0_frames,
                                     pulse_index, positions)
    est_voice = coded_block_estimates(voice_cents, kernels, codes.rows,
                                      T0_frames, pulse_index, positions)
    stim_full, _ = combine_estimates(est_stim)
    linear_full, random_full = combine_estimates(est_voice)

    # Lag 0 at the stimulation maximum; report the first repetition interval.
    shift = int(np.argmax(np.abs(stim_full)))
    stim = np.roll(stim_full, -shift)[:T0_frames]
    linear = np.roll(linear_full, -shift)[:T0_frames]
    random_tv = np.roll(random_full, -shift)[:T0_frames]
    lag = np.arange(T0_frames) * hop / fs

    diagnostics = {
        "median_voice_fo_hz": median_fo,
        "loopback_median_abs_error_cents": float(np.median(err)),
        "pulses_used": int(usable),
        "stim_peak_shift_frames": shift,
        "frame_rate_hz": frame_rate,
        "voice_trajectory": voice_traj,
        "loopback_trajectory": lb_traj,
        # Full code-period traces: the circular domain in which the linear
        # trace equals the stimulation trace convolved with the subject's
        # response, useful for offline study and oracle checks.
        "stimulation_full": stim_full,
        "linear_full": linear_full,
        "random_tv_full": random_full,
    }
    return ResponseDecomposition(
        lag=lag, stimulation=stim, linear=linear, random_tv=random_tv,
        voiced_span=span, n_averages=3 * usable, diagnostics=diagnostics)
