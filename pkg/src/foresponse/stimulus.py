"""Frequency-modulated test signals and unmodulated target signals.

Four signal types (single sinusoid, 20-component harmonic complex, and two
missing-fundamental variants), four phase allocations, three normalization
modes.  All components share one instantaneous frequency scaling derived
from the cents-domain modulation signal, so harmonicity is preserved under
modulation by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from enum import Enum

import numpy as np

from .orthomix import CombinationCatalog, build_mixture, DEFAULT_T0_SECONDS


class SignalType(str, Enum):
    SINE = "SINE"
    SINES = "SINES"
    MFND = "MFND"
    MFNDH = "MFNDH"


class Normalization(str, Enum):
    PEAK = "PEAK"
    TOTAL_RMS = "TOTAL_RMS"
    COMPONENT = "COMPONENT"


class PhaseAlloc(str, Enum):
    SIN = "SIN"
    COS = "COS"
    ALT = "ALT"
    SCH = "SCH"


PEAK_TARGET = 0.8
TOTAL_RMS_TARGET_DB = -26.0
COMPONENT_TARGET_DB = -30.0

# Component ranges per type; MFNDH's "only higher components" start is a
# configurable default, the cited range is not pinned anywhere.
_HARMONIC_RANGES = {
    SignalType.SINE: (1, 1),
    SignalType.SINES: (1, 20),
    SignalType.MFND: (2, 20),
    SignalType.MFNDH: (9, 20),
}


@dataclass(frozen=True)
class StimulusSpec:
    signal_type: SignalType = SignalType.SINES
    fo: float = 110.0
    target_fo: float = 220.0
    combination_id: int = 0
    normalization: Normalization = Normalization.PEAK
    phase_alloc: PhaseAlloc = PhaseAlloc.SCH
    depth: float = 100.0
    duration: float = 20.0
    fs: int = 44100
    seed: int = 0

    def __post_init__(self):
        if self.fo <= 0 or self.target_fo <= 0:
            raise ValueError("fo and target_fo must be positive")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("signal_type", "normalization", "phase_alloc"):
            d[key] = d[key].value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StimulusSpec":
        d = dict(d)
        d["signal_type"] = SignalType(d["signal_type"])
        d["normalization"] = Normalization(d["normalization"])
        d["phase_alloc"] = PhaseAlloc(d["phase_alloc"])
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "StimulusSpec":
        return cls.from_dict(json.loads(text))


@dataclass
class TestSignal:
    samples: np.ndarray
    spec: StimulusSpec
    m_cents: np.ndarray
    applied_gain: float


def component_table(signal_type: SignalType, fo: float, fs: int):
    """(harmonic index, amplitude) pairs below Nyquist, unit amplitudes."""
    if fo <= 0:
        raise ValueError("fo must be positive")
    lo, hi = _HARMONIC_RANGES[SignalType(signal_type)]
    table = [(k, 1.0) for k in range(lo, hi + 1) if k * fo < fs / 2]
    if not table:
        raise ValueError(
            f"empty component table: all components of {signal_type} at "
            f"fo={fo} Hz lie at or above fs/2={fs / 2} Hz")
    return table


def phase_offsets(phase_alloc: PhaseAlloc, components) -> np.ndarray:
    """Starting phase per component (sine convention: 0 means sine)."""
    if not components:
        raise ValueError("empty component list")
    K = len(components)
    alloc = PhaseAlloc(phase_alloc)
    if alloc == PhaseAlloc.SIN:
        return np.zeros(K)
    if alloc == PhaseAlloc.COS:
        return np.full(K, np.pi / 2)
    if alloc == PhaseAlloc.ALT:
        # sine for the 1st, 3rd, ... component in table order
        return np.array([0.0 if i % 2 == 0 else np.pi / 2 for i in range(K)])
    ranks = np.arange(1, K + 1)
    return -np.pi * ranks * (ranks - 1) / K


def synthesize_fm(components, theta: np.ndarray, fo: float,
                  m_cents: np.ndarray, fs: int) -> np.ndarray:
    """Sum of harmonics with per-sample phase accumulation.

    The fundamental's phase is accumulated from the cents-scaled frequency;
    component k uses exactly k times that phase, so the instantaneous
    frequency ratio between components is exact at every sample.
    """
    m_cents = np.asarray(m_cents, dtype=np.float64)
    inst_f = fo * np.exp2(m_cents / 1200.0)
    k_max = max(k for k, _ in components)
    f_top = k_max * np.max(inst_f)
    if f_top >= fs / 2:
        raise ValueError(
            f"nyquist violation: component {k_max} reaches {f_top:.1f} Hz")
    base_phase = 2.0 * np.pi * np.cumsum(inst_f) / fs
    out = np.zeros(len(m_cents))
    for (k, a), th in zip(components, theta):
        out += a * np.sin(k * base_phase + th)
    return out


def normalize(samples: np.ndarray, mode: Normalization,
              fundamental_amplitude_ref: float = 1.0):
    """Scale samples per the chosen criterion; returns (scaled, gain).

    COMPONENT references the synthesized fundamental's amplitude coefficient
    (exact at synthesis time) rather than a spectral estimate.
    """
    samples = np.asarray(samples, dtype=np.float64)
    peak = np.max(np.abs(samples)) if len(samples) else 0.0
    if peak == 0.0:
        raise ValueError("zero signal cannot be normalized")
    mode = Normalization(mode)
    if mode == Normalization.PEAK:
        gain = PEAK_TARGET / peak
    elif mode == Normalization.TOTAL_RMS:
        rms = np.sqrt(np.mean(samples ** 2))
        gain = 10.0 ** (TOTAL_RMS_TARGET_DB / 20.0) / rms
    else:
        if fundamental_amplitude_ref <= 0:
            raise ValueError("fundamental amplitude reference must be positive")
        gain = 10.0 ** (COMPONENT_TARGET_DB / 20.0) / fundamental_amplitude_ref
    if peak * gain > 1.0 + 1e-12:
        raise ValueError(
            f"would clip: {mode.value} normalization pushes peak to {peak * gain:.3f}")
    return samples * gain, gain


def make_test_signal(spec: StimulusSpec, catalog: CombinationCatalog) -> TestSignal:
    """Full deterministic composition: mixture -> modulation -> FM -> normalize."""
    T0 = int(round(DEFAULT_T0_SECONDS * spec.fs))
    mixture = build_mixture(catalog, spec.combination_id, T0, spec.duration,
                            spec.depth, spec.seed)
    n_samples = int(round(spec.duration * spec.fs))
    m_cents = np.zeros(n_samples)
    n = min(n_samples, len(mixture.m_cents))
    m_cents[:n] = mixture.m_cents[:n]
    return _synthesize_signal(spec, spec.fo, m_cents)


def make_target_signal(spec: StimulusSpec) -> np.ndarray:
    """Same synthesis at target_fo with no modulation."""
    n_samples = int(round(spec.duration * spec.fs))
    return _synthesize_signal(spec, spec.target_fo, np.zeros(n_samples)).samples


def _synthesize_signal(spec: StimulusSpec, fo: float,
                       m_cents: np.ndarray) -> TestSignal:
    components = component_table(spec.signal_type, fo, spec.fs)
    theta = phase_offsets(spec.phase_alloc, components)
    raw = synthesize_fm(components, theta, fo, m_cents, spec.fs)
    samples, gain = normalize(raw, spec.normalization,
                              fundamental_amplitude_ref=components[0][1])
    return TestSignal(samples=samples, spec=spec, m_cents=m_cents,
                      applied_gain=gain)
