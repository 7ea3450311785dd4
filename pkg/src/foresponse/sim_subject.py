"""Simulated participant for end-to-end verification.

The subject holds a constant base pitch and adds a linear response to the
stimulus modulation (frame-spaced FIR after a transport delay) plus
controllable jitter.  Its voice is synthesized as a harmonic complex
through the same phase-accumulation machinery as the test signals, so the
whole measurement chain can be exercised without a human.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .stimulus import TestSignal, synthesize_fm, normalize, Normalization

DEFAULT_FRAME_HOP = 245
DEFAULT_VOWEL = ((1, 1.0), (2, 0.4), (3, 0.2), (4, 0.1))


@dataclass
class SubjectModel:
    base_fo: float = 220.0
    latency: float = 0.0          # transport delay, seconds
    ir: np.ndarray = field(default_factory=lambda: np.array([1.0]))
    ir_hop: int = DEFAULT_FRAME_HOP   # samples between FIR taps
    jitter_rms: float = 0.0       # cents
    jitter_seed: int = 0
    vowel_spectrum: tuple = DEFAULT_VOWEL

    def validate(self, T0_samples: int, fs: int):
        if self.base_fo <= 0:
            raise ValueError("base_fo must be positive")
        if self.jitter_rms < 0:
            raise ValueError("jitter_rms must be >= 0")
        support = (len(self.ir) - 1) * self.ir_hop + int(round(self.latency * fs))
        if support >= T0_samples:
            raise ValueError(
                f"ir support plus latency ({support} samples) must stay "
                f"below the repetition interval ({T0_samples} samples)")

    def to_dict(self) -> dict:
        return {"base_fo": self.base_fo, "latency": self.latency,
                "ir": np.asarray(self.ir).tolist(), "ir_hop": self.ir_hop,
                "jitter_rms": self.jitter_rms, "jitter_seed": self.jitter_seed,
                "vowel_spectrum": [list(v) for v in self.vowel_spectrum]}

    @classmethod
    def from_dict(cls, d: dict) -> "SubjectModel":
        d = dict(d)
        d["ir"] = np.asarray(d.get("ir", [1.0]), dtype=np.float64)
        d["vowel_spectrum"] = tuple(tuple(v) for v in d.get(
            "vowel_spectrum", DEFAULT_VOWEL))
        return cls(**d)


def smoothing_bump_model(base_fo: float = 220.0, peak_delay: float = 0.15,
                         smoothing: float = 0.08, jitter_rms: float = 0.0,
                         jitter_seed: int = 0, fs: int = 44100,
                         ir_hop: int = DEFAULT_FRAME_HOP) -> SubjectModel:
    """Subject whose response is a raised-cosine bump with the given
    smoothing half-width, peaking exactly peak_delay after the stimulus."""
    frame_dt = ir_hop / fs
    J = int(round(smoothing / frame_dt))
    taps = np.arange(2 * J + 1)
    bump = 0.5 * (1.0 + np.cos(np.pi * (taps - J) / J))
    bump /= bump.sum()
    transport = peak_delay - J * frame_dt
    if transport < 0:
        raise ValueError("peak_delay must exceed the smoothing half-width")
    return SubjectModel(base_fo=base_fo, latency=transport, ir=bump,
                        ir_hop=ir_hop, jitter_rms=jitter_rms,
                        jitter_seed=jitter_seed)


def response_cents(test: TestSignal, model: SubjectModel) -> np.ndarray:
    """The subject's pitch deviation track at audio rate, before jitter."""
    fs = test.spec.fs
    m = np.asarray(test.m_cents, dtype=np.float64)
    ir = np.asarray(model.ir, dtype=np.float64)
    if len(ir) == 1:
        resp = ir[0] * m
    else:
        sparse = np.zeros((len(ir) - 1) * model.ir_hop + 1)
        sparse[::model.ir_hop] = ir
        resp = fftconvolve(m, sparse)[:len(m)]
    shift = int(round(model.latency * fs))
    if shift:
        resp = np.concatenate([np.zeros(shift), resp])[:len(m)]
    return resp


def simulate_subject(test: TestSignal, model: SubjectModel,
                     onset: float = 1.0) -> np.ndarray:
    """Synthesize the subject's voice for one trial.

    Voice f_o follows base_fo scaled by 2^(cents/1200) where cents is the
    delayed, FIR-filtered stimulus modulation plus white jitter at the FIR
    tap rate.  Silence (with a 10 ms fade-in) before the onset.
    """
    if onset < 0:
        raise ValueError("onset must be >= 0")
    spec = test.spec
    fs = spec.fs
    T0 = int(round(0.5 * fs))
    model.validate(T0, fs)

    n = len(test.samples)
    cents = response_cents(test, model)

    if model.jitter_rms > 0:
        rng = np.random.Generator(np.random.PCG64(model.jitter_seed))
        n_taps = n // model.ir_hop + 2
        jitter = model.jitter_rms * rng.standard_normal(n_taps)
        cents = cents + np.interp(np.arange(n) / model.ir_hop,
                                  np.arange(n_taps), jitter)

    voice = synthesize_fm(list(model.vowel_spectrum),
                          np.zeros(len(model.vowel_spectrum)),
                          model.base_fo, cents, fs)
    voice, _ = normalize(voice, Normalization.PEAK)
    voice *= 0.5 / 0.8  # comfortable voice level below the stimulus peak

    onset_samples = int(round(onset * fs))
    envelope = np.ones(n)
    envelope[:onset_samples] = 0.0
    fade = int(0.010 * fs)
    if onset_samples + fade <= n:
        envelope[onset_samples:onset_samples + fade] = np.linspace(0, 1, fade)
    return voice * envelope
