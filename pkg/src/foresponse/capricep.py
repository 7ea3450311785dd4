"""Unit kernel generation: all-pass, pulse-like FIR signals built from cascaded
all-pass phase contributions with randomized center frequencies and phase
polarities.

Each kernel is synthesized on an FFT grid of power-of-two length L.  The phase
of every second-order all-pass section (random center frequency, random pole
radius in [0.9, 0.98], random sign) is accumulated in closed form, rescaled so
the maximum absolute group delay equals half the target effective duration,
and turned back into a time signal with exactly unit magnitude at every bin.
A raised-cosine taper over the outer 5% of the array keeps the truncation
benign.

Randomness comes from numpy's PCG64 so that (seed, fs, L, t_eff, n_sections)
always produces bit-identical kernels on any platform.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_L = 65536
DEFAULT_N_SECTIONS = 128
DEFAULT_T_EFF = 0.2

_POLE_RADIUS_RANGE = (0.9, 0.98)
_EDGE_TAPER_FRACTION = 0.05


@dataclass(frozen=True)
class UnitCapricep:
    """One all-pass pulse kernel plus the parameters that generated it."""

    samples: np.ndarray
    seed: int
    fs: int
    t_eff: float
    n_sections: int

    @property
    def length(self) -> int:
        return len(self.samples)

    @property
    def center(self) -> int:
        """Index of the nominal pulse center (zero group delay)."""
        return len(self.samples) // 2


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def _section_phases(omega, theta, radius):
    """Unwrapped phase of second-order all-pass sections on the grid.

    Conjugate pole pair radius*exp(+-j*theta); the arctan form is continuous
    in omega because the pole radius is < 1, so no unwrapping step is needed.
    """
    th = theta[:, None]
    r = radius[:, None]
    om = omega[None, :]
    return (-2.0 * om
            + 2.0 * np.arctan2(r * np.sin(th - om), 1.0 - r * np.cos(th - om))
            + 2.0 * np.arctan2(r * np.sin(-th - om), 1.0 - r * np.cos(-th - om)))


def _synthesize_from_phase(phi: np.ndarray, L: int, taper: bool = True) -> np.ndarray:
    """Turn a half-spectrum phase function into a centered, tapered kernel.

    The spectrum magnitude is forced to exactly 1 at every bin (the Nyquist
    bin is snapped to +-1 so the inverse transform is exactly real).  Zero
    phase yields a unit impulse at L//2.
    """
    spec = np.exp(1j * phi)
    spec[0] = 1.0
    spec[-1] = np.cos(np.pi * np.round(phi[-1] / np.pi))
    raw = np.roll(np.fft.irfft(spec, n=L), L // 2)
    if not taper:
        return raw
    n_taper = int(round(_EDGE_TAPER_FRACTION * L))
    window = np.ones(L)
    ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(n_taper) / n_taper)
    window[:n_taper] = ramp
    window[-n_taper:] = ramp[::-1]
    return raw * window


def _phase_function(seed: int, fs: int, L: int, t_eff: float,
                    n_sections: int) -> np.ndarray:
    """Accumulated, group-delay-rescaled phase on the half spectrum grid."""
    rng = np.random.Generator(np.random.PCG64(seed))
    theta = rng.uniform(0.0, np.pi, n_sections)
    radius = rng.uniform(*_POLE_RADIUS_RANGE, n_sections)
    polarity = rng.integers(0, 2, n_sections) * 2.0 - 1.0

    omega = 2.0 * np.pi * np.arange(L // 2 + 1) / L
    phi = polarity @ _section_phases(omega, theta, radius)

    # Scale the phase so max |group delay| is exactly t_eff/2, which keeps the
    # pulse energy inside the target effective duration.
    tau = -np.gradient(phi, omega)
    tau_max = np.max(np.abs(tau))
    if tau_max > 0.0:
        phi = phi * ((t_eff * fs / 2.0) / tau_max)
    return phi


def generate_unit_capricep(seed: int, fs: int = 44100, L: int = DEFAULT_L,
                           t_eff: float = DEFAULT_T_EFF,
                           n_sections: int = DEFAULT_N_SECTIONS) -> UnitCapricep:
    """Generate one unit kernel.

    Deterministic in all arguments.  Raises ValueError for a non-power-of-two
    L, a t_eff that does not fit in half the array, or n_sections < 1.
    """
    if not _is_power_of_two(L):
        raise ValueError(f"invalid length: L={L} is not a power of two")
    if not 0.0 < t_eff < L / (2.0 * fs):
        raise ValueError(
            f"duration too long: t_eff={t_eff} not in (0, {L / (2.0 * fs)})")
    if n_sections < 1:
        raise ValueError("n_sections must be >= 1")

    phi = _phase_function(seed, fs, L, t_eff, n_sections)
    samples = _synthesize_from_phase(phi, L)
    return UnitCapricep(samples=samples, seed=seed, fs=fs, t_eff=t_eff,
                        n_sections=n_sections)


def matched_kernel(u: UnitCapricep) -> np.ndarray:
    """Time-reversed kernel for pulse compression.

    Because the kernel is all-pass, convolving with the reversal is the same
    as deconvolution: the result is a near-impulse at the autocorrelation
    peak.
    """
    return u.samples[::-1].copy()


def export_kernel(u: UnitCapricep, path) -> Path:
    """Write the kernel as a mono WAV for inspection plus a JSON sidecar."""
    from . import wavio

    path = Path(path)
    peak = np.max(np.abs(u.samples))
    scale = 0.9 / peak if peak > 0 else 1.0
    wavio.write_wav(path, u.samples * scale, u.fs, bits=24)
    sidecar = {
        "seed": u.seed,
        "fs": u.fs,
        "L": u.length,
        "t_eff": u.t_eff,
        "n_sections": u.n_sections,
        "wav_scale": scale,
    }
    sidecar_path = path.with_suffix(path.suffix + ".json")
    sidecar_path.write_text(json.dumps(sidecar, indent=2))
    return path
