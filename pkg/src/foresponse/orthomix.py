"""Orthogonalized mixtures of unit kernels and code-separated recovery.

Three unit kernels are repeated every T0 samples, each weighted by its own
row of a Hadamard-4 code matrix.  Averaging matched-filtered segments with
the same weights separates the kernels again from a single observation:
cross-kernel terms cancel exactly over complete code periods, so one
recording yields the linear response and, from the spread across code
blocks, the random-and-time-varying level.

The mixture's pink-shaped version is the modulation signal in musical cents
used to frequency-modulate test stimuli.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from .capricep import UnitCapricep, generate_unit_capricep

DEFAULT_T0_SECONDS = 0.5
CATALOG_SEEDS = tuple(range(101, 111))
N_COMBINATIONS = 20
_COMBINATION_SEED = 20210601

#: Code row orthogonal to all three assigned rows; used by tests to probe
#: code-separation leakage.
UNUSED_CODE_ROW = np.array([1.0, -1.0, -1.0, 1.0])


@dataclass(frozen=True)
class CodeMatrix:
    rows: np.ndarray  # shape (3, 4), entries +-1

    def __post_init__(self):
        r = np.asarray(self.rows)
        if r.shape != (3, 4) or not np.all(np.abs(r) == 1):
            raise ValueError("code matrix must be 3 rows of 4 entries in {+1,-1}")


def build_code_matrix() -> CodeMatrix:
    """The fixed Hadamard-4 rows assigned to the three kernels."""
    return CodeMatrix(rows=np.array([
        [1.0, 1.0, 1.0, 1.0],
        [1.0, -1.0, 1.0, -1.0],
        [1.0, 1.0, -1.0, -1.0],
    ]))


@dataclass
class CombinationCatalog:
    """Ten unit kernels and twenty ordered triples of distinct indices."""

    seeds: list[int]
    combinations: list[tuple[int, int, int]]
    fs: int = 44100
    _units: dict = field(default_factory=dict, repr=False)

    def unit(self, index: int) -> UnitCapricep:
        if index not in self._units:
            self._units[index] = generate_unit_capricep(self.seeds[index], fs=self.fs)
        return self._units[index]

    def kernels_for(self, combination_id: int) -> list[UnitCapricep]:
        if not 0 <= combination_id < len(self.combinations):
            raise ValueError(f"unknown combination id: {combination_id}")
        return [self.unit(i) for i in self.combinations[combination_id]]

    def to_json(self) -> str:
        return json.dumps({"seeds": list(self.seeds),
                           "combinations": [list(c) for c in self.combinations],
                           "fs": self.fs}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "CombinationCatalog":
        obj = json.loads(text)
        combos = [tuple(c) for c in obj["combinations"]]
        _validate_combinations(combos, len(obj["seeds"]))
        return cls(seeds=list(obj["seeds"]), combinations=combos,
                   fs=int(obj.get("fs", 44100)))

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json())
        return path

    @classmethod
    def load(cls, path) -> "CombinationCatalog":
        return cls.from_json(Path(path).read_text())


def _validate_combinations(combos, n_units):
    if len(set(combos)) != len(combos):
        raise ValueError("combination triples must be distinct")
    for c in combos:
        if len(c) != 3 or len(set(c)) != 3:
            raise ValueError(f"triple elements must be pairwise distinct: {c}")
        if not all(0 <= i < n_units for i in c):
            raise ValueError(f"triple index out of range: {c}")


def default_catalog(fs: int = 44100) -> CombinationCatalog:
    """The repository's fixed catalog: 10 seeded units, 20 seeded triples."""
    rng = np.random.Generator(np.random.PCG64(_COMBINATION_SEED))
    combos: list[tuple[int, int, int]] = []
    while len(combos) < N_COMBINATIONS:
        triple = tuple(int(i) for i in rng.permutation(10)[:3])
        if triple not in combos:
            combos.append(triple)
    return CombinationCatalog(seeds=list(CATALOG_SEEDS), combinations=combos, fs=fs)


@dataclass
class MixtureSequence:
    pulse_train: np.ndarray   # length n_periods*T0 + kernel tail
    m_cents: np.ndarray       # length n_periods*T0, peak == depth
    T0: int
    n_periods: int
    combination: tuple[int, int, int]
    depth: float
    fs: int


def pink_shape(x: np.ndarray, fs: int) -> np.ndarray:
    """Zero-phase -3 dB/octave amplitude shaping, flat below 1 Hz.

    Real, nonnegative spectral gain means no phase change, so pulse timing is
    preserved.  The FFT is padded to at least twice the signal length to keep
    the symmetric impulse response from wrapping around.
    """
    x = np.asarray(x, dtype=np.float64)
    if len(x) == 0:
        raise ValueError("pink_shape: empty input")
    nfft = 1 << (2 * len(x) - 1).bit_length()
    X = np.fft.rfft(x, n=nfft)
    f = np.arange(len(X)) * fs / nfft
    gain = np.ones_like(f)
    above = f > 1.0
    gain[above] = f[above] ** -0.5
    return np.fft.irfft(X * gain, n=nfft)[:len(x)]


def build_mixture(catalog: CombinationCatalog, combination_id: int, T0: int,
                  duration: float, depth: float, seed: int = 0) -> MixtureSequence:
    """Code-weighted pulse train of three unit kernels plus its cents-domain
    modulation signal.

    n_periods is duration*fs/T0 floored to a whole number of code periods.
    The seed is reserved for future randomized code phases; the default
    construction is fully determined by the catalog and arguments.
    """
    kernels = catalog.kernels_for(combination_id)
    fs = catalog.fs
    for u in kernels:
        if T0 < 2 * u.t_eff * fs:
            raise ValueError(
                f"period too short: T0={T0} < 2*t_eff*fs={2 * u.t_eff * fs:.0f}")
    n_periods = int(duration * fs / T0) // 4 * 4
    if n_periods < 4:
        raise ValueError(f"duration too short: {duration}s gives {n_periods} periods")

    codes = build_code_matrix().rows
    L = kernels[0].length
    train = np.zeros(n_periods * T0 + L)
    for k, u in enumerate(kernels):
        for m in range(n_periods):
            train[m * T0:m * T0 + L] += codes[k][m % 4] * u.samples

    shaped = pink_shape(train, fs)[:n_periods * T0]
    peak = np.max(np.abs(shaped))
    m_cents = shaped * (depth / peak) if peak > 0 else shaped
    return MixtureSequence(pulse_train=train, m_cents=m_cents, T0=T0,
                           n_periods=n_periods,
                           combination=catalog.combinations[combination_id],
                           depth=depth, fs=fs)


def coded_block_estimates(observation: np.ndarray, kernels: list[np.ndarray],
                          code_rows: np.ndarray, period: int,
                          pulse_index: np.ndarray,
                          positions: np.ndarray) -> np.ndarray:
    """Per-kernel, per-code-block response estimates over one full code period.

    For each kernel the observation is matched-filtered (cross-correlated with
    the unit-energy kernel, aligned so a pulse placed at positions[i] lands at
    lag 0).  Each block of four consecutive pulses is then averaged with the
    kernel's code weights over 4*period lags.  Working on whole code periods
    keeps every fold of long response tails identical across interior blocks,
    so block spread measures genuine noise and time variation.

    pulse_index holds absolute pulse numbers (code phase = index mod 4);
    positions holds the matching segment start (may be fractional) in
    observation samples.  len(pulse_index) must be a multiple of 4.

    Returns est with shape (n_kernels, n_blocks, 4*period).
    """
    pulse_index = np.asarray(pulse_index)
    positions = np.asarray(positions, dtype=np.float64)
    if len(pulse_index) % 4 or len(pulse_index) == 0:
        raise ValueError("too few periods: need a positive multiple of 4 pulses")
    n_blocks = len(pulse_index) // 4
    P = 4 * period
    est = np.empty((len(kernels), n_blocks, P))
    for k, u in enumerate(kernels):
        u = np.asarray(u, dtype=np.float64)
        energy = float(np.dot(u, u))
        g = fftconvolve(observation, u[::-1] / energy)[len(u) - 1:]
        g = np.concatenate([g, np.zeros(P)])
        for b in range(n_blocks):
            acc = np.zeros(P)
            for j in range(4):
                m = int(pulse_index[4 * b + j])
                s = int(round(positions[4 * b + j]))
                seg = g[s:s + P]
                if len(seg) < P:
                    seg = np.concatenate([seg, np.zeros(P - len(seg))])
                acc += code_rows[k][m % 4] * seg
            est[k, b] = acc / 4.0
    return est


def combine_estimates(est: np.ndarray, guard_blocks: int = 1):
    """Grand-mean linear trace and within-kernel block spread.

    random_tv is the per-lag standard deviation across code blocks within each
    kernel channel, RMS-combined over kernels.  Edge blocks see a truncated
    neighborhood, so guard_blocks are dropped from the spread estimate (never
    from the mean) when enough blocks remain.
    """
    linear = est.mean(axis=(0, 1))
    n_blocks = est.shape[1]
    inner = est
    if guard_blocks and n_blocks > 2 * guard_blocks + 1:
        inner = est[:, guard_blocks:n_blocks - guard_blocks, :]
    random_tv = np.sqrt(np.mean(inner.var(axis=1), axis=0))
    return linear, random_tv


def recover_responses(observation: np.ndarray, catalog: CombinationCatalog,
                      combination_id: int, codes: CodeMatrix, T0: int,
                      n_periods: int) -> dict:
    """Recover linear and random-and-time-varying traces from an observation
    of the pulse train (audio rate).

    Traces cover lags 0..T0-1 after each pulse position.  n_averages counts
    every code-corrected segment that entered the linear mean.
    """
    if n_periods % 4 or n_periods < 4:
        raise ValueError(f"too few periods: {n_periods} (need a multiple of 4, >= 4)")
    if len(observation) < n_periods * T0:
        raise ValueError("observation shorter than n_periods*T0")
    kernels = [u.samples for u in catalog.kernels_for(combination_id)]
    pulse_index = np.arange(n_periods)
    positions = pulse_index * float(T0)
    est = coded_block_estimates(observation, kernels, codes.rows, T0,
                                pulse_index, positions)
    linear, random_tv = combine_estimates(est)
    return {"linear": linear[:T0], "random_tv": random_tv[:T0],
            "n_averages": 3 * n_periods}
