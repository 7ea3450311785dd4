import numpy as np
import pytest

from foresponse import analyzer, orthomix, sim_subject, stimulus

FS = 44100


@pytest.fixture(scope="session")
def catalog():
    return orthomix.default_catalog()


@pytest.fixture(scope="session")
def codes():
    return orthomix.build_code_matrix()


@pytest.fixture(scope="session")
def sines_spec():
    return stimulus.StimulusSpec(
        signal_type=stimulus.SignalType.SINES, fo=110.0, target_fo=220.0,
        combination_id=0, normalization=stimulus.Normalization.PEAK,
        phase_alloc=stimulus.PhaseAlloc.SCH, depth=100.0, duration=20.0,
        fs=FS, seed=0)


@pytest.fixture(scope="session")
def sines_test_signal(sines_spec, catalog):
    return stimulus.make_test_signal(sines_spec, catalog)


@pytest.fixture(scope="session")
def bump_subject():
    """The reference end-to-end fixture: response peaking 150 ms after the
    stimulus with an 80 ms raised-cosine smoothing."""
    return sim_subject.smoothing_bump_model(base_fo=220.0, peak_delay=0.15,
                                            smoothing=0.08)


@pytest.fixture(scope="session")
def e2e_result(sines_test_signal, sines_spec, bump_subject, catalog):
    """Simulated 20 s trial (onset 1 s) plus its analysis, shared by the
    analyzer tests and the acceptance suite."""
    voice = sim_subject.simulate_subject(sines_test_signal, bump_subject,
                                         onset=1.0)
    rec = analyzer.RecordingPair(voice=voice, loopback=sines_test_signal.samples,
                                 fs=FS, spec=sines_spec)
    result = analyzer.analyze_recording(rec, catalog)
    return {"voice": voice, "recording": rec, "result": result}


def circular_oracle(stimulation_full: np.ndarray, model, frame_dt: float):
    """Direct-convolution oracle: stimulation trace circularly convolved with
    the subject response over the full code period."""
    P = len(stimulation_full)
    freqs = np.fft.fftfreq(P, d=frame_dt)
    spectrum = (np.fft.fft(stimulation_full)
                * np.fft.fft(model.ir, P)
                * np.exp(-2j * np.pi * freqs * model.latency))
    return np.real(np.fft.ifft(spectrum))


def normalized_correlation(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a, b) / np.sqrt(np.dot(a, a) * np.dot(b, b)))
