import numpy as np
import pytest

from foresponse import analyzer, fo_tracker, sim_subject, stimulus
from foresponse.analyzer import (InsufficientVoicingError,
                                 LoopbackMismatchError, RecordingPair,
                                 analyze_recording, voiced_region)

from conftest import FS, circular_oracle, normalized_correlation


def make_trajectory(voiced_pattern, hop=245):
    frames = [fo_tracker.FoFrame(time=i * hop / FS, fo_hz=220.0,
                                 cents_re_target=0.0, amplitude_dbfs=-20.0,
                                 voiced=bool(v), quality=1.0)
              for i, v in enumerate(voiced_pattern)]
    return fo_tracker.FoTrajectory(frames=frames, hop=hop, window_length=4096,
                                   target_fo=220.0)


class TestVoicedRegion:
    def test_fully_voiced(self):
        n = int(20 * FS / 245)
        span = voiced_region(make_trajectory(np.ones(n)))
        assert span[1] - span[0] >= 19.5

    def test_longest_run_wins(self):
        rate = FS / 245
        pattern = np.concatenate([np.ones(int(3 * rate)),
                                  np.zeros(int(2 * rate)),
                                  np.ones(int(12 * rate))])
        span = voiced_region(make_trajectory(pattern))
        assert span[0] == pytest.approx(5.0, abs=0.1)
        assert span[1] - span[0] == pytest.approx(12.0, abs=0.2)

    def test_short_gaps_bridged(self):
        rate = FS / 245
        pattern = np.ones(int(10 * rate))
        gap = int(0.05 * rate)
        pattern[len(pattern) // 2:len(pattern) // 2 + gap] = 0
        span = voiced_region(make_trajectory(pattern))
        assert span[1] - span[0] >= 9.5

    def test_all_unvoiced_raises(self):
        with pytest.raises(InsufficientVoicingError):
            voiced_region(make_trajectory(np.zeros(100)))


class TestEndToEnd:
    def test_voiced_span_and_averages(self, e2e_result):
        result = e2e_result["result"]
        span = result.voiced_span
        assert span[0] == pytest.approx(1.0, abs=0.1)
        assert span[1] - span[0] >= 18.0
        assert result.n_averages == 108   # 36 usable pulses x 3 kernels

    def test_lag_axis_starts_at_stimulation_max(self, e2e_result):
        result = e2e_result["result"]
        assert result.lag[0] == 0.0
        assert np.argmax(np.abs(result.stimulation)) == 0
        assert len(result.lag) == len(result.linear) == len(result.random_tv)

    def test_latency_estimate(self, e2e_result):
        result = e2e_result["result"]
        peak_lag = result.lag[int(np.argmax(np.abs(result.linear)))]
        assert peak_lag == pytest.approx(0.15, abs=0.01)

    def test_oracle_correlation(self, e2e_result, bump_subject):
        result = e2e_result["result"]
        stim_full = result.diagnostics["stimulation_full"]
        lin_full = result.diagnostics["linear_full"]
        frame_dt = result.lag[1] - result.lag[0]
        oracle = circular_oracle(stim_full, bump_subject, frame_dt)
        assert normalized_correlation(oracle, lin_full) >= 0.95

    def test_identity_subject(self, sines_test_signal, sines_spec, catalog):
        rec = RecordingPair(voice=sines_test_signal.samples.copy(),
                            loopback=sines_test_signal.samples,
                            fs=FS, spec=sines_spec)
        result = analyze_recording(rec, catalog)
        corr = normalized_correlation(result.linear, result.stimulation)
        assert corr >= 0.999

    def test_null_subject(self, sines_test_signal, sines_spec, catalog,
                          bump_subject):
        null_model = sim_subject.SubjectModel(base_fo=220.0,
                                              ir=np.array([0.0]))
        voice = sim_subject.simulate_subject(sines_test_signal, null_model,
                                             onset=1.0)
        rec = RecordingPair(voice=voice, loopback=sines_test_signal.samples,
                            fs=FS, spec=sines_spec)
        result = analyze_recording(rec, catalog)
        stim_peak = np.max(np.abs(result.stimulation))
        lin_peak = np.max(np.abs(result.linear))
        assert 20 * np.log10(lin_peak / stim_peak) <= -20.0

    def test_gain_invariance(self, e2e_result, sines_spec, catalog):
        result = e2e_result["result"]
        rec = RecordingPair(voice=0.5 * e2e_result["voice"],
                            loopback=e2e_result["recording"].loopback,
                            fs=FS, spec=sines_spec)
        scaled = analyze_recording(rec, catalog)
        assert np.allclose(scaled.linear, result.linear, atol=1e-9)
        assert np.allclose(scaled.random_tv, result.random_tv, atol=1e-9)
        assert np.allclose(scaled.stimulation, result.stimulation, atol=1e-9)

    def test_constant_offset_invariance_exact(self, e2e_result, catalog,
                                              sines_spec):
        # the mechanism behind transposition invariance: a constant cents
        # offset in the voice stream vanishes through the median reference
        # and drift removal before recovery
        from foresponse.analyzer import _remove_slow_drift
        from foresponse.orthomix import (build_code_matrix,
                                         coded_block_estimates,
                                         combine_estimates)
        from scipy.signal import resample_poly

        rng = np.random.Generator(np.random.PCG64(17))
        frames = 3000
        cents = rng.standard_normal(frames).cumsum() * 0.1
        kernels = [resample_poly(u.samples, 1, 245)
                   for u in catalog.kernels_for(0)]
        pulse_index = np.arange(4, 28)
        positions = (pulse_index * 22050.0 - 2048.0) / 245.0
        codes = build_code_matrix()

        def recover(stream):
            hp = _remove_slow_drift(stream, FS / 245)
            est = coded_block_estimates(hp, kernels, codes.rows, 90,
                                        pulse_index, positions)
            return combine_estimates(est)

        lin_a, rtv_a = recover(cents)
        lin_b, rtv_b = recover(cents + 150.0)
        assert np.max(np.abs(lin_a - lin_b)) <= 0.1
        assert np.max(np.abs(rtv_a - rtv_b)) <= 0.1

    def test_transposition_invariance_waveform(self, e2e_result,
                                               sines_test_signal, sines_spec,
                                               catalog):
        # the same subject singing 150 cents higher: cents re the produced
        # median, so the traces must not move beyond the pitch-dependent
        # tracking-noise floor (~0.3% of the trace scale, asserted at 1%)
        result = e2e_result["result"]
        model = sim_subject.smoothing_bump_model(
            base_fo=220.0 * 2 ** (150 / 1200), peak_delay=0.15, smoothing=0.08)
        voice = sim_subject.simulate_subject(sines_test_signal, model, onset=1.0)
        rec = RecordingPair(voice=voice, loopback=sines_test_signal.samples,
                            fs=FS, spec=sines_spec)
        shifted = analyze_recording(rec, catalog)
        scale = np.max(np.abs(result.linear))
        delta_lin = shifted.linear - result.linear
        delta_rtv = shifted.random_tv - result.random_tv
        assert np.max(np.abs(delta_lin - np.mean(delta_lin))) <= 0.01 * scale
        assert np.max(np.abs(delta_rtv - np.mean(delta_rtv))) <= 0.01 * scale

    def test_insufficient_voicing_rejected(self, sines_spec, catalog,
                                           sines_test_signal, bump_subject):
        voice = sim_subject.simulate_subject(sines_test_signal, bump_subject,
                                             onset=1.0)
        voice[int(9 * FS):] = 0.0   # only ~8 s of voicing remains
        rec = RecordingPair(voice=voice, loopback=sines_test_signal.samples,
                            fs=FS, spec=sines_spec)
        with pytest.raises(InsufficientVoicingError):
            analyze_recording(rec, catalog)

    def test_loopback_mismatch_rejected(self, sines_spec, catalog,
                                        e2e_result):
        # a loop-back carrying the wrong pitch is not the declared test signal
        t = np.arange(len(e2e_result["voice"])) / FS
        wrong = 0.5 * np.sin(2 * np.pi * 180.0 * t)
        rec = RecordingPair(voice=e2e_result["voice"], loopback=wrong,
                            fs=FS, spec=sines_spec)
        with pytest.raises(LoopbackMismatchError):
            analyze_recording(rec, catalog)

    def test_channel_length_mismatch_rejected(self, sines_spec):
        with pytest.raises(ValueError, match="length"):
            RecordingPair(voice=np.zeros(10), loopback=np.zeros(20),
                          fs=FS, spec=sines_spec)


class TestSubjectModel:
    def test_identity_subject_cents_exact(self, sines_test_signal):
        model = sim_subject.SubjectModel(base_fo=220.0, latency=0.0,
                                         ir=np.array([1.0]))
        cents = sim_subject.response_cents(sines_test_signal, model)
        assert np.array_equal(cents, sines_test_signal.m_cents)

    def test_latency_shifts_response(self, sines_test_signal):
        model = sim_subject.SubjectModel(base_fo=220.0, latency=0.1,
                                         ir=np.array([1.0]))
        cents = sim_subject.response_cents(sines_test_signal, model)
        shift = int(0.1 * FS)
        assert np.array_equal(cents[shift:], sines_test_signal.m_cents[:-shift])
        assert np.all(cents[:shift] == 0)

    def test_silence_before_onset(self, sines_test_signal, bump_subject):
        voice = sim_subject.simulate_subject(sines_test_signal, bump_subject,
                                             onset=1.0)
        assert np.all(voice[:FS] == 0.0)
        assert np.max(np.abs(voice[FS:2 * FS])) > 0.1

    def test_ir_support_validation(self):
        model = sim_subject.SubjectModel(base_fo=220.0, latency=0.45,
                                         ir=np.ones(100) / 100)
        with pytest.raises(ValueError, match="repetition interval"):
            model.validate(22050, FS)

    def test_linearity_halved_ir(self, sines_test_signal, sines_spec,
                                 bump_subject, catalog, e2e_result):
        half = sim_subject.SubjectModel(
            base_fo=bump_subject.base_fo, latency=bump_subject.latency,
            ir=0.5 * bump_subject.ir, ir_hop=bump_subject.ir_hop)
        voice = sim_subject.simulate_subject(sines_test_signal, half, onset=1.0)
        rec = RecordingPair(voice=voice, loopback=sines_test_signal.samples,
                            fs=FS, spec=sines_spec)
        result = analyze_recording(rec, catalog)
        full_peak = np.max(np.abs(e2e_result["result"].linear))
        assert np.max(np.abs(result.linear)) == pytest.approx(
            0.5 * full_peak, rel=0.02)


class TestJitter:
    def test_random_tv_monotone_in_jitter(self, sines_test_signal, sines_spec,
                                          catalog):
        medians = []
        for i, rms in enumerate((2.0, 10.0, 30.0)):
            model = sim_subject.smoothing_bump_model(
                base_fo=220.0, peak_delay=0.15, smoothing=0.08,
                jitter_rms=rms, jitter_seed=50 + i)
            voice = sim_subject.simulate_subject(sines_test_signal, model,
                                                 onset=1.0)
            rec = RecordingPair(voice=voice,
                                loopback=sines_test_signal.samples,
                                fs=FS, spec=sines_spec)
            result = analyze_recording(rec, catalog)
            medians.append(float(np.median(result.random_tv)))
        assert medians[0] < medians[1] < medians[2]

    def test_jitter_isolation(self, sines_test_signal, sines_spec, catalog,
                              e2e_result):
        # 20-cent jitter moves random_tv but the linear trace stays put
        clean_peak = np.max(np.abs(e2e_result["result"].linear))
        peaks = []
        for seed in range(5):
            model = sim_subject.smoothing_bump_model(
                base_fo=220.0, peak_delay=0.15, smoothing=0.08,
                jitter_rms=20.0, jitter_seed=seed)
            voice = sim_subject.simulate_subject(sines_test_signal, model,
                                                 onset=1.0)
            rec = RecordingPair(voice=voice,
                                loopback=sines_test_signal.samples,
                                fs=FS, spec=sines_spec)
            peaks.append(np.max(np.abs(analyze_recording(rec, catalog).linear)))
        assert np.mean(peaks) == pytest.approx(clean_peak, rel=0.05)


def test_result_serialization(e2e_result):
    result = e2e_result["result"]
    d = result.to_dict()
    assert len(d["lag"]) == len(d["linear"])
    csv = result.to_csv()
    assert csv.splitlines()[0].startswith("lag_s,")
    assert len(csv.splitlines()) == len(result.lag) + 1
