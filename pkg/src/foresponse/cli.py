"""Command line front end.

Subcommands: gen (spec -> WAV + sidecar), analyze (recording -> result
JSON/CSV), simulate (synthetic subject round trip), serve (WebSocket
service + UI), selftest (invariant suite on the simulated device).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analyzer as analyzer_mod
from . import calibration, sim_subject, wavio
from .orthomix import default_catalog
from .stimulus import (StimulusSpec, SignalType, Normalization, PhaseAlloc,
                       make_test_signal)

STORAGE_ENV = "FORESPONSE_STORAGE"


def _spec_from_args(args) -> StimulusSpec:
    return StimulusSpec(signal_type=SignalType(args.type), fo=args.fo,
                        target_fo=args.target_fo, combination_id=args.comb,
                        normalization=Normalization(args.norm),
                        phase_alloc=PhaseAlloc(args.phase), depth=args.depth,
                        duration=args.duration, fs=args.fs, seed=args.seed)


def _add_spec_args(p: argparse.ArgumentParser):
    p.add_argument("--type", default="SINES",
                   choices=[t.value for t in SignalType])
    p.add_argument("--fo", type=float, default=110.0)
    p.add_argument("--target-fo", dest="target_fo", type=float, default=220.0)
    p.add_argument("--comb", type=int, default=0, help="combination id 0..19")
    p.add_argument("--norm", default="PEAK",
                   choices=[n.value for n in Normalization])
    p.add_argument("--phase", default="SCH",
                   choices=[p.value for p in PhaseAlloc])
    p.add_argument("--depth", type=float, default=100.0, help="cents")
    p.add_argument("--duration", type=float, default=20.0, help="seconds")
    p.add_argument("--fs", type=int, default=44100)
    p.add_argument("--seed", type=int, default=0)


def cmd_gen(args) -> int:
    spec = _spec_from_args(args)
    sig = make_test_signal(spec, default_catalog(fs=spec.fs))
    out = Path(args.out)
    wavio.write_wav(out, sig.samples, spec.fs, bits=args.bits)
    sidecar = {"kind": "testsignal", "spec": spec.to_dict(),
               "applied_gain": sig.applied_gain}
    out.with_suffix(out.suffix + ".json").write_text(json.dumps(sidecar, indent=2))
    print(f"wrote {out} ({len(sig.samples)} samples, peak "
          f"{np.max(np.abs(sig.samples)):.3f}) and sidecar")
    return 0


def cmd_analyze(args) -> int:
    data, fs, _ = wavio.read_wav(args.recording)
    if data.shape[1] < 2:
        print("error: need a stereo recording (voice, loop-back)", file=sys.stderr)
        return 1
    sidecar_path = Path(args.recording).with_suffix(".wav.json")
    if args.sidecar:
        sidecar_path = Path(args.sidecar)
    sidecar = json.loads(sidecar_path.read_text())
    spec = StimulusSpec.from_dict(sidecar["spec"])
    rec = analyzer_mod.RecordingPair(voice=data[:, 0], loopback=data[:, 1],
                                     fs=fs, spec=spec)
    result = analyzer_mod.analyze_recording(rec, default_catalog(fs=fs))
    out = Path(args.out or (str(args.recording) + ".result.json"))
    d = result.to_dict()
    d["diagnostics"] = {k: v for k, v in d["diagnostics"].items()
                        if isinstance(v, (int, float, str, bool))}
    out.write_text(json.dumps(d, indent=2))
    if args.csv:
        Path(args.csv).write_text(result.to_csv())
    peak_lag = result.lag[int(np.argmax(np.abs(result.linear)))]
    print(f"wrote {out}; linear peak at {peak_lag * 1000:.0f} ms, "
          f"{result.n_averages} averages")
    return 0


def cmd_simulate(args) -> int:
    spec = _spec_from_args(args)
    catalog = default_catalog(fs=spec.fs)
    test = make_test_signal(spec, catalog)
    if args.model:
        model = sim_subject.SubjectModel.from_dict(
            json.loads(Path(args.model).read_text()))
    else:
        model = sim_subject.smoothing_bump_model(
            base_fo=spec.target_fo, peak_delay=args.peak_delay,
            smoothing=args.smoothing, jitter_rms=args.jitter,
            jitter_seed=args.seed, fs=spec.fs)
    voice = sim_subject.simulate_subject(test, model, onset=args.onset)
    out = Path(args.out)
    stereo = np.stack([voice, test.samples], axis=1)
    wavio.write_wav(out, stereo, spec.fs, bits=16)
    sidecar = {"kind": "recording", "spec": spec.to_dict(),
               "subject": model.to_dict(), "onset": args.onset}
    out.with_suffix(".wav.json").write_text(json.dumps(sidecar, indent=2))
    print(f"wrote {out} (voice + loop-back)")

    if args.and_analyze:
        rec = analyzer_mod.RecordingPair(voice=voice, loopback=test.samples,
                                         fs=spec.fs, spec=spec)
        result = analyzer_mod.analyze_recording(rec, catalog)
        stim_full = result.diagnostics["stimulation_full"]
        lin_full = result.diagnostics["linear_full"]
        frame_dt = result.lag[1] - result.lag[0]
        oracle = _direct_convolution_oracle(stim_full, model, frame_dt)
        corr = float(np.dot(oracle, lin_full)
                     / np.sqrt(np.dot(oracle, oracle) * np.dot(lin_full, lin_full)))
        peak_lag = result.lag[int(np.argmax(np.abs(result.linear)))]
        print(f"analysis: linear peak at {peak_lag * 1000:.0f} ms, "
              f"oracle correlation {corr:.4f}")
    return 0


def _direct_convolution_oracle(stimulation_full, model, frame_dt):
    """Circular convolution of the stimulation trace with the subject
    response over the full code period."""
    P = len(stimulation_full)
    freqs = np.fft.fftfreq(P, d=frame_dt)
    spectrum = (np.fft.fft(stimulation_full)
                * np.fft.fft(model.ir, P)
                * np.exp(-2j * np.pi * freqs * model.latency))
    return np.real(np.fft.ifft(spectrum))


def cmd_serve(args) -> int:
    from .server import serve_forever
    from .service import ExperimentService, ServiceConfig

    root = args.storage or os.environ.get(STORAGE_ENV, "session_data")
    config = ServiceConfig(storage_root=root, device=args.device,
                           block_loops=False)
    service = ExperimentService(config)
    print(f"serving on ws://{args.host}:{args.port} (storage: {root})",
          flush=True)
    serve_forever(service, host=args.host, port=args.port, ui_root=args.ui_root)
    return 0


def cmd_selftest(args) -> int:
    from . import capricep, orthomix, rt_engine

    failures = 0

    def check(name, ok):
        nonlocal failures
        print(f"  [{'PASS' if ok else 'FAIL'}] {name}")
        failures += 0 if ok else 1

    print("selftest: kernel invariants")
    u = capricep.generate_unit_capricep(1)
    mag = np.abs(np.fft.rfft(u.samples))
    freqs = np.arange(len(mag)) * u.fs / u.length
    band = (freqs >= 20) & (freqs <= 20000)
    dev = np.max(np.abs(20 * np.log10(mag[band])))
    check(f"spectral flatness {dev:.2e} dB <= 0.5", dev <= 0.5)

    print("selftest: orthogonal recovery")
    catalog = orthomix.default_catalog()
    T0 = 22050
    mix = orthomix.build_mixture(catalog, 0, T0, 8.0, 100.0)
    rec = orthomix.recover_responses(mix.pulse_train, catalog, 0,
                                     orthomix.build_code_matrix(), T0,
                                     mix.n_periods)
    floor_db = 20 * np.log10(np.max(rec["random_tv"])
                             / np.max(np.abs(rec["linear"])))
    check(f"noiseless random floor {floor_db:.0f} dB <= -40", floor_db <= -40)

    print("selftest: real-time loop on simulated device")
    device = rt_engine.SimulatedDuplexDevice()
    engine = rt_engine.AudioEngine(device)
    tone = 0.5 * np.sin(2 * np.pi * 220 * np.arange(44100 * 2) / 44100)
    report = engine.run_duplex(tone, rt_engine.LoopMode.RESPONSE_TEST)
    check(f"underruns {report.underruns} == 0", report.underruns == 0)
    check(f"capture length {len(report.capture)} == {len(tone)}",
          len(report.capture) == len(tone))

    print("selftest:", "PASS" if failures == 0 else f"{failures} FAILURES")
    return 0 if failures == 0 else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="foresponse",
        description="Voice fundamental-frequency response measurement tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a test signal WAV + sidecar")
    _add_spec_args(p)
    p.add_argument("--out", default="testsignal.wav")
    p.add_argument("--bits", type=int, default=24, choices=(16, 24))
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("analyze", help="analyze a saved stereo recording")
    p.add_argument("recording")
    p.add_argument("--sidecar", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="simulated-subject round trip")
    _add_spec_args(p)
    p.add_argument("--model", default=None, help="subject model JSON")
    p.add_argument("--peak-delay", dest="peak_delay", type=float, default=0.15)
    p.add_argument("--smoothing", type=float, default=0.08)
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--onset", type=float, default=1.0)
    p.add_argument("--out", default="sim_recording.wav")
    p.add_argument("--and-analyze", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", help="start the control service + UI server")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--storage", default=None)
    p.add_argument("--device", default="simulated")
    p.add_argument("--ui-root", dest="ui_root", default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("selftest", help="run invariant checks headless")
    p.set_defaults(func=cmd_selftest)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
