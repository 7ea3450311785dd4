"""Control surface binding all modules into the experiment workflow.

Commands arrive as JSON objects {id, cmd, params} and are answered with
{id, ok, payload | error}.  Real-time loops run on a worker thread against
the selected device; streaming events (pitch frames, meter readings,
elapsed seconds, completions) carry monotone sequence numbers.

The permission rules live in a pure transition table (`allowed`) so the
same logic drives the live service and exhaustive model checks.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analyzer as analyzer_mod
from . import calibration as calib_mod
from . import rt_engine, session, sim_subject
from .orthomix import CombinationCatalog, default_catalog
from .rt_engine import AudioEngine, LoopMode, SimulatedDuplexDevice
from .stimulus import StimulusSpec, TestSignal, make_test_signal, make_target_signal

PROGRESS_STATES = ("uncalibrated", "calibrated", "recorded", "saved")
ACTIVITIES = ("idle", "calibrating", "voice_check", "testing", "playing", "memo")

IDLE_COMMANDS = {"list_devices", "get_state", "get_analysis"}

#: (command, progress states it is allowed in); loops additionally require
#: an idle engine.  Commands absent here are allowed everywhere.
_PROGRESS_RULES = {
    "bind_reference": ("uncalibrated",),
    "test_start": ("calibrated", "recorded", "saved"),
    "voice_check_start": ("calibrated", "recorded", "saved"),
    "play": ("recorded", "saved"),
    "save": ("recorded",),
}


class InvalidStateError(RuntimeError):
    pass


class UnknownCommandError(ValueError):
    pass


def allowed(progress: str, activity: str, cmd: str) -> bool:
    """Pure permission predicate for the experiment state machine."""
    if cmd in IDLE_COMMANDS:
        return True
    if cmd == "calib_stop":
        return activity == "calibrating"
    if cmd == "voice_check_stop":
        return activity == "voice_check"
    if activity != "idle":
        return False
    rule = _PROGRESS_RULES.get(cmd)
    return rule is None or progress in rule


def transition(progress: str, activity: str, cmd: str):
    """Pure model of (progress, activity) across one successful command.

    Loop commands are modeled as running to completion where the service
    completes them asynchronously; used by the exhaustive safety check.
    """
    if not allowed(progress, activity, cmd):
        return None
    if cmd == "bind_reference":
        return "calibrated", "idle"
    if cmd == "reset_calibration":
        return "uncalibrated", "idle"
    if cmd == "calib_start":
        return progress, "idle"          # meter loop completes
    if cmd == "voice_check_start":
        return progress, "idle"          # check loop completes
    if cmd == "test_start":
        return "recorded", "idle"
    if cmd == "save":
        return "saved", "idle"
    if cmd in ("calib_stop", "voice_check_stop"):
        return progress, "idle"
    return progress, activity


@dataclass
class ServiceConfig:
    storage_root: str = "session_data"
    device: str = "simulated"
    sim_input: np.ndarray | None = None
    sim_subject_model: dict | None = None     # auto-voice for response tests
    calib_seconds: float = 2.0
    voice_check_seconds: float | None = None  # None: full target length
    block_loops: bool = True                  # run loops inline (fast device)
    catalog: CombinationCatalog | None = None


class ExperimentService:
    """Single logical control loop; one command at a time."""

    def __init__(self, config: ServiceConfig | None = None):
        self.config = config or ServiceConfig()
        self.catalog = self.config.catalog or default_catalog()
        self.store = session.SessionStore(self.config.storage_root,
                                          analyzer_hook=self._analyze_file)
        self.conditions = session.ExperimentConditions()
        self.spec = StimulusSpec()
        self.presentation = "headphone"
        self.progress = "uncalibrated"
        self.activity = "idle"
        self.calibration = calib_mod.CalibrationState()
        self.events: list[dict] = []
        self._event_seq = 0
        self._event_cond = threading.Condition()
        self._lock = threading.RLock()
        self._capture: np.ndarray | None = None
        self._capture_spec: StimulusSpec | None = None
        self._last_artifact: str | None = None
        self._signal_cache: dict[str, TestSignal] = {}
        self._worker: threading.Thread | None = None
        self._select_device(self.config.device)

    # ---- state ---------------------------------------------------------

    @property
    def phase(self) -> str:
        if self.activity in ("voice_check", "testing"):
            return self.activity
        return self.progress

    def _select_device(self, name: str):
        device = rt_engine.open_device(
            name, input_samples=self.config.sim_input)
        self.device = device
        self.engine = AudioEngine(device)

    def _emit(self, event: dict):
        if event.get("type") == "meter":
            self.calibration.add_reading(event["rms_dbfs"])
        with self._event_cond:
            event = dict(event)
            event["seq"] = self._event_seq
            self._event_seq += 1
            self.events.append(event)
            self._event_cond.notify_all()

    def wait_events(self, cursor: int, timeout: float = 1.0) -> list[dict]:
        """Events with seq >= cursor, blocking briefly when none are ready."""
        with self._event_cond:
            if not any(e["seq"] >= cursor for e in self.events):
                self._event_cond.wait(timeout)
            return [e for e in self.events if e["seq"] >= cursor]

    # ---- message handling ------------------------------------------------

    def handle_message(self, msg: dict) -> dict:
        msg_id = msg.get("id")
        cmd = msg.get("cmd")
        params = msg.get("params") or {}
        handler = getattr(self, f"_cmd_{cmd}", None)
        if handler is None or not isinstance(cmd, str) or cmd.startswith("_"):
            return {"id": msg_id, "ok": False,
                    "error": {"kind": "unknown-command", "message": str(cmd)}}
        with self._lock:
            if not allowed(self.progress, self.activity, cmd):
                kind = "invalid-state"
                if cmd == "bind_reference" and self.progress != "uncalibrated":
                    kind = "already-calibrated"
                return {"id": msg_id, "ok": False,
                        "error": {"kind": kind,
                                  "message": f"{cmd} not allowed in phase "
                                             f"{self.phase!r}"}}
            try:
                payload = handler(params)
            except session.NotSavedError as e:
                return {"id": msg_id, "ok": False,
                        "error": {"kind": "not-saved", "message": str(e.args[0])}}
            except InvalidStateError as e:
                return {"id": msg_id, "ok": False,
                        "error": {"kind": "invalid-state", "message": str(e)}}
            except calib_mod.AlreadyCalibratedError as e:
                return {"id": msg_id, "ok": False,
                        "error": {"kind": "already-calibrated", "message": str(e)}}
            except calib_mod.UnstableLevelError as e:
                return {"id": msg_id, "ok": False,
                        "error": {"kind": "unstable-level", "message": str(e)}}
            except rt_engine.DeviceUnavailableError as e:
                return {"id": msg_id, "ok": False,
                        "error": {"kind": "device-unavailable", "message": str(e)}}
            except rt_engine.EngineBusyError as e:
                return {"id": msg_id, "ok": False,
                        "error": {"kind": "engine-busy", "message": str(e)}}
            except (ValueError, KeyError, OSError) as e:
                return {"id": msg_id, "ok": False,
                        "error": {"kind": "invalid-params", "message": str(e)}}
        return {"id": msg_id, "ok": True, "payload": payload}

    # ---- helpers ----------------------------------------------------------

    def _state_payload(self) -> dict:
        return {"phase": self.phase,
                "progress": self.progress,
                "activity": self.activity,
                "spec": self.spec.to_dict(),
                "conditions": self.conditions.to_dict(),
                "calibration": (
                    {"offset_db": self.calibration.gain.offset_db,
                     "reference_spl": self.calibration.gain.reference_spl,
                     "measured_dbfs": self.calibration.gain.measured_dbfs,
                     "bound_at": self.calibration.gain.bound_at}
                    if self.calibration.calibrated else None),
                "last_artifact": self._last_artifact,
                "has_capture": self._capture is not None}

    def _test_signal(self) -> TestSignal:
        key = self.spec.to_json()
        if key not in self._signal_cache:
            self._signal_cache.clear()
            self._signal_cache[key] = make_test_signal(self.spec, self.catalog)
        return self._signal_cache[key]

    def _analyze_file(self, wav_path) -> dict:
        voice, loopback, fs, spec, _ = _load_pair(wav_path)
        rec = analyzer_mod.RecordingPair(voice=voice, loopback=loopback,
                                         fs=fs, spec=spec)
        result = analyzer_mod.analyze_recording(rec, self.catalog)
        d = result.to_dict()
        d["diagnostics"] = {
            k: v for k, v in d["diagnostics"].items()
            if isinstance(v, (int, float, str, bool))}
        return d

    def _run_loop(self, source, mode, **kwargs):
        """Run an engine loop, inline or on the worker thread."""
        def job():
            try:
                report = self.engine.run_duplex(source, mode,
                                                event_cb=self._emit, **kwargs)
                with self._lock:
                    self._finish_loop(mode, report)
            except Exception as e:  # surfaced as an event, service stays usable
                with self._lock:
                    self.activity = "idle"
                self._emit({"type": "loop_error", "mode": mode.value,
                            "message": str(e)})

        if self.config.block_loops:
            job()
        else:
            self._worker = threading.Thread(target=job, daemon=True)
            self._worker.start()

    def _finish_loop(self, mode: LoopMode, report: rt_engine.LoopReport):
        self.activity = "idle"
        if mode == LoopMode.RESPONSE_TEST:
            self._capture = report.capture
            self._capture_spec = self.spec
            self.progress = "recorded"
        if mode == LoopMode.MEMO and report.capture is not None:
            artifact = self.store.save_memo(report.capture, self.device.fs)
            self._last_artifact = artifact
            self._emit({"type": "memo_saved", "artifact": artifact})
        self._emit({"type": "completed", "loop": mode.value,
                    "blocks": report.blocks, "underruns": report.underruns,
                    "elapsed": report.elapsed})

    def join_idle(self, timeout: float = 30.0):
        worker = self._worker
        if worker is not None:
            worker.join(timeout)

    # ---- commands ----------------------------------------------------------

    def _cmd_get_state(self, params):
        return self._state_payload()

    def _cmd_list_devices(self, params):
        return {"devices": rt_engine.list_devices()}

    def _cmd_select_device(self, params):
        self._select_device(params["name"])
        self.store.log_action("select_device", {"name": params["name"]})
        return {"device": params["name"]}

    def _cmd_calib_start(self, params):
        noise = calib_mod.generate_pink_noise(self.config.calib_seconds,
                                              self.device.fs,
                                              seed=params.get("seed", 0))
        if self.config.sim_input is None and isinstance(
                self.device, SimulatedDuplexDevice):
            # headless default: the meter hears the pink noise at -30 dBFS
            self.device.load_input(noise * 10 ** (-10 / 20))
        self.activity = "calibrating"
        self.store.log_action("calib_start", {})
        self._run_loop(noise, LoopMode.CALIBRATION)
        return {"seconds": self.config.calib_seconds}

    def _cmd_calib_stop(self, params):
        self.engine.request_stop()
        self.activity = "idle"
        return {}

    def _cmd_bind_reference(self, params):
        reference = int(params["reference"])
        gain = self.calibration.bind_reference(
            reference, measured=params.get("measured"),
            timestamp=self.store.now().isoformat(timespec="milliseconds"))
        self.progress = "calibrated"
        self.store.log_action("calibrate", {
            "reference": gain.reference_spl,
            "measured_dbfs": gain.measured_dbfs,
            "offset_db": gain.offset_db})
        return {"offset_db": gain.offset_db,
                "measured_dbfs": gain.measured_dbfs}

    def _cmd_reset_calibration(self, params):
        self.calibration.reset()
        self.progress = "uncalibrated"
        self._capture = None
        self.store.log_action("reset_calibration", {})
        return {}

    def _cmd_set_spec(self, params):
        merged = self.spec.to_dict()
        merged.update(params)
        self.spec = StimulusSpec.from_dict(merged)
        self.store.log_action("set_spec", {"spec": self.spec.to_dict()})
        return {"spec": self.spec.to_dict()}

    def _cmd_set_presentation(self, params):
        # headphone vs loudspeaker changes nothing in the signal path; it is
        # recorded as provenance for the saved trials
        mode = params["mode"]
        if mode not in ("headphone", "loudspeaker"):
            raise ValueError(f"unknown presentation mode: {mode}")
        self.presentation = mode
        self.store.log_action("set_presentation", {"mode": mode})
        return {"mode": mode}

    def _cmd_update_settings(self, params):
        cond = session.load_condition_file(params["path"])
        self.conditions = cond
        self.store.store_conditions(cond)
        spec = self.spec.to_dict()
        spec["depth"] = cond.depth
        self.spec = StimulusSpec.from_dict(spec)
        return {"conditions": cond.to_dict()}

    def _cmd_save_test_signal(self, params):
        artifact = self.store.save_test_signal(self._test_signal())
        self._last_artifact = artifact
        return {"artifact": artifact}

    def _cmd_voice_check_start(self, params):
        target = make_target_signal(self.spec)
        seconds = self.config.voice_check_seconds
        if seconds is not None:
            target = target[:int(seconds * self.device.fs)]
        self.activity = "voice_check"
        self.store.log_action("voice_check_start", {})
        self._run_loop(target, LoopMode.VOICE_CHECK,
                       pitch_target=self.spec.target_fo)
        return {}

    def _cmd_voice_check_stop(self, params):
        self.engine.request_stop()
        self.activity = "idle"
        self.store.log_action("voice_check_stop", {})
        return {}

    def _cmd_test_start(self, params):
        test = self._test_signal()
        if isinstance(self.device, SimulatedDuplexDevice):
            if self.config.sim_subject_model is not None:
                model = sim_subject.SubjectModel.from_dict(
                    self.config.sim_subject_model)
                self.device.load_input(
                    sim_subject.simulate_subject(test, model))
            elif self.config.sim_input is not None:
                self.device.load_input(self.config.sim_input)
        self.activity = "testing"
        self.store.log_action("test_start", {"spec": self.spec.to_dict()})
        self._run_loop(test.samples, LoopMode.RESPONSE_TEST)
        return {"duration": self.spec.duration}

    def _cmd_play(self, params):
        if self._capture is None:
            raise InvalidStateError("no recording to play")
        self.activity = "playing"
        self.store.log_action("play", {})
        self._run_loop(self._capture[:, 0], LoopMode.PLAYBACK)
        return {}

    def _cmd_save(self, params):
        if self._capture is None:
            raise InvalidStateError("no recording to save")
        calib = None
        if self.calibration.calibrated:
            calib = {"offset_db": self.calibration.gain.offset_db,
                     "reference_spl": self.calibration.gain.reference_spl}
        if calib is not None:
            calib["presentation"] = self.presentation
        artifact = self.store.save_recording(
            self._capture[:, 0], self._capture[:, 1],
            self._capture_spec or self.spec, calibration=calib)
        self._last_artifact = artifact
        self.progress = "saved"
        self._emit({"type": "analysis_ready", "artifact": artifact})
        return {"artifact": artifact}

    def _cmd_memo5s(self, params):
        if self.activity != "idle":
            raise InvalidStateError("another loop is running")
        self.activity = "memo"
        self.store.log_action("memo5s", {})
        self._run_loop(None, LoopMode.MEMO)
        return {"artifact": self._last_artifact} if self.config.block_loops else {}

    def _cmd_get_analysis(self, params):
        artifact = params.get("artifact") or self._last_artifact
        if artifact is None:
            raise session.NotSavedError("no saved recording")
        return {"artifact": artifact,
                "result": self.store.fetch_analysis(artifact)}


def _load_pair(wav_path):
    from . import wavio
    data, fs, _ = wavio.read_wav(wav_path)
    sidecar = json.loads(Path(wav_path).with_suffix(".wav.json").read_text())
    spec = StimulusSpec.from_dict(sidecar["spec"])
    return data[:, 0], data[:, 1], fs, spec, sidecar
