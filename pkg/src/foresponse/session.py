"""Persistence and provenance: time-stamped unique names, WAV plus JSON
sidecar saving, append-only action logging, condition-file loading, and the
save-before-display rule.

Analysis results exist only for saved recordings: the result accessor is
keyed by saved-artifact id, so there is no code path that shows an analysis
for data that was never written to disk.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import wavio
from .stimulus import StimulusSpec, TestSignal, SignalType, Normalization, PhaseAlloc

CONDITION_SCHEMA_VERSION = 1


class NotSavedError(KeyError):
    pass


class ConditionFileError(ValueError):
    """Parse-level problem with a condition file."""


class ConditionValidationError(ValueError):
    """Well-formed JSON whose values violate the condition schema."""


@dataclass
class ExperimentConditions:
    fo_choices: list[float] = field(default_factory=lambda: [110.0, 220.0, 440.0])
    target_fo_choices: list[float] = field(default_factory=lambda: [110.0, 220.0, 440.0])
    depth: float = 100.0
    combination_ids: list[int] = field(default_factory=lambda: list(range(20)))
    default_type: str = "SINES"
    default_normalization: str = "PEAK"
    default_phase: str = "SCH"

    def validate(self):
        if not self.fo_choices or any(f <= 0 for f in self.fo_choices):
            raise ConditionValidationError("fo_choices must be positive")
        if not self.target_fo_choices or any(f <= 0 for f in self.target_fo_choices):
            raise ConditionValidationError("target_fo_choices must be positive")
        if self.depth < 0:
            raise ConditionValidationError("depth must be >= 0")
        if any(not 0 <= c < 20 for c in self.combination_ids):
            raise ConditionValidationError("combination ids must be in 0..19")
        SignalType(self.default_type)
        Normalization(self.default_normalization)
        PhaseAlloc(self.default_phase)

    def to_dict(self) -> dict:
        return {"schema_version": CONDITION_SCHEMA_VERSION,
                "fo_choices": self.fo_choices,
                "target_fo_choices": self.target_fo_choices,
                "depth": self.depth,
                "combination_ids": self.combination_ids,
                "default_type": self.default_type,
                "default_normalization": self.default_normalization,
                "default_phase": self.default_phase}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConditions":
        d = {k: v for k, v in d.items() if k != "schema_version"}
        try:
            cond = cls(**d)
        except TypeError as e:
            raise ConditionValidationError(str(e)) from e
        cond.validate()
        return cond


def load_condition_file(path) -> ExperimentConditions:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConditionFileError(f"cannot read condition file: {e}") from e
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConditionFileError(f"condition file is not valid JSON: {e}") from e
    if not isinstance(obj, dict):
        raise ConditionFileError("condition file must hold a JSON object")
    return ExperimentConditions.from_dict(obj)


def unique_name(timestamp: datetime, kind: str, existing=()) -> str:
    """Millisecond timestamp plus sanitized kind; collisions get a counter."""
    kind = re.sub(r"[^A-Za-z0-9_-]", "_", kind) or "item"
    base = timestamp.strftime("%Y%m%dT%H%M%S") + f"{timestamp.microsecond // 1000:03d}"
    name = f"{base}_{kind}"
    n = 0
    while name in existing:
        n += 1
        name = f"{base}_{kind}_{n}"
    return name


class SessionStore:
    """On-disk layout:

    <root>/recordings/*.wav(+.json)   saved trials (stereo)
    <root>/testsignals/               saved test signals (mono)
    <root>/memos/                     five-second voice memos
    <root>/results/*.json             analysis results, keyed by recording id
    <root>/log.jsonl                  append-only action log
    <root>/conditions.json            last loaded experiment conditions
    """

    def __init__(self, root, analyzer_hook=None, clock=None):
        self.root = Path(root)
        for sub in ("recordings", "testsignals", "memos", "results"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        self._log_path = self.root / "log.jsonl"
        self._analyzer_hook = analyzer_hook
        self._clock = clock or (lambda: datetime.now(timezone.utc))
        self._names: set[str] = set()
        self._results: dict[str, dict] = {}
        self._load_existing_names()

    def _load_existing_names(self):
        for sub in ("recordings", "testsignals", "memos"):
            for p in (self.root / sub).glob("*.wav"):
                self._names.add(p.stem)
        for p in (self.root / "results").glob("*.json"):
            self._results[p.stem] = json.loads(p.read_text())

    def now(self) -> datetime:
        return self._clock()

    def _new_name(self, kind: str) -> str:
        name = unique_name(self.now(), kind, existing=self._names)
        self._names.add(name)
        return name

    # ---- logging ----------------------------------------------------

    def log_action(self, action: str, payload: dict | None = None,
                   actor: str = "experimenter"):
        entry = {"time": self.now().isoformat(timespec="milliseconds"),
                 "actor": actor, "action": action, "payload": payload or {}}
        with open(self._log_path, "a") as f:
            f.write(json.dumps(entry) + "\n")

    def read_log(self) -> list[dict]:
        if not self._log_path.exists():
            return []
        with open(self._log_path) as f:
            return [json.loads(line) for line in f if line.strip()]

    # ---- artifacts ---------------------------------------------------

    def save_test_signal(self, sig: TestSignal, bits: int = 24) -> str:
        if len(sig.samples) == 0:
            raise ValueError("nothing to save")
        name = self._new_name("testsignal")
        wav = self.root / "testsignals" / f"{name}.wav"
        wavio.write_wav(wav, sig.samples, sig.spec.fs, bits=bits, comment=name)
        sidecar = {"artifact": name, "kind": "testsignal",
                   "spec": sig.spec.to_dict(),
                   "applied_gain": sig.applied_gain}
        wav.with_suffix(".wav.json").write_text(json.dumps(sidecar, indent=2))
        self.log_action("save_test_signal", {"artifact": name,
                                             "spec": sig.spec.to_dict()})
        return name

    def save_recording(self, voice: np.ndarray, loopback: np.ndarray,
                       spec: StimulusSpec, calibration: dict | None = None,
                       bits: int = 24) -> str:
        """Save a stereo trial capture, then run the analyzer on the saved
        file.  Results become retrievable only after this returns."""
        if len(voice) == 0 or len(voice) != len(loopback):
            raise ValueError("nothing to save or channel length mismatch")
        name = self._new_name("rec")
        wav = self.root / "recordings" / f"{name}.wav"
        stereo = np.stack([voice, loopback], axis=1)
        wavio.write_wav(wav, stereo, spec.fs, bits=bits, comment=name)
        sidecar = {"artifact": name, "kind": "recording",
                   "spec": spec.to_dict(), "calibration": calibration}
        wav.with_suffix(".wav.json").write_text(json.dumps(sidecar, indent=2))
        self.log_action("save_recording", {"artifact": name,
                                           "spec": spec.to_dict(),
                                           "calibration": calibration})
        if self._analyzer_hook is not None:
            # The save must never be lost to an analysis problem; a failed
            # analysis (say, too little voicing) is stored as the result.
            try:
                result = self._analyzer_hook(wav)
            except ValueError as e:
                result = {"error": {"kind": type(e).__name__, "message": str(e)}}
            self._store_result(name, result)
        return name

    def save_memo(self, samples: np.ndarray, fs: int, bits: int = 16) -> str:
        if len(samples) == 0:
            raise ValueError("nothing to save")
        name = self._new_name("memo")
        wav = self.root / "memos" / f"{name}.wav"
        wavio.write_wav(wav, samples, fs, bits=bits, comment=name)
        self.log_action("save_memo", {"artifact": name,
                                      "seconds": len(samples) / fs})
        return name

    def _store_result(self, artifact: str, result: dict):
        path = self.root / "results" / f"{artifact}.json"
        path.write_text(json.dumps(result))
        self._results[artifact] = result
        self.log_action("analysis_complete", {"artifact": artifact})

    def fetch_analysis(self, artifact: str) -> dict:
        """Analysis for a saved recording; raises NotSavedError otherwise."""
        if artifact not in self._results:
            raise NotSavedError(
                f"no saved analysis for {artifact!r}; recordings must be "
                "saved before their analysis can be displayed")
        return self._results[artifact]

    def load_recording(self, artifact: str):
        wav = self.root / "recordings" / f"{artifact}.wav"
        if not wav.exists():
            raise NotSavedError(f"unknown recording {artifact!r}")
        data, fs, _ = wavio.read_wav(wav)
        sidecar = json.loads(wav.with_suffix(".wav.json").read_text())
        spec = StimulusSpec.from_dict(sidecar["spec"])
        return data[:, 0], data[:, 1], fs, spec, sidecar

    # ---- conditions ---------------------------------------------------

    def store_conditions(self, cond: ExperimentConditions):
        (self.root / "conditions.json").write_text(
            json.dumps(cond.to_dict(), indent=2))
        self.log_action("update_settings", {"conditions": cond.to_dict()})


def replay_log(root) -> dict:
    """Re-derive the final menu/spec state from the action log alone.

    Folds condition updates and spec changes in order; the returned state
    must match the live service's view bit for bit (acceptance A10-style
    checks rely on this).
    """
    store = SessionStore(root)
    state = {"conditions": ExperimentConditions().to_dict(),
             "spec": StimulusSpec().to_dict(),
             "calibration": None,
             "artifacts": []}
    for entry in store.read_log():
        action = entry["action"]
        payload = entry.get("payload", {})
        if action == "update_settings":
            state["conditions"] = payload["conditions"]
        elif action == "set_spec":
            state["spec"] = payload["spec"]
        elif action == "calibrate":
            state["calibration"] = payload
        elif action == "reset_calibration":
            state["calibration"] = None
        elif action in ("save_recording", "save_test_signal", "save_memo"):
            state["artifacts"].append(payload["artifact"])
    return state
