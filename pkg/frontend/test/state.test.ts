// B1: control enablement is a pure function of the reported state and
// matches the workflow rules (snapshot over every phase).

import test from "node:test";
import assert from "node:assert/strict";

import { controlEnabled, enablementSnapshot, defaultState, ALL_CONTROLS } from "../src/state.js";
import type { Phase, ServiceState } from "../src/protocol.js";

function stateIn(phase: Phase, calibrated: boolean): ServiceState {
  const state = defaultState();
  state.phase = phase;
  state.progress = phase === "voice_check" || phase === "testing"
    ? (calibrated ? "calibrated" : "uncalibrated") : phase;
  state.activity = phase === "voice_check" || phase === "testing" ? phase : "idle";
  state.calibration = calibrated
    ? { offset_db: 100, reference_spl: 70, measured_dbfs: -30, bound_at: "" }
    : null;
  return state;
}

const SNAPSHOT: Record<string, Record<string, boolean>> = {
  uncalibrated: {
    calib_start: true, bind_70: true, bind_80: true, reset_calibration: false,
    signal_menus: true, save_test_signal: true, update_settings: true,
    voice_check: false, start: false, play: false, save: false, memo5s: true,
  },
  calibrated: {
    calib_start: true, bind_70: false, bind_80: false, reset_calibration: true,
    signal_menus: true, save_test_signal: true, update_settings: true,
    voice_check: true, start: true, play: false, save: false, memo5s: true,
  },
  voice_check: {
    calib_start: false, bind_70: false, bind_80: false, reset_calibration: false,
    signal_menus: false, save_test_signal: false, update_settings: false,
    voice_check: true, start: false, play: false, save: false, memo5s: false,
  },
  testing: {
    calib_start: false, bind_70: false, bind_80: false, reset_calibration: false,
    signal_menus: false, save_test_signal: false, update_settings: false,
    voice_check: false, start: false, play: false, save: false, memo5s: false,
  },
  recorded: {
    calib_start: true, bind_70: false, bind_80: false, reset_calibration: true,
    signal_menus: true, save_test_signal: true, update_settings: true,
    voice_check: true, start: true, play: true, save: true, memo5s: true,
  },
  saved: {
    calib_start: true, bind_70: false, bind_80: false, reset_calibration: true,
    signal_menus: true, save_test_signal: true, update_settings: true,
    voice_check: true, start: true, play: true, save: false, memo5s: true,
  },
};

test("enablement snapshot matches for every phase", () => {
  for (const phase of Object.keys(SNAPSHOT) as Phase[]) {
    const calibrated = phase !== "uncalibrated";
    const snapshot = enablementSnapshot(stateIn(phase, calibrated));
    assert.deepEqual(snapshot, SNAPSHOT[phase],
      `enablement mismatch in phase ${phase}`);
  }
});

test("PLAY and SAVE activate exactly after a completed recording", () => {
  assert.equal(controlEnabled("play", stateIn("recorded", true)), true);
  assert.equal(controlEnabled("save", stateIn("recorded", true)), true);
  assert.equal(controlEnabled("play", stateIn("saved", true)), true);
  assert.equal(controlEnabled("save", stateIn("saved", true)), false);
  for (const phase of ["uncalibrated", "calibrated", "testing"] as Phase[]) {
    assert.equal(controlEnabled("play", stateIn(phase, phase !== "uncalibrated")), false);
    assert.equal(controlEnabled("save", stateIn(phase, phase !== "uncalibrated")), false);
  }
});

test("Start requires calibration", () => {
  assert.equal(controlEnabled("start", stateIn("uncalibrated", false)), false);
  assert.equal(controlEnabled("start", stateIn("calibrated", true)), true);
});

test("every control id appears in the snapshot", () => {
  const snapshot = enablementSnapshot(defaultState());
  assert.deepEqual(Object.keys(snapshot).sort(), [...ALL_CONTROLS].sort());
});
