// Control enablement is a pure function of the reported experiment state:
// the client never decides workflow on its own, it only previews what the
// service would accept.

import type { Phase, ServiceState } from "./protocol.js";

export type ControlId =
  | "calib_start"
  | "bind_70"
  | "bind_80"
  | "reset_calibration"
  | "signal_menus"
  | "save_test_signal"
  | "update_settings"
  | "voice_check"
  | "start"
  | "play"
  | "save"
  | "memo5s";

export const ALL_CONTROLS: ControlId[] = [
  "calib_start", "bind_70", "bind_80", "reset_calibration", "signal_menus",
  "save_test_signal", "update_settings", "voice_check", "start", "play",
  "save", "memo5s",
];

const IDLE_PHASES: Phase[] = ["uncalibrated", "calibrated", "recorded", "saved"];

export function controlEnabled(control: ControlId, state: ServiceState): boolean {
  const phase = state.phase;
  const idle = IDLE_PHASES.includes(phase);
  switch (control) {
    case "calib_start":
      return idle;
    case "bind_70":
    case "bind_80":
      // binding needs a running meter and no previous binding
      return phase === "uncalibrated";
    case "reset_calibration":
      return idle && state.calibration !== null;
    case "signal_menus":
    case "save_test_signal":
    case "update_settings":
    case "memo5s":
      return idle;
    case "voice_check":
      // acts as stop while the check loop runs
      return phase === "voice_check" ||
        (idle && phase !== "uncalibrated");
    case "start":
      return idle && phase !== "uncalibrated";
    case "play":
      return phase === "recorded" || phase === "saved";
    case "save":
      return phase === "recorded";
  }
}

export function enablementSnapshot(state: ServiceState): Record<ControlId, boolean> {
  const snapshot = {} as Record<ControlId, boolean>;
  for (const control of ALL_CONTROLS) {
    snapshot[control] = controlEnabled(control, state);
  }
  return snapshot;
}

export function defaultState(): ServiceState {
  return {
    phase: "uncalibrated",
    progress: "uncalibrated",
    activity: "idle",
    spec: {
      signal_type: "SINES", fo: 110, target_fo: 220, combination_id: 0,
      normalization: "PEAK", phase_alloc: "SCH", depth: 100, duration: 20,
      fs: 44100, seed: 0,
    },
    conditions: {
      fo_choices: [110, 220, 440], target_fo_choices: [110, 220, 440],
      depth: 100, combination_ids: Array.from({ length: 20 }, (_, i) => i),
      default_type: "SINES", default_normalization: "PEAK",
      default_phase: "SCH",
    },
    calibration: null,
    last_artifact: null,
    has_capture: false,
  };
}
