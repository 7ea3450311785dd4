// Left control panel: calibration sub-panel, test signal menus, trial
// buttons.  The DOM is built once; state updates only toggle enablement
// and indicator styling.

import type { ServiceState, StimulusSpec } from "./protocol.js";
import { ALL_CONTROLS, ControlId, controlEnabled } from "./state.js";

export interface ControlPanelHooks {
  onCommand(cmd: string, params?: Record<string, unknown>): void;
  onSpecChange(update: Partial<StimulusSpec>): void;
}

const BUTTON_DEFS: { id: ControlId; label: string; cmd: string; params?: Record<string, unknown> }[] = [
  { id: "calib_start", label: "Test signal start", cmd: "calib_start" },
  { id: "bind_70", label: "70 dB", cmd: "bind_reference", params: { reference: 70 } },
  { id: "bind_80", label: "80 dB", cmd: "bind_reference", params: { reference: 80 } },
  { id: "reset_calibration", label: "Reset", cmd: "reset_calibration" },
  { id: "save_test_signal", label: "Save test signal", cmd: "save_test_signal" },
  { id: "update_settings", label: "Update setting", cmd: "update_settings" },
  { id: "voice_check", label: "Voice Check", cmd: "voice_check_start" },
  { id: "start", label: "Start", cmd: "test_start" },
  { id: "play", label: "PLAY", cmd: "play" },
  { id: "save", label: "SAVE", cmd: "save" },
  { id: "memo5s", label: "MEMO5s", cmd: "memo5s" },
];

const MENU_DEFS = [
  { key: "signal_type", label: "Type", options: ["SINE", "SINES", "MFND", "MFNDH"] },
  { key: "normalization", label: "Normalization", options: ["PEAK", "TOTAL_RMS", "COMPONENT"] },
  { key: "phase_alloc", label: "Phase alloc.", options: ["SIN", "COS", "ALT", "SCH"] },
] as const;

export class ControlPanel {
  readonly element: HTMLElement;
  private buttons = new Map<ControlId, HTMLButtonElement>();
  private menus = new Map<string, HTMLSelectElement>();
  private calibLight: HTMLElement;
  private calibText: HTMLElement;
  private timer: HTMLElement;

  constructor(private hooks: ControlPanelHooks) {
    this.element = document.createElement("div");
    this.element.className = "control-panel";

    const calib = section("Calibration");
    this.calibLight = document.createElement("span");
    this.calibLight.className = "calib-light";
    this.calibText = document.createElement("span");
    this.calibText.className = "calib-text";
    calib.append(this.button("calib_start"), this.button("bind_70"),
                 this.button("bind_80"), this.button("reset_calibration"),
                 this.calibLight, this.calibText);

    const signal = section("Test signal");
    for (const def of MENU_DEFS) {
      const select = document.createElement("select");
      for (const option of def.options) {
        const el = document.createElement("option");
        el.value = option;
        el.textContent = option;
        select.append(el);
      }
      select.onchange = () =>
        this.hooks.onSpecChange({ [def.key]: select.value } as Partial<StimulusSpec>);
      this.menus.set(def.key, select);
      signal.append(labeled(def.label, select));
    }
    for (const key of ["fo", "target_fo", "combination_id"] as const) {
      const select = document.createElement("select");
      select.onchange = () =>
        this.hooks.onSpecChange({ [key]: Number(select.value) } as Partial<StimulusSpec>);
      this.menus.set(key, select);
      signal.append(labeled(key === "combination_id" ? "CombinationID"
        : key === "fo" ? "fo" : "target fo", select));
    }
    signal.append(this.button("save_test_signal"), this.button("update_settings"));

    const trial = section("Trial");
    this.timer = document.createElement("div");
    this.timer.className = "timer";
    this.timer.textContent = "0 s";
    trial.append(this.button("voice_check"), this.button("start"),
                 this.timer, this.button("play"), this.button("save"),
                 this.button("memo5s"));

    this.element.append(calib, signal, trial);
  }

  private button(id: ControlId): HTMLButtonElement {
    const def = BUTTON_DEFS.find((b) => b.id === id)!;
    const el = document.createElement("button");
    el.textContent = def.label;
    el.dataset.control = id;
    el.onclick = () => this.hooks.onCommand(def.cmd, def.params);
    this.buttons.set(id, el);
    return el;
  }

  setVoiceCheckActive(active: boolean): void {
    const el = this.buttons.get("voice_check");
    if (el) {
      el.textContent = active ? "Stop check" : "Voice Check";
      el.onclick = () =>
        this.hooks.onCommand(active ? "voice_check_stop" : "voice_check_start");
    }
  }

  setElapsed(seconds: number): void {
    this.timer.textContent = `${seconds} s`;
  }

  update(state: ServiceState): void {
    for (const id of ALL_CONTROLS) {
      if (id === "signal_menus") {
        const enabled = controlEnabled(id, state);
        for (const menu of this.menus.values()) {
          menu.disabled = !enabled;
        }
        continue;
      }
      const el = this.buttons.get(id);
      if (el) {
        el.disabled = !controlEnabled(id, state);
      }
    }
    this.setVoiceCheckActive(state.phase === "voice_check");

    fillNumberMenu(this.menus.get("fo")!, state.conditions.fo_choices, state.spec.fo);
    fillNumberMenu(this.menus.get("target_fo")!, state.conditions.target_fo_choices,
                   state.spec.target_fo);
    fillNumberMenu(this.menus.get("combination_id")!,
                   state.conditions.combination_ids, state.spec.combination_id);
    (this.menus.get("signal_type")!).value = state.spec.signal_type;
    (this.menus.get("normalization")!).value = state.spec.normalization;
    (this.menus.get("phase_alloc")!).value = state.spec.phase_alloc;

    if (state.calibration) {
      this.calibLight.classList.add("on");
      this.calibText.textContent =
        `+${state.calibration.offset_db.toFixed(1)} dB ` +
        `(ref ${state.calibration.reference_spl} dB SPL)`;
    } else {
      this.calibLight.classList.remove("on");
      this.calibText.textContent = "not calibrated";
    }
  }
}

function section(title: string): HTMLElement {
  const el = document.createElement("fieldset");
  const legend = document.createElement("legend");
  legend.textContent = title;
  el.append(legend);
  return el;
}

function labeled(text: string, child: HTMLElement): HTMLElement {
  const wrap = document.createElement("label");
  wrap.append(`${text}: `, child);
  return wrap;
}

function fillNumberMenu(select: HTMLSelectElement, choices: number[],
                        current: number): void {
  const want = choices.map(String).join("|");
  if (select.dataset.choices !== want) {
    select.innerHTML = "";
    for (const choice of choices) {
      const el = document.createElement("option");
      el.value = String(choice);
      el.textContent = String(choice);
      select.append(el);
    }
    select.dataset.choices = want;
  }
  select.value = String(current);
}
