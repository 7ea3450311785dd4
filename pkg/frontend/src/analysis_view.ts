// Analysis panel model: the three-line response plot (stimulation in red,
// linear response in blue, random-and-time-varying level in yellow) plus
// the two troubleshooting graphs above it.  The panel refuses to render
// anything for a recording that has not been saved: it turns a not-saved
// error into a prompt instead of a plot.

import type { AnalysisResult, Reply } from "./protocol.js";

export const STIMULATION_COLOR = "#d62718"; // red
export const LINEAR_COLOR = "#1f4fd6";      // blue
export const RANDOM_COLOR = "#d6b11f";      // yellow

export type AnalysisView =
  | { kind: "prompt"; message: string }
  | { kind: "error"; message: string }
  | {
      kind: "plot";
      lag: number[];
      traces: { label: string; color: string; values: number[] }[];
      centsRange: [number, number];
    };

export function viewFromReply(reply: Reply): AnalysisView {
  if (!reply.ok) {
    if (reply.error?.kind === "not-saved") {
      return {
        kind: "prompt",
        message: "Save the recording to see its analysis.",
      };
    }
    return { kind: "error", message: reply.error?.message ?? "unknown error" };
  }
  const result = (reply.payload?.result ?? {}) as AnalysisResult;
  if (result.error) {
    return { kind: "error", message: result.error.message };
  }
  return viewFromResult(result);
}

export function viewFromResult(result: AnalysisResult): AnalysisView {
  const values = [...result.stimulation, ...result.linear, ...result.random_tv];
  const top = Math.max(...values.map(Math.abs), 1e-9);
  return {
    kind: "plot",
    lag: result.lag,
    traces: [
      { label: "stimulation", color: STIMULATION_COLOR, values: result.stimulation },
      { label: "response", color: LINEAR_COLOR, values: result.linear },
      { label: "random and time-varying", color: RANDOM_COLOR, values: result.random_tv },
    ],
    centsRange: [-top, top],
  };
}

export interface PlotBox {
  width: number;
  height: number;
}

export function lagToX(lag: number, lagMax: number, box: PlotBox): number {
  return lagMax > 0 ? (lag / lagMax) * box.width : 0;
}

export function valueToY(value: number, range: [number, number], box: PlotBox): number {
  const [lo, hi] = range;
  return box.height - ((value - lo) / (hi - lo)) * box.height;
}

export function renderAnalysis(
  ctx: CanvasRenderingContext2D,
  box: PlotBox,
  view: AnalysisView,
): void {
  ctx.clearRect(0, 0, box.width, box.height);
  if (view.kind !== "plot") {
    ctx.fillStyle = "#999";
    ctx.font = "14px sans-serif";
    ctx.fillText(view.message, 12, box.height / 2);
    return;
  }
  const lagMax = view.lag[view.lag.length - 1] ?? 0;
  ctx.strokeStyle = "#444";
  ctx.strokeRect(0.5, 0.5, box.width - 1, box.height - 1);
  const zeroY = valueToY(0, view.centsRange, box);
  ctx.beginPath();
  ctx.moveTo(0, zeroY);
  ctx.lineTo(box.width, zeroY);
  ctx.stroke();
  for (const trace of view.traces) {
    ctx.strokeStyle = trace.color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    trace.values.forEach((value, i) => {
      const x = lagToX(view.lag[i], lagMax, box);
      const y = valueToY(value, view.centsRange, box);
      if (i === 0) {
        ctx.moveTo(x, y);
      } else {
        ctx.lineTo(x, y);
      }
    });
    ctx.stroke();
  }
}

/** Model for the top troubleshooting graphs: recorded waveform span plus
 * both fo trajectories, drawn from the analysis diagnostics. */
export interface DiagnosticsSummary {
  voicedSpan: [number, number];
  pulsesUsed: number;
  medianVoiceFo: number | null;
}

export function diagnosticsSummary(result: AnalysisResult &
  { diagnostics?: Record<string, unknown> }): DiagnosticsSummary {
  const diag = result.diagnostics ?? {};
  return {
    voicedSpan: result.voiced_span,
    pulsesUsed: Number(diag["pulses_used"] ?? 0),
    medianVoiceFo: diag["median_voice_fo_hz"] != null
      ? Number(diag["median_voice_fo_hz"]) : null,
  };
}
