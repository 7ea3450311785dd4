// Troubleshooting graphs above the response plot: the recorded level with
// the usable voiced span shaded, and the fo trajectories of both channels
// in cents.

export interface ChannelTrajectory {
  time: number[];
  cents: number[];
  voiced: boolean[];
  level_dbfs: number[];
}

export interface TrajectoryBlock {
  voice?: ChannelTrajectory;
  loopback?: ChannelTrajectory;
}

export interface DiagnosticsModel {
  duration: number;
  voicedSpan: [number, number];
  level: { time: number[]; dbfs: number[] } | null;
  series: { label: string; color: string;
            points: { t: number; cents: number | null }[] }[];
}

export const VOICE_COLOR = "#1f4fd6";
export const LOOPBACK_COLOR = "#d62718";

export function diagnosticsModel(
  trajectories: TrajectoryBlock | undefined,
  voicedSpan: [number, number],
): DiagnosticsModel | null {
  if (!trajectories?.voice) {
    return null;
  }
  const voice = trajectories.voice;
  const duration = voice.time[voice.time.length - 1] ?? 0;
  const series = [];
  for (const [label, color, channel] of [
    ["voice", VOICE_COLOR, voice],
    ["loop-back", LOOPBACK_COLOR, trajectories.loopback],
  ] as const) {
    if (!channel) {
      continue;
    }
    series.push({
      label,
      color,
      // unvoiced frames break the line instead of drawing stale values
      points: channel.time.map((t, i) => ({
        t,
        cents: channel.voiced[i] ? channel.cents[i] : null,
      })),
    });
  }
  return {
    duration,
    voicedSpan,
    level: { time: voice.time, dbfs: voice.level_dbfs },
    series,
  };
}

export interface Box { width: number; height: number; }

export function timeToX(t: number, duration: number, box: Box): number {
  return duration > 0 ? (t / duration) * box.width : 0;
}

export function renderDiagnostics(ctx: CanvasRenderingContext2D, box: Box,
                                  model: DiagnosticsModel | null): void {
  ctx.clearRect(0, 0, box.width, box.height);
  if (!model) {
    ctx.fillStyle = "#999";
    ctx.font = "13px sans-serif";
    ctx.fillText("no recording analyzed yet", 12, box.height / 2);
    return;
  }
  const half = box.height / 2;

  // top: level in dBFS with the voiced span shaded
  const [spanLo, spanHi] = model.voicedSpan;
  ctx.fillStyle = "rgba(46, 158, 79, 0.15)";
  ctx.fillRect(timeToX(spanLo, model.duration, box), 0,
               timeToX(spanHi - spanLo, model.duration, box), half);
  if (model.level) {
    ctx.strokeStyle = "#333";
    ctx.lineWidth = 1;
    ctx.beginPath();
    model.level.time.forEach((t, i) => {
      const x = timeToX(t, model.duration, box);
      const db = Math.max(model.level!.dbfs[i], -90);
      const y = half - ((db + 90) / 90) * (half - 4);
      if (i === 0) {
        ctx.moveTo(x, y);
      } else {
        ctx.lineTo(x, y);
      }
    });
    ctx.stroke();
  }

  // bottom: cents trajectories of both channels
  const centsValues = model.series.flatMap((s) =>
    s.points.map((p) => p.cents).filter((c): c is number => c !== null));
  const top = Math.max(...centsValues.map(Math.abs), 100);
  for (const s of model.series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 1;
    ctx.beginPath();
    let pen = false;
    for (const p of s.points) {
      if (p.cents === null) {
        pen = false;
        continue;
      }
      const x = timeToX(p.t, model.duration, box);
      const y = box.height - ((p.cents + top) / (2 * top)) * (half - 4) - half / 2;
      if (!pen) {
        ctx.moveTo(x, y);
        pen = true;
      } else {
        ctx.lineTo(x, y);
      }
    }
    ctx.stroke();
  }
  ctx.strokeStyle = "#aaa";
  ctx.beginPath();
  ctx.moveTo(0, half);
  ctx.lineTo(box.width, half);
  ctx.stroke();
}
