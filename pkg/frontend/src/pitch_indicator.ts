// Live pitch indicator geometry: horizontal gridlines one semitone apart,
// a green line at the target pitch, a red marker following the smoothed
// live fo.  All layout math is pure so it can be tested headless.

export const GRIDLINE_SPACING_CENTS = 100;
export const TARGET_COLOR = "#2e9e4f";
export const MARKER_COLOR = "#d62718";

export interface IndicatorLayout {
  height: number;          // pixels
  rangeCents: number;      // total span top to bottom
}

export interface PitchSample {
  foHz: number | null;     // smoothed value; null while unvoiced
  voiced: boolean;
}

export function centsReTarget(foHz: number, targetFo: number): number {
  return 1200 * Math.log2(foHz / targetFo);
}

/** Gridline offsets in cents (multiples of one semitone), centered on the
 * target pitch at 0. */
export function gridlineCents(layout: IndicatorLayout): number[] {
  const half = layout.rangeCents / 2;
  const lines: number[] = [];
  const first = Math.ceil(-half / GRIDLINE_SPACING_CENTS) * GRIDLINE_SPACING_CENTS;
  for (let c = first; c <= half; c += GRIDLINE_SPACING_CENTS) {
    lines.push(c);
  }
  return lines;
}

/** Vertical pixel position for a cents offset; 0 cents sits mid-height and
 * positive offsets move up. */
export function centsToY(cents: number, layout: IndicatorLayout): number {
  const pixelsPerCent = layout.height / layout.rangeCents;
  return layout.height / 2 - cents * pixelsPerCent;
}

export interface MarkerState {
  visible: boolean;
  y: number | null;
  cents: number | null;
}

export function markerState(sample: PitchSample, targetFo: number,
                            layout: IndicatorLayout): MarkerState {
  if (!sample.voiced || sample.foHz === null || sample.foHz <= 0) {
    return { visible: false, y: null, cents: null };
  }
  const cents = centsReTarget(sample.foHz, targetFo);
  if (Math.abs(cents) > layout.rangeCents / 2) {
    return { visible: false, y: null, cents };
  }
  return { visible: true, y: centsToY(cents, layout), cents };
}

/** Draw the indicator onto a canvas 2D context. */
export function renderIndicator(
  ctx: CanvasRenderingContext2D,
  width: number,
  layout: IndicatorLayout,
  marker: MarkerState,
): void {
  ctx.clearRect(0, 0, width, layout.height);
  ctx.strokeStyle = "#555";
  ctx.lineWidth = 1;
  for (const cents of gridlineCents(layout)) {
    const y = centsToY(cents, layout);
    ctx.beginPath();
    ctx.moveTo(0, y);
    ctx.lineTo(width, y);
    ctx.stroke();
  }
  const targetY = centsToY(0, layout);
  ctx.strokeStyle = TARGET_COLOR;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(0, targetY);
  ctx.lineTo(width, targetY);
  ctx.stroke();
  if (marker.visible && marker.y !== null) {
    ctx.fillStyle = MARKER_COLOR;
    ctx.beginPath();
    ctx.arc(width / 2, marker.y, 9, 0, 2 * Math.PI);
    ctx.fill();
  }
}
