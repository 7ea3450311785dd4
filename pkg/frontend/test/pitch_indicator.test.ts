// B2: pitch indicator geometry: semitone gridlines, octave spacing,
// marker visibility.

import test from "node:test";
import assert from "node:assert/strict";

import {
  GRIDLINE_SPACING_CENTS, centsReTarget, centsToY, gridlineCents, markerState,
} from "../src/pitch_indicator.js";

const LAYOUT = { height: 320, rangeCents: 2800 };

test("gridlines are spaced exactly 100 cents apart", () => {
  const lines = gridlineCents(LAYOUT);
  assert.ok(lines.length > 3);
  for (let i = 1; i < lines.length; i++) {
    assert.equal(lines[i] - lines[i - 1], GRIDLINE_SPACING_CENTS);
  }
  assert.ok(lines.includes(0), "target line present at 0 cents");
});

test("an octave above the target spans twelve gridline gaps", () => {
  const target = 220;
  const cents = centsReTarget(target * 2, target);
  assert.ok(Math.abs(cents - 1200) < 1e-9);
  const gaps = cents / GRIDLINE_SPACING_CENTS;
  assert.equal(gaps, 12);
  const pixelPerLine = (centsToY(0, LAYOUT) - centsToY(100, LAYOUT));
  const markerOffset = centsToY(0, LAYOUT) - centsToY(cents, LAYOUT);
  assert.ok(Math.abs(markerOffset - 12 * pixelPerLine) < 1e-9);
});

test("marker follows voiced samples and hides when unvoiced", () => {
  const onTarget = markerState({ foHz: 220, voiced: true }, 220, LAYOUT);
  assert.equal(onTarget.visible, true);
  assert.ok(Math.abs((onTarget.y ?? NaN) - LAYOUT.height / 2) < 1e-9,
    "marker sits on the green target line");

  const octave = markerState({ foHz: 440, voiced: true }, 220, LAYOUT);
  assert.equal(octave.visible, true);
  assert.ok(Math.abs((octave.cents ?? 0) - 1200) < 1e-9);

  const unvoiced = markerState({ foHz: null, voiced: false }, 220, LAYOUT);
  assert.equal(unvoiced.visible, false);
  assert.equal(unvoiced.y, null);
});

test("marker hides outside the visible range", () => {
  const narrow = { height: 320, rangeCents: 400 };
  const far = markerState({ foHz: 880, voiced: true }, 220, narrow);
  assert.equal(far.visible, false);
});

test("higher pitch moves the marker up", () => {
  const low = markerState({ foHz: 210, voiced: true }, 220, LAYOUT);
  const high = markerState({ foHz: 230, voiced: true }, 220, LAYOUT);
  assert.ok((high.y ?? 0) < (low.y ?? 0));
});
