/** Pure timeline geometry: event reports -> rectangles.
 *
 * x is the onset in seconds, width the effective duration from the
 * report, hue derives from the dominant partial frequency so similar
 * events look similar.  Overlapping events stack into lanes rather than
 * occluding each other.
 */

import type { EventReport } from "./api.js";

export interface EventRect {
  index: number;
  x: number; // seconds
  width: number; // seconds
  lane: number;
  hue: number; // degrees
  muted: boolean;
}

const HUE_LO_HZ = 40;
const HUE_HI_HZ = 8000;

/** Map a frequency onto [0, 300] degrees over a log scale of 40-8000 Hz. */
export function hueForFrequency(hz: number): number {
  const clamped = Math.min(HUE_HI_HZ, Math.max(HUE_LO_HZ, hz));
  const t =
    Math.log(clamped / HUE_LO_HZ) / Math.log(HUE_HI_HZ / HUE_LO_HZ);
  return 300 * t;
}

/** Assign lanes greedily: an event takes the lowest lane that is free
 * at its onset time. */
export function layoutEvents(
  events: EventReport[],
  clipSeconds: number,
): EventRect[] {
  const laneEnds: number[] = [];
  const ordered = [...events].sort(
    (a, b) => a.onset_seconds - b.onset_seconds || a.index - b.index,
  );
  const rects: EventRect[] = [];
  for (const ev of ordered) {
    const x = Math.min(Math.max(ev.onset_seconds, 0), clipSeconds);
    const width = Math.max(0, Math.min(ev.duration_seconds, clipSeconds - x));
    let lane = laneEnds.findIndex((end) => end <= x);
    if (lane < 0) {
      lane = laneEnds.length;
      laneEnds.push(0);
    }
    laneEnds[lane] = x + width;
    rects.push({
      index: ev.index,
      x,
      width,
      lane,
      hue: hueForFrequency(ev.dominant_freq_hz),
      muted: ev.muted,
    });
  }
  return rects;
}

/** Pixels-to-seconds conversion for drag gestures. */
export function dragToSeconds(
  dxPixels: number,
  pixelsPerSecond: number,
): number | null {
  if (dxPixels === 0) return null; // dead zone: no mutation for a click
  return dxPixels / pixelsPerSecond;
}
