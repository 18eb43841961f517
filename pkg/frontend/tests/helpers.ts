/** Test-only audio utilities: clip synthesis and correlation lag. */

import { Pcm, parseWav, writeWav } from "../src/wav.js";

export const SAMPLE_RATE = 22050;

/** A clip of decaying sine plucks at the given onsets (seconds). */
export function makeClip(
  seconds: number,
  plucks: Array<{ at: number; hz: number; amp?: number }>,
): ArrayBuffer {
  const n = Math.round(seconds * SAMPLE_RATE);
  const samples = new Float32Array(n);
  for (const p of plucks) {
    const start = Math.round(p.at * SAMPLE_RATE);
    const amp = p.amp ?? 0.3;
    for (let i = start; i < n; i++) {
      const t = (i - start) / SAMPLE_RATE;
      samples[i] =
        (samples[i] ?? 0) +
        amp * Math.exp(-6 * t) * Math.sin(2 * Math.PI * p.hz * t);
    }
  }
  return writeWav({ sampleRate: SAMPLE_RATE, samples });
}

function dot(a: Float32Array, b: Float32Array, offsetB: number): number {
  let s = 0;
  const n = Math.min(a.length, b.length - offsetB);
  for (let i = 0; i < n; i++) s += (a[i] ?? 0) * (b[i + offsetB] ?? 0);
  return s;
}

function bestLagInRange(
  a: Float32Array,
  b: Float32Array,
  lo: number,
  hi: number,
  step: number,
): number {
  let best = lo;
  let bestScore = -Infinity;
  for (let lag = lo; lag <= hi; lag += step) {
    // positive lag means b is a delayed by `lag` samples
    const score =
      lag >= 0 ? dot(a, b, lag) : dot(b, a, -lag);
    if (score > bestScore) {
      bestScore = score;
      best = lag;
    }
  }
  return best;
}

function decimate(x: Float32Array, factor: number): Float32Array {
  const out = new Float32Array(Math.floor(x.length / factor));
  for (let i = 0; i < out.length; i++) {
    let s = 0;
    for (let k = 0; k < factor; k++) s += x[i * factor + k] ?? 0;
    out[i] = s / factor;
  }
  return out;
}

/** Lag (in samples) at which b best matches a: coarse pass on a
 * decimated pair, then a fine pass around the coarse peak. */
export function crossCorrelationLag(a: Float32Array, b: Float32Array): number {
  const factor = 32;
  const coarse =
    bestLagInRange(
      decimate(a, factor),
      decimate(b, factor),
      -Math.floor(b.length / factor) + 1,
      Math.floor(b.length / factor) - 1,
      1,
    ) * factor;
  return bestLagInRange(a, b, coarse - 2 * factor, coarse + 2 * factor, 1);
}

export function rms(x: Float32Array): number {
  let s = 0;
  for (let i = 0; i < x.length; i++) s += (x[i] ?? 0) ** 2;
  return Math.sqrt(s / Math.max(1, x.length));
}

export function pcmOf(wav: ArrayBuffer): Pcm {
  return parseWav(wav);
}
