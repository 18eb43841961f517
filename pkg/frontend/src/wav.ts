/** Minimal RIFF/WAV reading and writing (16-bit PCM mono). */

export interface Pcm {
  sampleRate: number;
  samples: Float32Array;
}

export function parseWav(buffer: ArrayBuffer): Pcm {
  const view = new DataView(buffer);
  const tag = (offset: number) =>
    String.fromCharCode(
      view.getUint8(offset),
      view.getUint8(offset + 1),
      view.getUint8(offset + 2),
      view.getUint8(offset + 3),
    );
  if (buffer.byteLength < 12 || tag(0) !== "RIFF" || tag(8) !== "WAVE") {
    throw new Error("not a RIFF/WAVE file");
  }

  let sampleRate = 0;
  let bits = 0;
  let channels = 0;
  let data: DataView | null = null;
  let offset = 12;
  while (offset + 8 <= buffer.byteLength) {
    const id = tag(offset);
    const size = view.getUint32(offset + 4, true);
    const body = offset + 8;
    if (id === "fmt ") {
      channels = view.getUint16(body + 2, true);
      sampleRate = view.getUint32(body + 4, true);
      bits = view.getUint16(body + 14, true);
    } else if (id === "data") {
      data = new DataView(buffer, body, Math.min(size, buffer.byteLength - body));
    }
    offset = body + size + (size % 2);
  }
  if (!sampleRate || !data) throw new Error("missing fmt or data chunk");
  if (bits !== 16) throw new Error(`unsupported bit depth: ${bits}`);

  const frames = Math.floor(data.byteLength / (2 * channels));
  const samples = new Float32Array(frames);
  for (let i = 0; i < frames; i++) {
    samples[i] = data.getInt16(i * 2 * channels, true) / 32768;
  }
  return { sampleRate, samples };
}

export function writeWav(pcm: Pcm): ArrayBuffer {
  const n = pcm.samples.length;
  const buffer = new ArrayBuffer(44 + n * 2);
  const view = new DataView(buffer);
  const ascii = (offset: number, text: string) => {
    for (let i = 0; i < text.length; i++) {
      view.setUint8(offset + i, text.charCodeAt(i));
    }
  };
  ascii(0, "RIFF");
  view.setUint32(4, 36 + n * 2, true);
  ascii(8, "WAVE");
  ascii(12, "fmt ");
  view.setUint32(16, 16, true);
  view.setUint16(20, 1, true);
  view.setUint16(22, 1, true);
  view.setUint32(24, pcm.sampleRate, true);
  view.setUint32(28, pcm.sampleRate * 2, true);
  view.setUint16(32, 2, true);
  view.setUint16(34, 16, true);
  ascii(36, "data");
  view.setUint32(40, n * 2, true);
  for (let i = 0; i < n; i++) {
    const v = Math.max(-1, Math.min(1, pcm.samples[i] ?? 0));
    view.setInt16(44 + i * 2, Math.max(-32768, Math.min(32767, Math.round(v * 32768))), true);
  }
  return buffer;
}
