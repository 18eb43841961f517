/** Browser entry point: upload a clip, then edit its events on a
 * canvas timeline.  All audio comes back from the service; the client
 * only draws and plays.
 */

import { ApiClient } from "./api.js";
import { EventRect, layoutEvents } from "./layout.js";
import { EditorSession } from "./state.js";

const LANE_HEIGHT = 28;
const PX_PER_SECOND = 160;

function toast(message: string): void {
  const el = document.getElementById("toast");
  if (!el) return;
  el.textContent = message;
  el.classList.add("visible");
  setTimeout(() => el.classList.remove("visible"), 4000);
}

class TimelineApp {
  private session: EditorSession | null = null;
  private rects: EventRect[] = [];
  private originalWav: ArrayBuffer | null = null;
  private audio = new AudioContext();
  private playing: AudioBufferSourceNode | null = null;
  private cursorAt = 0;

  constructor(
    private readonly api: ApiClient,
    private readonly canvas: HTMLCanvasElement,
  ) {
    canvas.addEventListener("pointerdown", (e) => this.onPointerDown(e));
  }

  async open(file: File): Promise<void> {
    this.originalWav = await file.arrayBuffer();
    const created = await this.api.createSession(this.originalWav);
    toast("encoding…");
    this.session = await EditorSession.load(this.api, created.id, toast);
    if (this.session.doc.status === "error") {
      toast(this.session.doc.error ?? "encode failed");
      return;
    }
    this.redraw();
  }

  private redraw(): void {
    const s = this.session;
    if (!s) return;
    this.rects = layoutEvents(s.doc.events ?? [], s.clipSeconds);
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    this.canvas.width = Math.ceil(s.clipSeconds * PX_PER_SECOND) + 20;
    const lanes = 1 + Math.max(0, ...this.rects.map((r) => r.lane));
    this.canvas.height = lanes * LANE_HEIGHT + 20;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    for (const r of this.rects) {
      const selected = r.index === s.selection;
      ctx.fillStyle = `hsla(${r.hue}, 70%, 55%, ${r.muted ? 0.25 : 0.85})`;
      ctx.strokeStyle = selected ? "#fff" : "#222";
      const x = r.x * PX_PER_SECOND;
      const w = Math.max(3, r.width * PX_PER_SECOND);
      const y = r.lane * LANE_HEIGHT + 4;
      ctx.fillRect(x, y, w, LANE_HEIGHT - 8);
      ctx.strokeRect(x, y, w, LANE_HEIGHT - 8);
    }
    // playback cursor
    ctx.strokeStyle = "#e33";
    ctx.beginPath();
    ctx.moveTo(this.cursorAt * PX_PER_SECOND, 0);
    ctx.lineTo(this.cursorAt * PX_PER_SECOND, this.canvas.height);
    ctx.stroke();
  }

  private hitTest(x: number, y: number): EventRect | undefined {
    const lane = Math.floor(y / LANE_HEIGHT);
    const sec = x / PX_PER_SECOND;
    return this.rects.find(
      (r) =>
        r.lane === lane && sec >= r.x && sec <= r.x + Math.max(r.width, 0.02),
    );
  }

  private onPointerDown(down: PointerEvent): void {
    const s = this.session;
    if (!s) return;
    const hit = this.hitTest(down.offsetX, down.offsetY);
    s.selection = hit ? hit.index : null;
    this.redraw();
    if (!hit) return;

    const startX = down.clientX;
    const onUp = async (up: PointerEvent) => {
      window.removeEventListener("pointerup", onUp);
      const dx = up.clientX - startX;
      if (await s.dragEvent(hit.index, dx, PX_PER_SECOND)) this.redraw();
    };
    window.addEventListener("pointerup", onUp);
  }

  async play(wav: ArrayBuffer): Promise<void> {
    this.playing?.stop();
    const buf = await this.audio.decodeAudioData(wav.slice(0));
    const node = this.audio.createBufferSource();
    node.buffer = buf;
    node.connect(this.audio.destination);
    node.start();
    this.playing = node;
  }

  async audition(): Promise<void> {
    if (this.session) await this.play(await this.session.audition());
  }

  async auditionSelected(): Promise<void> {
    const s = this.session;
    if (s && s.selection !== null) {
      await this.play(await s.audition([s.selection]));
    }
  }

  async abCompare(): Promise<void> {
    const s = this.session;
    if (!s || !this.originalWav) return;
    const useOriginal = s.abCompare();
    await this.play(useOriginal ? this.originalWav : await s.audition());
    toast(useOriginal ? "A: original" : "B: reconstruction");
  }

  async mute(): Promise<void> {
    const s = this.session;
    if (s && s.selection !== null && (await s.toggleMute(s.selection))) {
      this.redraw();
    }
  }

  async remove(): Promise<void> {
    const s = this.session;
    if (s && s.selection !== null && (await s.deleteEvent(s.selection))) {
      this.redraw();
    }
  }
}

function bind(): void {
  const canvas = document.getElementById("timeline") as HTMLCanvasElement;
  const api = new ApiClient(
    (window as unknown as { SIAC_URL?: string }).SIAC_URL ??
      "http://127.0.0.1:8765",
  );
  const app = new TimelineApp(api, canvas);

  document.getElementById("file")?.addEventListener("change", (e) => {
    const file = (e.target as HTMLInputElement).files?.[0];
    if (file) void app.open(file);
  });
  document
    .getElementById("audition")
    ?.addEventListener("click", () => void app.audition());
  document
    .getElementById("audition-one")
    ?.addEventListener("click", () => void app.auditionSelected());
  document
    .getElementById("ab")
    ?.addEventListener("click", () => void app.abCompare());
  document
    .getElementById("mute")
    ?.addEventListener("click", () => void app.mute());
  document
    .getElementById("delete")
    ?.addEventListener("click", () => void app.remove());
}

if (typeof document !== "undefined") bind();
