/** Editor session state: a thin mirror of the latest server revision.
 *
 * All view state derives from the most recent server document; edits
 * go through the service and the local copy is refreshed from the
 * response.  At most one mutation is in flight at a time, and renders
 * are cached by (revision, subset).
 */

import { ApiClient, ApiError, EventEdit, SessionDoc } from "./api.js";
import { dragToSeconds } from "./layout.js";

export type ToastFn = (message: string) => void;

export class EditorSession {
  doc: SessionDoc;
  selection: number | null = null;
  /** Playback mode for the A/B toggle. */
  comparing = false;
  private mutating = false;
  private renderCache = new Map<string, ArrayBuffer>();

  constructor(
    private readonly api: ApiClient,
    doc: SessionDoc,
    private readonly toast: ToastFn = () => {},
  ) {
    this.doc = doc;
  }

  static async load(api: ApiClient, id: string, toast?: ToastFn) {
    return new EditorSession(api, await api.waitReady(id), toast);
  }

  get revision(): number {
    return this.doc.revision;
  }

  get clipSeconds(): number {
    const { total_samples = 0, sample_rate = 1 } = this.doc;
    return total_samples / sample_rate;
  }

  private async refresh(): Promise<void> {
    this.doc = await this.api.getSession(this.doc.id);
    if (
      this.selection !== null &&
      this.selection >= (this.doc.events?.length ?? 0)
    ) {
      this.selection = null;
    }
  }

  /** Apply one edit; on a stale-revision conflict, reload and report. */
  private async mutate(index: number, edit: EventEdit): Promise<boolean> {
    if (this.mutating) return false; // single in-flight mutation
    this.mutating = true;
    try {
      await this.api.patchEvent(this.doc.id, index, edit, this.doc.revision);
      await this.refresh();
      return true;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.toast("edit conflict: reloaded the latest revision");
        await this.refresh();
      } else {
        this.toast(err instanceof Error ? err.message : String(err));
      }
      return false;
    } finally {
      this.mutating = false;
    }
  }

  /** Translate an event in time. Returns false for a zero-pixel drag
   * (dead zone: no request is issued). */
  async dragEvent(
    index: number,
    dxPixels: number,
    pixelsPerSecond: number,
  ): Promise<boolean> {
    const dt = dragToSeconds(dxPixels, pixelsPerSecond);
    if (dt === null) return false;
    return this.mutate(index, { move_by_seconds: dt });
  }

  async toggleMute(index: number): Promise<boolean> {
    const muted = this.doc.events?.[index]?.muted ?? false;
    return this.mutate(index, { mute: !muted });
  }

  async deleteEvent(index: number): Promise<boolean> {
    return this.mutate(index, { delete: true });
  }

  async setAmplitude(index: number, amplitude: number): Promise<boolean> {
    return this.mutate(index, { amplitude });
  }

  /** Fetch a render for playback, cached per (revision, subset). */
  async audition(subset?: number[]): Promise<ArrayBuffer> {
    const key = `${this.doc.revision}:${subset ? subset.join(",") : "*"}`;
    const hit = this.renderCache.get(key);
    if (hit) return hit;
    const wav = await this.api.render(this.doc.id, subset);
    this.renderCache.set(key, wav);
    return wav;
  }

  /** Toggle original-vs-reconstruction playback; returns the new mode. */
  abCompare(): boolean {
    this.comparing = !this.comparing;
    return this.comparing;
  }
}
