/** Typed client for the codec editing service.
 *
 * Every mutation round-trips through HTTP; the client never recomputes
 * audio locally.
 */

export interface EventReport {
  index: number;
  abs_onset_sample: number;
  onset_seconds: number;
  amplitude: number;
  fine_shift: number;
  dominant_freq_hz: number;
  rir_index: number | null;
  duration_seconds: number;
  muted: boolean;
}

export interface SessionDoc {
  id: string;
  status: "encoding" | "ready" | "error";
  revision: number;
  error?: string;
  total_samples?: number;
  sample_rate?: number;
  events?: EventReport[];
}

export interface ResidualDoc {
  png_base64: string;
  input_norm: number;
  residual_norm: number;
  per_step_norms: number[];
}

export type EventEdit =
  | { delete: true }
  | { mute: boolean }
  | { amplitude: number }
  | { move_by_seconds: number };

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (u, i) => fetch(u, i),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    if (!resp.ok) {
      let message = `HTTP ${resp.status}`;
      try {
        const body = (await resp.json()) as { error?: string };
        if (body.error) message = body.error;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(resp.status, message);
    }
    return resp;
  }

  async createSession(wav: ArrayBuffer, steps?: number): Promise<SessionDoc> {
    const query = steps === undefined ? "" : `?steps=${steps}`;
    const resp = await this.request(`/sessions${query}`, {
      method: "POST",
      body: wav,
      headers: { "content-type": "audio/wav" },
    });
    return (await resp.json()) as SessionDoc;
  }

  async getSession(id: string): Promise<SessionDoc> {
    const resp = await this.request(`/sessions/${id}`);
    return (await resp.json()) as SessionDoc;
  }

  /** Poll until the encode job settles. */
  async waitReady(id: string, timeoutMs = 120_000): Promise<SessionDoc> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const doc = await this.getSession(id);
      if (doc.status !== "encoding") return doc;
      if (Date.now() > deadline) throw new Error("encode timed out");
      await new Promise((r) => setTimeout(r, 100));
    }
  }

  async patchEvent(
    id: string,
    index: number,
    edit: EventEdit,
    revision?: number,
  ): Promise<number> {
    const headers: Record<string, string> = {
      "content-type": "application/json",
    };
    if (revision !== undefined) headers["If-Match"] = String(revision);
    const resp = await this.request(`/sessions/${id}/events/${index}`, {
      method: "PATCH",
      body: JSON.stringify(edit),
      headers,
    });
    const body = (await resp.json()) as { revision: number };
    return body.revision;
  }

  /** Render a subset of events (or everything unmuted) as WAV bytes. */
  async render(id: string, subset?: number[]): Promise<ArrayBuffer> {
    const resp = await this.request(`/sessions/${id}/render`, {
      method: "POST",
      body: JSON.stringify(subset === undefined ? {} : { event_subset: subset }),
      headers: { "content-type": "application/json" },
    });
    return await resp.arrayBuffer();
  }

  async residual(id: string): Promise<ResidualDoc> {
    const resp = await this.request(`/sessions/${id}/residual`);
    return (await resp.json()) as ResidualDoc;
  }
}
