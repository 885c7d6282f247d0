/**
 * Spectator player core: polls the playlist, starts a configurable number
 * of segments behind the live edge, fetches sequentially, decodes frame
 * records and hands them to a drawing surface. DOM-free so the same code
 * runs in the browser page and under node tests with a fake surface.
 */

import {
  FLAG_AUDIO,
  FrameRecord,
  LiveStats,
  Playlist,
  decodeSegment,
} from "./protocol.js";

export interface Surface {
  draw(frame: FrameRecord): void;
  status(text: string): void;
  /** latency of the currently displayed frame, seconds */
  latency(seconds: number): void;
}

export interface PlayerOptions {
  rung?: string;
  offset?: number | null;
  pollMs?: number;
  /** stop after this many segments (tests); 0 = run until stop() */
  maxSegments?: number;
}

const sleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class SpectatorPlayer {
  private stopped = false;
  segmentsPlayed = 0;
  framesDrawn = 0;
  gapsSkipped = 0;

  constructor(
    private base: string,
    private surface: Surface,
    private opts: PlayerOptions = {},
  ) {}

  stop(): void {
    this.stopped = true;
  }

  private async json<T>(path: string): Promise<T> {
    const r = await fetch(this.base + path);
    if (!r.ok) {
      throw new Error(`${path} -> HTTP ${r.status}`);
    }
    return (await r.json()) as T;
  }

  async run(): Promise<void> {
    const poll = this.opts.pollMs ?? 250;
    this.surface.status("connecting");
    const stats = await this.json<LiveStats>("/live/stats");
    if (stats.epoch_ms === null) {
      throw new Error("stream has no epoch yet");
    }
    const rung = this.opts.rung ?? (stats.rungs.includes("full") ? "full" : stats.rungs[0]);
    const offset = Math.max(1, this.opts.offset ?? stats.default_offset);
    const epoch = stats.epoch_ms;

    // wait for the stream to be deep enough, then pick the start segment
    let playlist: Playlist;
    for (;;) {
      playlist = await this.json<Playlist>(`/live/${rung}/playlist.json`);
      if (playlist.segments.length > 0) break;
      if (this.stopped) return;
      await sleep(poll);
    }
    const newest = playlist.segments[playlist.segments.length - 1].seq;
    let seq = Math.max(playlist.media_sequence, newest - offset + 1);
    this.surface.status(`playing ${rung} from segment ${seq} (${offset} behind live)`);

    while (!this.stopped) {
      const r = await fetch(`${this.base}/live/${rung}/seg/${seq}`);
      if (r.status === 404) {
        await sleep(poll); // not cut yet: wait at the live edge
        continue;
      }
      if (r.status === 410) {
        // fell off the window: skip forward to the oldest available
        playlist = await this.json<Playlist>(`/live/${rung}/playlist.json`);
        this.gapsSkipped += 1;
        seq = Math.max(playlist.media_sequence, seq + 1);
        this.surface.status(`skipped forward to segment ${seq}`);
        continue;
      }
      if (!r.ok) {
        throw new Error(`segment fetch -> HTTP ${r.status}`);
      }
      const records = await decodeSegment(new Uint8Array(await r.arrayBuffer()));
      const started = Date.now();
      const video = records.filter((rec) => !(rec.flags & FLAG_AUDIO));
      const firstPts = video.length ? video[0].ptsMs : 0;
      for (const rec of video) {
        if (this.stopped) return;
        const due = started + (rec.ptsMs - firstPts);
        const wait = due - Date.now();
        if (wait > 0) await sleep(wait);
        this.surface.draw(rec);
        this.framesDrawn += 1;
        this.surface.latency((Date.now() - epoch - rec.ptsMs) / 1000);
      }
      this.segmentsPlayed += 1;
      seq += 1;
      if (this.opts.maxSegments && this.segmentsPlayed >= this.opts.maxSegments) {
        return;
      }
    }
  }
}

/** Post one chat message as this spectator. */
export async function sendChat(base: string, clientId: string, text: string): Promise<number> {
  const r = await fetch(`${base}/api/chat`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ client_id: clientId, text }),
  });
  const body = (await r.json()) as { ok: boolean; msg_id?: number; error?: string };
  if (!body.ok) {
    throw new Error(body.error ?? "chat rejected");
  }
  return body.msg_id!;
}
