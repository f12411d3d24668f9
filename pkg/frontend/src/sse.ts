/**
 * Event-stream client over fetch streaming.
 *
 * Works in both browsers and node. Reconnects from the last seen sequence
 * number, so a dropped connection replays exactly what was missed and the
 * reducer's dedup makes overlaps harmless.
 */

import type { SessionEvent } from "./types.js";

export interface StreamOptions {
  fromSeq?: number;
  follow?: boolean;
  signal?: AbortSignal;
  retryDelayMs?: number;
}

/** Parse complete `id/data` frames out of a buffer; returns the leftover. */
export function parseFrames(buffer: string, emit: (e: SessionEvent) => void): string {
  const frames = buffer.split("\n\n");
  const rest = frames.pop() ?? "";
  for (const frame of frames) {
    for (const line of frame.split("\n")) {
      if (line.startsWith("data: ")) {
        emit(JSON.parse(line.slice(6)) as SessionEvent);
      }
    }
  }
  return rest;
}

/**
 * Stream session events, invoking onEvent in seq order. Resolves when the
 * session's done event arrives (or, with follow=false, when the backlog is
 * drained). Network drops trigger automatic reconnection from the last seq.
 */
export async function streamEvents(
  baseUrl: string,
  sessionId: string,
  onEvent: (e: SessionEvent) => void,
  opts: StreamOptions = {},
): Promise<void> {
  let nextSeq = (opts.fromSeq ?? 0) > 0 ? (opts.fromSeq as number) : 1;
  const follow = opts.follow ?? true;
  const retryDelay = opts.retryDelayMs ?? 250;

  for (;;) {
    if (opts.signal?.aborted) return;
    let sawDone = false;
    try {
      const url =
        `${baseUrl}/sessions/${sessionId}/events?from=${nextSeq}` +
        `&follow=${follow ? "true" : "false"}`;
      const resp = await fetch(url, { signal: opts.signal });
      if (!resp.ok || !resp.body) {
        throw new Error(`event stream failed: ${resp.status}`);
      }
      const reader = resp.body.getReader();
      const decoder = new TextDecoder();
      let buffer = "";
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        buffer += decoder.decode(value, { stream: true });
        buffer = parseFrames(buffer, (event) => {
          nextSeq = Math.max(nextSeq, event.seq + 1);
          if (event.kind === "done") sawDone = true;
          onEvent(event);
        });
      }
    } catch (err) {
      if (opts.signal?.aborted) return;
      await new Promise((r) => setTimeout(r, retryDelay));
      continue;
    }
    if (sawDone || !follow) return;
    await new Promise((r) => setTimeout(r, retryDelay));
  }
}
