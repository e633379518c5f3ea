/**
 * Fetch-based server-sent-events client with seq-aware resume.
 *
 * EventSource cannot vary the query string across reconnects, so we read
 * the stream manually: on any interruption we reconnect with
 * ?from_seq=<last seen>, and the seq-based dedupe in the handler gives the
 * caller exactly-once delivery regardless of overlap.
 */

import type { EventFrame } from "./types.js";

export interface SseMessage {
  event: string;
  data: string;
  id: string | null;
}

/** Incremental parser; feed arbitrary chunk boundaries, get whole frames. */
export class SseParser {
  private buffer = "";

  push(chunk: string): SseMessage[] {
    this.buffer += chunk;
    const messages: SseMessage[] = [];
    let boundary = this.buffer.indexOf("\n\n");
    while (boundary >= 0) {
      const block = this.buffer.slice(0, boundary);
      this.buffer = this.buffer.slice(boundary + 2);
      const message: SseMessage = { event: "message", data: "", id: null };
      const dataLines: string[] = [];
      for (const line of block.split("\n")) {
        if (line.startsWith("event: ")) message.event = line.slice(7);
        else if (line.startsWith("data: ")) dataLines.push(line.slice(6));
        else if (line.startsWith("id: ")) message.id = line.slice(4);
      }
      message.data = dataLines.join("\n");
      if (message.data || message.id) messages.push(message);
      boundary = this.buffer.indexOf("\n\n");
    }
    return messages;
  }
}

export interface StreamHandlers {
  onEvent: (frame: EventFrame) => void;
  onEnd: (state: string) => void;
  onStatusChange?: (connected: boolean) => void;
}

export interface StreamOptions {
  baseUrl?: string;
  fromSeq?: number;
  retryDelayMs?: number;
  fetchFn?: typeof fetch;
}

export interface StreamConnection {
  stop: () => void;
  lastSeq: () => number;
}

/**
 * Subscribe to a run's event stream. Returns a connection whose stop()
 * aborts the underlying request and disables reconnection.
 */
export function connectRunEvents(
  runId: string,
  handlers: StreamHandlers,
  options: StreamOptions = {},
): StreamConnection {
  const base = options.baseUrl ?? "";
  const retryDelay = options.retryDelayMs ?? 500;
  const fetchFn = options.fetchFn ?? fetch;
  let lastSeq = options.fromSeq ?? 0;
  let active = true;
  let controller: AbortController | null = null;

  const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

  async function consume(): Promise<boolean> {
    controller = new AbortController();
    const url = `${base}/runs/${runId}/events?from_seq=${lastSeq}`;
    const response = await fetchFn(url, { signal: controller.signal });
    if (!response.ok || !response.body) {
      throw new Error(`event stream returned ${response.status}`);
    }
    handlers.onStatusChange?.(true);
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    const parser = new SseParser();
    for (;;) {
      const { done, value } = await reader.read();
      if (done) return false;
      for (const message of parser.push(decoder.decode(value, { stream: true }))) {
        if (message.event === "agent_event") {
          const frame = JSON.parse(message.data) as EventFrame;
          if (frame.seq > lastSeq) {
            lastSeq = frame.seq;
            handlers.onEvent(frame);
          }
        } else if (message.event === "end") {
          const payload = JSON.parse(message.data) as { state: string };
          handlers.onEnd(payload.state);
          return true;
        }
      }
    }
  }

  (async () => {
    while (active) {
      try {
        const ended = await consume();
        if (ended) return;
      } catch (err) {
        if (!active) return;
        handlers.onStatusChange?.(false);
      }
      if (active) await sleep(retryDelay);
    }
  })();

  return {
    stop: () => {
      active = false;
      controller?.abort();
    },
    lastSeq: () => lastSeq,
  };
}
