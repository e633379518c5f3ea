/**
 * Terminal pane model: per-channel scrollback buffers, ordered by seq.
 *
 * Invariants:
 * - a frame appears in exactly one pane, inserted by seq (late frames after
 *   a reconnect land in the right position);
 * - duplicates (same seq) are ignored, so resumed streams stay exactly-once;
 * - concatenating all panes by seq reconstructs the server stream.
 */

import { channelFor, CHANNELS, DIAGNOSTICS, isChannel } from "./channels.js";
import type { EventFrame } from "./types.js";

export class TerminalPane {
  readonly events: EventFrame[] = [];
  paused = false;
  private seqs = new Set<number>();

  constructor(readonly channel: string) {}

  /** Insert by seq; returns false for duplicates. */
  insert(frame: EventFrame): boolean {
    if (this.seqs.has(frame.seq)) return false;
    this.seqs.add(frame.seq);
    let index = this.events.length;
    while (index > 0 && this.events[index - 1].seq > frame.seq) index -= 1;
    this.events.splice(index, 0, frame);
    return true;
  }
}

export class PaneSet {
  readonly panes = new Map<string, TerminalPane>();

  constructor() {
    for (const channel of CHANNELS) this.panes.set(channel, new TerminalPane(channel));
    this.panes.set(DIAGNOSTICS, new TerminalPane(DIAGNOSTICS));
  }

  /** Pick the owning pane: trust the frame's tag, fall back to the agent id,
   * and route anything unknown to diagnostics rather than dropping it. */
  routeChannel(frame: EventFrame): string {
    if (frame.channel && isChannel(frame.channel)) return frame.channel;
    const derived = channelFor(frame.agent_id);
    return derived ?? DIAGNOSTICS;
  }

  add(frame: EventFrame): { pane: TerminalPane; inserted: boolean } {
    const pane = this.panes.get(this.routeChannel(frame))!;
    return { pane, inserted: pane.insert(frame) };
  }

  pane(channel: string): TerminalPane {
    const pane = this.panes.get(channel);
    if (!pane) throw new Error(`no pane for channel '${channel}'`);
    return pane;
  }

  /** All buffered frames merged back into one seq-ordered stream. */
  unionInOrder(): EventFrame[] {
    const all: EventFrame[] = [];
    for (const pane of this.panes.values()) all.push(...pane.events);
    return all.sort((a, b) => a.seq - b.seq);
  }
}
