import type { EventFrame, EventKind } from "../src/types.js";
import { channelFor } from "../src/channels.js";

export function frame(
  seq: number,
  agentId: string,
  kind: EventKind = "Status",
  payload = "payload",
  channel?: string,
): EventFrame {
  return {
    run_id: "run-1",
    seq,
    timestamp: 1700000000 + seq,
    agent_id: agentId,
    kind,
    payload,
    token_usage: null,
    channel: channel ?? channelFor(agentId) ?? "",
  };
}

/** Every agent id the server emits during a run. */
export const RUNTIME_AGENT_IDS = [
  "run.orchestrator",
  "civic.orchestrator",
  "civic.bioexpert",
  "civic.evaluator",
  "pharmgkb.orchestrator",
  "pharmgkb.bioexpert",
  "pharmgkb.evaluator",
  "enrichment.orchestrator",
  "enrichment.bioexpert",
  "enrichment.evaluator",
  "integration.orchestrator",
  "integration.report_composer",
  "integration.content_validator",
  "integration.critical_reviewer",
  "integration.relevance_validator",
];

/** A plausible whole-run stream cycling through every runtime agent id. */
export function recordedStream(length = 60): EventFrame[] {
  const kinds: EventKind[] = ["Status", "Prompt", "Response", "Verdict", "Anomaly"];
  const frames: EventFrame[] = [];
  for (let seq = 1; seq <= length; seq += 1) {
    const agent = RUNTIME_AGENT_IDS[seq % RUNTIME_AGENT_IDS.length];
    frames.push(frame(seq, agent, kinds[seq % kinds.length], `event ${seq} from ${agent}`));
  }
  return frames;
}
