/**
 * The seven agent terminals, mirroring the server's channel partition.
 * Frames tagged with an unknown channel land in the hidden diagnostics
 * pane; nothing is ever dropped silently.
 */

export const CHANNELS = [
  "civic",
  "pharmgkb",
  "enrichment",
  "composer",
  "content_validator",
  "critical_reviewer",
  "relevance_validator",
] as const;

export type Channel = (typeof CHANNELS)[number];

export const DIAGNOSTICS = "diagnostics";

export const CHANNEL_TITLES: Record<Channel, string> = {
  civic: "CIViC pipeline",
  pharmgkb: "PharmGKB pipeline",
  enrichment: "Enrichment pipeline",
  composer: "Report composer",
  content_validator: "Content validator",
  critical_reviewer: "Critical reviewer",
  relevance_validator: "Relevance validator",
};

const REVIEWERS = new Set(["content_validator", "critical_reviewer", "relevance_validator"]);

/** Map an agent id to its terminal channel; null for unknown ids. */
export function channelFor(agentId: string): Channel | null {
  const dot = agentId.indexOf(".");
  const prefix = dot < 0 ? agentId : agentId.slice(0, dot);
  const rest = dot < 0 ? "" : agentId.slice(dot + 1);
  if (prefix === "civic" || prefix === "pharmgkb" || prefix === "enrichment") {
    return prefix;
  }
  if (prefix === "integration") {
    return REVIEWERS.has(rest) ? (rest as Channel) : "composer";
  }
  if (prefix === "run") {
    return "composer";
  }
  return null;
}

export function isChannel(value: string): value is Channel {
  return (CHANNELS as readonly string[]).includes(value);
}
