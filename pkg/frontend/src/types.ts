/** Wire types mirrored from the service API. */

export interface TokenUsage {
  prompt: number;
  completion: number;
}

export type EventKind = "Prompt" | "Response" | "Verdict" | "Status" | "Anomaly";

export interface EventFrame {
  run_id: string;
  seq: number;
  timestamp: number;
  agent_id: string;
  kind: EventKind;
  payload: string;
  token_usage: TokenUsage | null;
  channel: string;
}

export interface RunAccepted {
  run_id: string;
  status_url: string;
  events_url: string;
  report_url: string;
  metrics_url: string;
}

export interface RunStatus {
  run_id: string;
  state: string;
  terminal: boolean;
  iterations: Record<string, number>;
  report_version: number | null;
}

export interface Metrics {
  run_id: string;
  total_prompt_tokens: number;
  total_completion_tokens: number;
  wall_time: number;
  cost: number;
  genes_analyzed: number;
  iterations: Record<string, number>;
}

export interface CitationRef {
  evidence_id: string;
  url: string | null;
}

export interface Finding {
  text: string;
  citations: CitationRef[];
}

export interface Report {
  version: number;
  novel_biomarkers: Finding[];
  implications: Finding[];
  well_known_interactions: Finding[];
  conclusions: Finding[];
}

export interface ValidationFailed {
  error: "ValidationFailed";
  fields: Record<string, string>;
}
