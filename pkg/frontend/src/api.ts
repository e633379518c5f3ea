/** Thin REST client for the service API. */

import type { Metrics, Report, RunAccepted, RunStatus, ValidationFailed } from "./types.js";

export interface SubmitBody {
  question: string;
  context: string;
  genes: string | string[] | null;
  scenario: string | null;
  source_mode: string | null;
  max_iterations: number | null;
  token_ceiling: number | null;
}

export type SubmitResult =
  | { ok: true; accepted: RunAccepted }
  | { ok: false; fields: Record<string, string> };

export async function submitRun(body: SubmitBody, baseUrl = ""): Promise<SubmitResult> {
  const response = await fetch(`${baseUrl}/runs`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  if (response.status === 422) {
    const failure = (await response.json()) as ValidationFailed;
    return { ok: false, fields: failure.fields ?? { request: "rejected" } };
  }
  if (!response.ok) {
    return { ok: false, fields: { request: `server returned ${response.status}` } };
  }
  return { ok: true, accepted: (await response.json()) as RunAccepted };
}

export async function getStatus(runId: string, baseUrl = ""): Promise<RunStatus> {
  const response = await fetch(`${baseUrl}/runs/${runId}/status`);
  if (!response.ok) throw new Error(`status returned ${response.status}`);
  return (await response.json()) as RunStatus;
}

export async function getMetrics(runId: string, baseUrl = ""): Promise<Metrics> {
  const response = await fetch(`${baseUrl}/runs/${runId}/metrics`);
  if (!response.ok) throw new Error(`metrics returned ${response.status}`);
  return (await response.json()) as Metrics;
}

export async function getReport(runId: string, baseUrl = ""): Promise<Report | null> {
  const response = await fetch(`${baseUrl}/runs/${runId}/report.json`);
  if (response.status === 409) return null;
  if (!response.ok) throw new Error(`report returned ${response.status}`);
  return (await response.json()) as Report;
}

export async function getReportText(
  runId: string,
  format: "md" | "json",
  baseUrl = "",
): Promise<string> {
  const response = await fetch(`${baseUrl}/runs/${runId}/report.${format}`);
  if (!response.ok) throw new Error(`report.${format} returned ${response.status}`);
  return response.text();
}
