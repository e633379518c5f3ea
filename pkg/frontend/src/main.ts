/**
 * Operator console: compose a run, watch the seven agent terminals stream
 * live, follow metrics, and read or download the final report.
 *
 * The console is read-only observability apart from run submission; once a
 * run is launched nothing here can change its course.
 */

import { getMetrics, getReport, getReportText, getStatus, submitRun } from "./api.js";
import { CHANNELS, CHANNEL_TITLES, DIAGNOSTICS } from "./channels.js";
import { PaneSet } from "./panes.js";
import { downloadText, reportHtml } from "./report.js";
import { connectRunEvents, type StreamConnection } from "./sse.js";
import type { EventFrame } from "./types.js";
import { parseUpload, validateForm, type RunFormData } from "./validation.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

let paneSet = new PaneSet();
const paneBodies = new Map<string, HTMLElement>();
let connection: StreamConnection | null = null;
let pollTimer: number | null = null;
let currentRunId: string | null = null;

function formData(): RunFormData {
  return {
    question: ($("question") as HTMLTextAreaElement).value,
    context: ($("context") as HTMLTextAreaElement).value,
    genes: ($("genes") as HTMLTextAreaElement).value,
    scenario: ($("scenario") as HTMLSelectElement).value,
    sourceMode: ($("source-mode") as HTMLSelectElement).value,
    maxIterations: ($("max-iterations") as HTMLInputElement).value,
    tokenCeiling: ($("token-ceiling") as HTMLInputElement).value,
  };
}

function showFieldErrors(fields: Record<string, string>): void {
  for (const el of document.querySelectorAll<HTMLElement>(".field-error")) {
    el.textContent = "";
  }
  for (const [field, message] of Object.entries(fields)) {
    const slot = document.getElementById(`error-${field}`);
    if (slot) slot.textContent = message;
    else $("error-request").textContent = `${field}: ${message}`;
  }
}

function frameLine(frame: EventFrame): HTMLElement {
  const line = document.createElement("div");
  line.className = `event kind-${frame.kind.toLowerCase()}`;
  if (frame.kind === "Verdict") {
    line.classList.add(frame.payload.trimStart().toUpperCase().startsWith("NOT APPROVED") ? "rejected" : "approved");
  }
  const head = document.createElement("span");
  head.className = "event-head";
  head.textContent = `#${frame.seq} ${frame.kind} · ${frame.agent_id}`;
  const body = document.createElement("pre");
  body.textContent = frame.payload;
  line.append(head, body);
  return line;
}

function renderFrame(frame: EventFrame): void {
  const { pane, inserted } = paneSet.add(frame);
  if (!inserted || pane.paused) return;
  const host = paneBodies.get(pane.channel);
  if (!host) return;
  host.appendChild(frameLine(frame));
  host.scrollTop = host.scrollHeight;
  if (pane.channel === DIAGNOSTICS) {
    $("diagnostics-wrap").classList.remove("hidden");
  }
}

function repaintPane(channel: string): void {
  const host = paneBodies.get(channel);
  if (!host) return;
  host.innerHTML = "";
  for (const frame of paneSet.pane(channel).events) host.appendChild(frameLine(frame));
  host.scrollTop = host.scrollHeight;
}

function buildPanes(): void {
  const grid = $("terminals");
  grid.innerHTML = "";
  for (const channel of CHANNELS) {
    const card = document.createElement("section");
    card.className = "pane";
    const header = document.createElement("header");
    const title = document.createElement("span");
    title.textContent = CHANNEL_TITLES[channel];
    const toggle = document.createElement("button");
    toggle.textContent = "pause";
    toggle.addEventListener("click", () => {
      const pane = paneSet.pane(channel);
      pane.paused = !pane.paused;
      toggle.textContent = pane.paused ? "resume" : "pause";
      if (!pane.paused) repaintPane(channel);
    });
    header.append(title, toggle);
    const body = document.createElement("div");
    body.className = "pane-body";
    card.append(header, body);
    grid.appendChild(card);
    paneBodies.set(channel, body);
  }
  paneBodies.set(DIAGNOSTICS, $("diagnostics"));
}

async function refreshStatus(runId: string): Promise<void> {
  try {
    const [status, metrics] = await Promise.all([getStatus(runId), getMetrics(runId)]);
    $("run-state").textContent = status.state;
    const iterations = Object.entries(status.iterations)
      .map(([name, count]) => `${name}: ${count}`)
      .join(" · ");
    $("metrics").textContent =
      `genes ${metrics.genes_analyzed} · tokens ${metrics.total_prompt_tokens}+${metrics.total_completion_tokens} ` +
      `· cost ${metrics.cost.toFixed(4)} · elapsed ${metrics.wall_time.toFixed(1)}s · iterations ${iterations}`;
  } catch {
    // transient; next poll retries
  }
}

async function showReport(runId: string, state: string): Promise<void> {
  const report = await getReport(runId);
  const view = $("report");
  if (!report) {
    view.innerHTML = '<p class="placeholder">No report was produced by this run.</p>';
    return;
  }
  view.innerHTML = reportHtml(report, state);
  $("report-actions").classList.remove("hidden");
  $("download-json").onclick = async () =>
    downloadText(`${runId}-report.json`, await getReportText(runId, "json"), "application/json");
  $("download-md").onclick = async () =>
    downloadText(`${runId}-report.md`, await getReportText(runId, "md"), "text/markdown");
  $("print-report").onclick = () => window.print();
}

function watchRun(runId: string): void {
  currentRunId = runId;
  paneSet = new PaneSet(); // fresh buffers: seqs restart at 1 for every run
  $("run-view").classList.add("active");
  $("run-id").textContent = runId;
  $("diagnostics-wrap").classList.add("hidden");
  $("report-actions").classList.add("hidden");
  $("report").innerHTML =
    '<p class="placeholder">The final report appears here when the run completes.</p>';
  buildPanes();
  connection?.stop();
  connection = connectRunEvents(runId, {
    onEvent: renderFrame,
    onEnd: (state) => {
      $("run-state").textContent = state;
      if (pollTimer !== null) window.clearInterval(pollTimer);
      void refreshStatus(runId);
      void showReport(runId, state);
    },
    onStatusChange: (connected) => {
      $("stream-state").textContent = connected ? "live" : "reconnecting…";
    },
  });
  if (pollTimer !== null) window.clearInterval(pollTimer);
  pollTimer = window.setInterval(() => void refreshStatus(runId), 1000);
}

async function onSubmit(event: Event): Promise<void> {
  event.preventDefault();
  const form = formData();
  const errors = validateForm(form);
  showFieldErrors(errors);
  if (Object.keys(errors).length > 0) return;

  const result = await submitRun({
    question: form.question,
    context: form.context,
    genes: form.genes.trim() ? form.genes : null,
    scenario: form.scenario || null,
    source_mode: form.sourceMode || null,
    max_iterations: form.maxIterations ? Number(form.maxIterations) : null,
    token_ceiling: form.tokenCeiling ? Number(form.tokenCeiling) : null,
  });
  if (!result.ok) {
    showFieldErrors(result.fields);
    return;
  }
  watchRun(result.accepted.run_id);
}

function onUpload(event: Event): void {
  const input = event.target as HTMLInputElement;
  const file = input.files?.[0];
  if (!file) return;
  void file.text().then((text) => {
    const { document: doc, error } = parseUpload(text);
    if (error) {
      showFieldErrors({ upload: error });
      return;
    }
    showFieldErrors({});
    ($("question") as HTMLTextAreaElement).value = doc!.question;
    ($("context") as HTMLTextAreaElement).value = doc!.context;
    ($("genes") as HTMLTextAreaElement).value = doc!.genes.join(", ");
  });
}

export function boot(): void {
  $("run-form").addEventListener("submit", (e) => void onSubmit(e));
  $("upload").addEventListener("change", onUpload);
}

if (typeof document !== "undefined" && document.getElementById("run-form")) {
  boot();
}

export { currentRunId, paneSet };
