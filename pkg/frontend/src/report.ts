/** Report view: section rendering, download links, print-to-PDF. */

import type { Finding, Report } from "./types.js";

export const SECTION_ORDER: Array<[keyof Report & string, string]> = [
  ["novel_biomarkers", "Potential Novel Biomarkers"],
  ["implications", "Implications"],
  ["well_known_interactions", "Well-Known Interactions"],
  ["conclusions", "Conclusions"],
];

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function citationsHtml(finding: Finding): string {
  if (!finding.citations.length) return "";
  const links = finding.citations.map((ref) =>
    ref.url
      ? `<a href="${escapeHtml(ref.url)}" target="_blank" rel="noopener">${escapeHtml(ref.evidence_id)}</a>`
      : `<span class="cite">[${escapeHtml(ref.evidence_id)}]</span>`,
  );
  return ` <span class="citations">${links.join(" ")}</span>`;
}

/** HTML for the four report sections; pure so it is unit-testable. */
export function reportHtml(report: Report, state: string): string {
  const parts: string[] = [];
  if (state === "ExhaustedIterations") {
    parts.push(
      '<div class="banner warn">Iteration limit reached: this is the last draft, not a unanimously approved report.</div>',
    );
  }
  parts.push(`<h2>Integrated Evidence Report <small>version ${report.version}</small></h2>`);
  for (const [key, title] of SECTION_ORDER) {
    parts.push(`<h3>${title}</h3>`);
    const findings = report[key] as Finding[];
    if (!findings.length) {
      parts.push('<p class="placeholder">None identified.</p>');
    } else {
      parts.push("<ul>");
      for (const finding of findings) {
        parts.push(`<li>${escapeHtml(finding.text)}${citationsHtml(finding)}</li>`);
      }
      parts.push("</ul>");
    }
  }
  return parts.join("\n");
}

/** Trigger a browser download of a text blob. */
export function downloadText(filename: string, text: string, mime = "text/plain"): void {
  const blob = new Blob([text], { type: mime });
  const url = URL.createObjectURL(blob);
  const anchor = document.createElement("a");
  anchor.href = url;
  anchor.download = filename;
  anchor.click();
  URL.revokeObjectURL(url);
}
