"""Report rendering: Markdown and print-ready HTML."""

from __future__ import annotations

import html

from .domain import IntegratedReport, REPORT_SECTIONS, Finding

SECTION_TITLES = {
    "novel_biomarkers": "Potential Novel Biomarkers",
    "implications": "Implications",
    "well_known_interactions": "Well-Known Interactions",
    "conclusions": "Conclusions",
}

EMPTY_SECTION_PLACEHOLDER = "None identified."

_HTML_STYLE = """
body { font-family: Georgia, serif; max-width: 52rem; margin: 2rem auto; padding: 0 1rem; color: #1a1a1a; }
h1 { border-bottom: 2px solid #1a1a1a; padding-bottom: .3rem; }
h2 { margin-top: 1.6rem; }
li { margin: .45rem 0; }
a { color: #0b5394; }
.placeholder { color: #666; font-style: italic; }
@media print { body { margin: 0; max-width: none; } a { color: inherit; } }
""".strip()


def _citation_md(finding: Finding) -> str:
    parts = []
    for ref in finding.citations:
        parts.append(f"[{ref.evidence_id}]({ref.url})" if ref.url else f"[{ref.evidence_id}]")
    return " " + " ".join(parts) if parts else ""


def _citation_html(finding: Finding) -> str:
    parts = []
    for ref in finding.citations:
        label = html.escape(ref.evidence_id)
        if ref.url:
            parts.append(f'<a href="{html.escape(ref.url, quote=True)}">{label}</a>')
        else:
            parts.append(f"<span>[{label}]</span>")
    return " " + " ".join(parts) if parts else ""


def render_report(report: IntegratedReport, fmt: str = "markdown") -> str:
    """Render all four sections in fixed order; byte-stable for equal inputs."""
    if fmt == "markdown":
        lines = [f"# Integrated Evidence Report (version {report.version})", ""]
        for section in REPORT_SECTIONS:
            lines.append(f"## {SECTION_TITLES[section]}")
            lines.append("")
            findings = getattr(report, section)
            if not findings:
                lines.append(f"_{EMPTY_SECTION_PLACEHOLDER}_")
            else:
                for finding in findings:
                    lines.append(f"- {finding.text}{_citation_md(finding)}")
            lines.append("")
        return "\n".join(lines)

    if fmt == "html":
        parts = [
            "<!doctype html>",
            '<html lang="en"><head><meta charset="utf-8">',
            f"<title>Integrated Evidence Report v{report.version}</title>",
            f"<style>{_HTML_STYLE}</style>",
            "</head><body>",
            f"<h1>Integrated Evidence Report <small>(version {report.version})</small></h1>",
        ]
        for section in REPORT_SECTIONS:
            parts.append(f"<h2>{SECTION_TITLES[section]}</h2>")
            findings = getattr(report, section)
            if not findings:
                parts.append(f'<p class="placeholder">{EMPTY_SECTION_PLACEHOLDER}</p>')
            else:
                parts.append("<ul>")
                for finding in findings:
                    parts.append(f"<li>{html.escape(finding.text)}{_citation_html(finding)}</li>")
                parts.append("</ul>")
        parts.append("</body></html>")
        return "\n".join(parts) + "\n"

    raise ValueError(f"unknown report format '{fmt}' (expected 'markdown' or 'html')")
