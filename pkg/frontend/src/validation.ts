/**
 * Client-side submission validation.
 *
 * Mirrors the server's ValidationFailed rules field for field, so every
 * rejection the server would produce is caught before a request is sent.
 */

export interface RunFormData {
  question: string;
  context: string;
  genes: string;
  scenario: string;
  sourceMode: string;
  maxIterations: string;
  tokenCeiling: string;
}

export const KNOWN_SCENARIOS = ["s1", "s2", "s3", "s4"] as const;

const SYMBOL_RE = /^[A-Z0-9-]+$/;

export interface GeneParseResult {
  genes: string[];
  error: string | null;
}

/** Trim, uppercase, de-duplicate; same normalization as the server. */
export function parseGeneList(raw: string): GeneParseResult {
  const genes: string[] = [];
  const seen = new Set<string>();
  for (const token of raw.split(/[\s,]+/)) {
    if (!token) continue;
    const upper = token.toUpperCase();
    if (!SYMBOL_RE.test(upper)) {
      return { genes: [], error: `invalid gene symbol: '${token}'` };
    }
    if (!seen.has(upper)) {
      seen.add(upper);
      genes.push(upper);
    }
  }
  if (genes.length === 0) {
    return { genes: [], error: "no valid gene symbols found" };
  }
  return { genes, error: null };
}

/** Field-level errors, empty object when the form may be submitted. */
export function validateForm(form: RunFormData): Record<string, string> {
  const fields: Record<string, string> = {};

  if (!form.question.trim()) {
    fields.question = "a non-empty research question is required";
  }

  const scenario = form.scenario.trim();
  if (scenario && !(KNOWN_SCENARIOS as readonly string[]).includes(scenario)) {
    fields.scenario = `unknown scenario '${scenario}'`;
  }

  if (form.genes.trim()) {
    const parsed = parseGeneList(form.genes);
    if (parsed.error) {
      fields.genes = parsed.error;
    }
  } else if (!scenario || fields.scenario) {
    fields.genes = "provide a gene list or a scenario name";
  }

  if (form.sourceMode && form.sourceMode !== "fixture" && form.sourceMode !== "live") {
    fields.source_mode = `source_mode must be 'fixture' or 'live', got '${form.sourceMode}'`;
  }

  if (form.maxIterations.trim()) {
    const n = Number(form.maxIterations);
    if (!Number.isInteger(n) || n < 1) {
      fields.max_iterations = "max_iterations must be >= 1";
    }
  }

  if (form.tokenCeiling.trim()) {
    const n = Number(form.tokenCeiling);
    if (!Number.isInteger(n) || n < 1) {
      fields.token_ceiling = "token_ceiling must be >= 1";
    }
  }

  return fields;
}

export interface UploadDocument {
  context: string;
  question: string;
  genes: string[];
}

export interface UploadParseResult {
  document: UploadDocument | null;
  error: string | null;
}

/** Parse an uploaded {context, question, genes} JSON document. */
export function parseUpload(text: string): UploadParseResult {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    return { document: null, error: `uploaded document is not valid JSON: ${String(err)}` };
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    return { document: null, error: "uploaded document must be a JSON object" };
  }
  const doc = raw as Record<string, unknown>;
  const question = doc.question;
  if (typeof question !== "string" || !question.trim()) {
    return { document: null, error: "uploaded document must carry a non-empty 'question' string" };
  }
  const context = doc.context ?? "";
  if (typeof context !== "string") {
    return { document: null, error: "'context' must be a string when present" };
  }
  let genes = doc.genes;
  if (typeof genes === "string") {
    genes = genes.split(/[\s,]+/).filter(Boolean);
  }
  if (!Array.isArray(genes) || !genes.every((g) => typeof g === "string")) {
    return { document: null, error: "uploaded document must carry 'genes' as a list or string" };
  }
  return { document: { context, question, genes: genes as string[] }, error: null };
}
