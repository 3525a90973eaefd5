// Before/after diff rows for the result table. Which features count as
// changed comes from the server's changed_features list, never from a
// client-side comparison.

import type { ExplainResultBody, FeatureSummary, SchemaSummary } from "./api.js";

export interface DiffRow {
  feature: string;
  before: string;
  after: string;
  changed: boolean;
}

export function formatValue(feature: FeatureSummary, value: string | number): string {
  if (feature.kind === "categorical") return String(value);
  const n = Number(value);
  if (Number.isInteger(n)) return String(n);
  return n.toFixed(4);
}

export function buildDiff(
  schema: SchemaSummary,
  input: Record<string, string | number>,
  result: ExplainResultBody,
): DiffRow[] {
  const changed = new Set(result.changed_features);
  return schema.features.map((f) => ({
    feature: f.name,
    before: formatValue(f, input[f.name]),
    after:
      result.counterfactual === null
        ? "-"
        : formatValue(f, result.counterfactual[f.name]),
    changed: changed.has(f.name),
  }));
}

export function predictionBadges(result: ExplainResultBody): {
  before: string;
  after: string | null;
} {
  const diag = result.diagnostics as { input_label?: string; output_label?: string };
  return {
    before: diag.input_label ?? "?",
    after: result.valid ? diag.output_label ?? "?" : null,
  };
}
