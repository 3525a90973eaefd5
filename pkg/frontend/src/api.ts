// Typed client for the explanation service JSON API.

export interface FeatureSummary {
  name: string;
  kind: "continuous" | "categorical";
  categories: string[];
  min: number | null;
  max: number | null;
  mutable: boolean;
}

export interface SchemaSummary {
  target_name: string;
  target_labels: string[];
  features: FeatureSummary[];
  defaults: { d_eps: number; eps_max: number; margin_steps: number };
}

export type Variant = "ce1" | "ce2" | "ce3";

export interface ExplainRequestBody {
  row: Record<string, string | number>;
  variant: Variant;
  feature?: string;
  free?: string[];
  d_eps?: number;
  eps_max?: number;
  margin_steps?: number;
  seed?: number;
}

export interface ExplainResultBody {
  version: number;
  valid: boolean;
  counterfactual: Record<string, string | number> | null;
  steps_taken: number;
  eps_at_validity: number | null;
  changed_features: string[];
  proximity: number | null;
  sparsity: number;
  postprocessed: boolean;
  diagnostics: Record<string, unknown>;
  error: string | null;
  elapsed_us: number;
}

export interface ApiError {
  code: string;
  message: string;
  field?: string;
}

export type ExplainOutcome =
  | { ok: true; result: ExplainResultBody }
  | { ok: false; status: number; error: ApiError };

export async function fetchSchema(base = ""): Promise<SchemaSummary> {
  const resp = await fetch(`${base}/v1/schema`);
  if (!resp.ok) {
    const err = (await resp.json()) as ApiError;
    throw new Error(`${err.code}: ${err.message}`);
  }
  return (await resp.json()) as SchemaSummary;
}

export async function postExplain(
  body: ExplainRequestBody,
  base = "",
): Promise<ExplainOutcome> {
  const resp = await fetch(`${base}/v1/explain`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
  if (resp.ok) {
    return { ok: true, result: (await resp.json()) as ExplainResultBody };
  }
  return { ok: false, status: resp.status, error: (await resp.json()) as ApiError };
}
