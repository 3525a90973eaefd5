// Session state and pure form/request logic. The UI never decides
// validity or which features changed - those always come back from the
// server - so everything here is bookkeeping around the request body.

import type {
  ExplainRequestBody,
  ExplainResultBody,
  FeatureSummary,
  SchemaSummary,
  Variant,
} from "./api.js";

export interface HistoryEntry {
  id: number;
  request: ExplainRequestBody;
  result: ExplainResultBody;
}

export interface SessionState {
  schema: SchemaSummary;
  values: Record<string, string>;
  allowChange: Record<string, boolean>;
  variant: Variant;
  targetFeature: string | null;
  dEps: number;
  epsMax: number;
  marginSteps: number;
  seed: number;
  pending: boolean;
  history: HistoryEntry[];
}

export function defaultValue(feature: FeatureSummary): string {
  if (feature.kind === "categorical") {
    return feature.categories[0] ?? "";
  }
  const lo = feature.min ?? 0;
  const hi = feature.max ?? 1;
  return String((lo + hi) / 2);
}

export function newSession(schema: SchemaSummary): SessionState {
  const values: Record<string, string> = {};
  const allowChange: Record<string, boolean> = {};
  for (const f of schema.features) {
    values[f.name] = defaultValue(f);
    allowChange[f.name] = f.mutable; // immutable features stay locked off
  }
  return {
    schema,
    values,
    allowChange,
    variant: "ce1",
    targetFeature: null,
    dEps: schema.defaults.d_eps,
    epsMax: schema.defaults.eps_max,
    marginSteps: schema.defaults.margin_steps,
    seed: 0,
    pending: false,
    history: [],
  };
}

export function setValue(state: SessionState, name: string, raw: string): void {
  state.values[name] = raw;
}

export function toggleAllow(state: SessionState, name: string): boolean {
  const feature = state.schema.features.find((f) => f.name === name);
  if (!feature || !feature.mutable) {
    return false; // locked: immutable features can never be freed
  }
  state.allowChange[name] = !state.allowChange[name];
  return true;
}

export function freeFeatures(state: SessionState): string[] {
  return state.schema.features
    .filter((f) => f.mutable && state.allowChange[f.name])
    .map((f) => f.name);
}

export function fieldError(state: SessionState, name: string): string | null {
  const feature = state.schema.features.find((f) => f.name === name);
  if (!feature) return `unknown feature ${name}`;
  const raw = state.values[name] ?? "";
  if (feature.kind === "categorical") {
    return feature.categories.includes(raw) ? null : `choose one of: ${feature.categories.join(", ")}`;
  }
  const value = Number(raw);
  if (raw.trim() === "" || Number.isNaN(value)) {
    return "enter a number";
  }
  if (feature.min !== null && value < feature.min) {
    return `must be at least ${feature.min}`;
  }
  if (feature.max !== null && value > feature.max) {
    return `must be at most ${feature.max}`;
  }
  return null;
}

export function formErrors(state: SessionState): Record<string, string> {
  const errors: Record<string, string> = {};
  for (const f of state.schema.features) {
    const err = fieldError(state, f.name);
    if (err) errors[f.name] = err;
  }
  if (state.variant === "ce2" && !state.targetFeature) {
    errors["__variant"] = "pick a feature to change";
  }
  if (state.variant === "ce3" && freeFeatures(state).length === 0) {
    errors["__variant"] = "allow at least one feature to change";
  }
  return errors;
}

export function canSubmit(state: SessionState): boolean {
  return !state.pending && Object.keys(formErrors(state)).length === 0;
}

export function buildRequest(state: SessionState): ExplainRequestBody {
  const row: Record<string, string | number> = {};
  for (const f of state.schema.features) {
    row[f.name] =
      f.kind === "continuous" ? Number(state.values[f.name]) : state.values[f.name];
  }
  const body: ExplainRequestBody = {
    row,
    variant: state.variant,
    d_eps: state.dEps,
    eps_max: state.epsMax,
    margin_steps: state.marginSteps,
    seed: state.seed,
  };
  if (state.variant === "ce2" && state.targetFeature) {
    body.feature = state.targetFeature;
  }
  if (state.variant === "ce3") {
    body.free = freeFeatures(state);
  }
  return body;
}

// Round-trip counterpart of buildRequest: reading a sent body back must
// reproduce the form state it came from.
export function formStateFromRequest(
  schema: SchemaSummary,
  body: ExplainRequestBody,
): Record<string, string> {
  const values: Record<string, string> = {};
  for (const f of schema.features) {
    const v = body.row[f.name];
    values[f.name] = typeof v === "number" ? String(v) : v;
  }
  return values;
}

export type SortKey = "proximity" | "sparsity";

export function sortHistory(
  entries: HistoryEntry[],
  key: SortKey,
  ascending = true,
): HistoryEntry[] {
  const direction = ascending ? 1 : -1;
  return entries
    .slice()
    .sort((a, b) => {
      const va = a.result[key];
      const vb = b.result[key];
      const na = va === null ? Number.POSITIVE_INFINITY : (va as number);
      const nb = vb === null ? Number.POSITIVE_INFINITY : (vb as number);
      if (na === nb) return a.id - b.id; // stable on ties
      return (na - nb) * direction;
    });
}

let nextId = 1;

export function recordHistory(
  state: SessionState,
  request: ExplainRequestBody,
  result: ExplainResultBody,
): HistoryEntry {
  const entry = { id: nextId++, request, result };
  state.history.push(entry); // append-only within a session
  return entry;
}
