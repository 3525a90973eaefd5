// DOM rendering. Every render function rebuilds its container from the
// current session state; wiring stays in main.ts.

import type { ApiError, ExplainRequestBody, ExplainResultBody } from "./api.js";
import { buildDiff, predictionBadges } from "./diff.js";
import {
  SessionState,
  SortKey,
  canSubmit,
  fieldError,
  formErrors,
  freeFeatures,
  sortHistory,
} from "./model.js";

export interface FormHandlers {
  onValue(name: string, raw: string): void;
  onToggle(name: string): void;
  onVariant(variant: string): void;
  onTarget(name: string): void;
  onHyper(field: "dEps" | "epsMax" | "marginSteps" | "seed", raw: string): void;
  onSubmit(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderForm(
  container: HTMLElement,
  state: SessionState,
  handlers: FormHandlers,
): void {
  container.textContent = "";
  const errors = formErrors(state);

  for (const feature of state.schema.features) {
    const group = el("div", "feature-group");
    group.dataset.feature = feature.name;

    const label = el("label", "feature-name", feature.name);
    label.htmlFor = `input-${feature.name}`;
    group.appendChild(label);

    if (feature.kind === "categorical") {
      const select = el("select", "feature-input");
      select.id = `input-${feature.name}`;
      for (const cat of feature.categories) {
        const option = el("option", undefined, cat);
        option.value = cat;
        option.selected = state.values[feature.name] === cat;
        select.appendChild(option);
      }
      select.addEventListener("change", () =>
        handlers.onValue(feature.name, select.value),
      );
      group.appendChild(select);
    } else {
      const input = el("input", "feature-input");
      input.id = `input-${feature.name}`;
      input.type = "number";
      input.step = "any";
      if (feature.min !== null) input.min = String(feature.min);
      if (feature.max !== null) input.max = String(feature.max);
      input.value = state.values[feature.name];
      input.addEventListener("input", () =>
        handlers.onValue(feature.name, input.value),
      );
      group.appendChild(input);
    }

    const toggleLabel = el("label", "allow-label");
    const toggle = el("input", "allow-toggle") as HTMLInputElement;
    toggle.type = "checkbox";
    toggle.checked = state.allowChange[feature.name];
    toggle.disabled = !feature.mutable || state.pending;
    toggle.addEventListener("change", () => handlers.onToggle(feature.name));
    toggleLabel.appendChild(toggle);
    toggleLabel.appendChild(
      document.createTextNode(feature.mutable ? " may change" : " locked"),
    );
    if (!feature.mutable) toggleLabel.classList.add("locked");
    group.appendChild(toggleLabel);

    const err = fieldError(state, feature.name);
    if (err) {
      group.appendChild(el("span", "field-error", err));
    }
    container.appendChild(group);
  }

  const controls = el("div", "controls");

  const variant = el("select", "variant-select");
  for (const [value, text] of [
    ["ce1", "direct (any features)"],
    ["ce2", "sparse (one feature)"],
    ["ce3", "constrained (chosen features)"],
  ]) {
    const option = el("option", undefined, text);
    option.value = value;
    option.selected = state.variant === value;
    variant.appendChild(option);
  }
  variant.disabled = state.pending;
  variant.addEventListener("change", () => handlers.onVariant(variant.value));
  controls.appendChild(labelled("strategy", variant));

  if (state.variant === "ce2") {
    const target = el("select", "target-select");
    const mutable = state.schema.features.filter((f) => f.mutable);
    for (const f of mutable) {
      const option = el("option", undefined, f.name);
      option.value = f.name;
      option.selected = state.targetFeature === f.name;
      target.appendChild(option);
    }
    target.disabled = state.pending;
    target.addEventListener("change", () => handlers.onTarget(target.value));
    controls.appendChild(labelled("feature to change", target));
  }

  const hyper: Array<["dEps" | "epsMax" | "marginSteps" | "seed", string, number]> = [
    ["dEps", "step size", state.dEps],
    ["epsMax", "search budget", state.epsMax],
    ["marginSteps", "robustness margin steps", state.marginSteps],
    ["seed", "seed", state.seed],
  ];
  for (const [field, text, value] of hyper) {
    const input = el("input", `hyper-${field}`);
    input.type = "number";
    input.step = "any";
    input.value = String(value);
    input.disabled = state.pending;
    input.addEventListener("input", () => handlers.onHyper(field, input.value));
    controls.appendChild(labelled(text, input));
  }

  const submit = el("button", "submit", state.pending ? "working..." : "explain");
  submit.id = "submit";
  submit.disabled = !canSubmit(state);
  submit.addEventListener("click", () => handlers.onSubmit());
  controls.appendChild(submit);

  if (errors["__variant"]) {
    controls.appendChild(el("span", "field-error variant-error", errors["__variant"]));
  }
  if (state.variant === "ce3") {
    controls.appendChild(
      el("span", "free-list", `free: ${freeFeatures(state).join(", ") || "(none)"}`),
    );
  }
  container.appendChild(controls);
}

function labelled(text: string, control: HTMLElement): HTMLElement {
  const wrap = el("label", "control");
  wrap.appendChild(el("span", "control-name", text));
  wrap.appendChild(control);
  return wrap;
}

export function renderOutcome(
  container: HTMLElement,
  state: SessionState,
  request: ExplainRequestBody,
  outcome:
    | { ok: true; result: ExplainResultBody }
    | { ok: false; status: number; error: ApiError },
): void {
  container.textContent = "";
  if (!outcome.ok) {
    const banner = el("div", "error-banner");
    banner.appendChild(el("strong", undefined, `request rejected (${outcome.status})`));
    banner.appendChild(el("span", "error-message", ` ${outcome.error.message}`));
    if (outcome.error.field) {
      banner.appendChild(el("span", "error-field", ` [field: ${outcome.error.field}]`));
    }
    container.appendChild(banner);
    return;
  }

  const result = outcome.result;
  if (!result.valid) {
    const banner = el("div", "budget-banner");
    banner.textContent =
      `no recourse within budget (searched up to ε = ${request.eps_max})`;
    container.appendChild(banner);
    return;
  }

  const badges = predictionBadges(result);
  const badgeRow = el("div", "badges");
  badgeRow.appendChild(el("span", "badge badge-before", badges.before));
  badgeRow.appendChild(el("span", "badge-arrow", "→"));
  badgeRow.appendChild(el("span", "badge badge-after", badges.after ?? "?"));
  container.appendChild(badgeRow);

  const table = el("table", "diff-table");
  const head = el("tr");
  for (const text of ["feature", "you entered", "counterfactual"]) {
    head.appendChild(el("th", undefined, text));
  }
  table.appendChild(head);
  for (const row of buildDiff(state.schema, request.row, result)) {
    const tr = el("tr", row.changed ? "changed" : undefined);
    tr.dataset.feature = row.feature;
    tr.appendChild(el("td", undefined, row.feature));
    tr.appendChild(el("td", "before", row.before));
    const after = el("td", "after");
    if (row.changed) {
      after.appendChild(el("strong", undefined, row.after));
    } else {
      after.textContent = row.after;
    }
    tr.appendChild(after);
    table.appendChild(tr);
  }
  container.appendChild(table);

  const stats = el("div", "result-stats");
  stats.textContent =
    `changed ${result.sparsity} feature(s), proximity ` +
    `${result.proximity === null ? "-" : result.proximity.toFixed(4)}` +
    `${result.postprocessed ? ", post-processed" : ""}`;
  container.appendChild(stats);
}

export function renderHistory(
  container: HTMLElement,
  state: SessionState,
  sortKey: SortKey,
  ascending: boolean,
  onPick?: (id: number) => void,
): void {
  container.textContent = "";
  if (state.history.length === 0) {
    container.appendChild(
      el("div", "empty-history", "no explanations yet - submit the form to start"),
    );
    return;
  }
  for (const entry of sortHistory(state.history, sortKey, ascending)) {
    const card = el("div", "history-card");
    card.dataset.id = String(entry.id);
    const title = entry.result.valid
      ? `${entry.request.variant}: ${entry.result.changed_features.join(", ")}`
      : `${entry.request.variant}: no recourse`;
    card.appendChild(el("strong", "history-title", title));
    const prox =
      entry.result.proximity === null ? "-" : entry.result.proximity.toFixed(4);
    card.appendChild(
      el(
        "span",
        "history-stats",
        ` sparsity ${entry.result.sparsity}, proximity ${prox}`,
      ),
    );
    if (onPick) {
      card.addEventListener("click", () => onPick(entry.id));
    }
    container.appendChild(card);
  }
}
