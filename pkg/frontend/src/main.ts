// Application wiring: one session, one in-flight request at a time.

import { fetchSchema, postExplain } from "./api.js";
import {
  SessionState,
  SortKey,
  buildRequest,
  canSubmit,
  newSession,
  recordHistory,
  setValue,
  toggleAllow,
} from "./model.js";
import { renderForm, renderHistory, renderOutcome } from "./render.js";

interface Page {
  form: HTMLElement;
  outcome: HTMLElement;
  history: HTMLElement;
  sortControls: HTMLElement;
}

export async function boot(root: HTMLElement, base = ""): Promise<SessionState> {
  root.textContent = "";
  const page: Page = {
    form: section(root, "form-panel"),
    outcome: section(root, "outcome-panel"),
    history: section(root, "history-panel"),
    sortControls: section(root, "sort-panel"),
  };
  const schema = await fetchSchema(base);
  const state = newSession(schema);
  let sortKey: SortKey = "proximity";
  let ascending = true;

  const rerender = () => {
    renderForm(page.form, state, handlers);
    renderSort();
    renderHistory(page.history, state, sortKey, ascending);
  };

  const renderSort = () => {
    page.sortControls.textContent = "";
    for (const key of ["proximity", "sparsity"] as const) {
      const button = document.createElement("button");
      button.className = `sort-${key}`;
      button.textContent =
        key === sortKey ? `sort: ${key} ${ascending ? "↑" : "↓"}` : `sort: ${key}`;
      button.addEventListener("click", () => {
        if (sortKey === key) {
          ascending = !ascending;
        } else {
          sortKey = key;
          ascending = true;
        }
        rerender();
      });
      page.sortControls.appendChild(button);
    }
  };

  const handlers = {
    onValue(name: string, raw: string) {
      setValue(state, name, raw);
      rerender();
    },
    onToggle(name: string) {
      toggleAllow(state, name);
      rerender();
    },
    onVariant(variant: string) {
      state.variant = variant as SessionState["variant"];
      if (state.variant === "ce2" && !state.targetFeature) {
        state.targetFeature =
          state.schema.features.find((f) => f.mutable)?.name ?? null;
      }
      rerender();
    },
    onTarget(name: string) {
      state.targetFeature = name;
      rerender();
    },
    onHyper(field: "dEps" | "epsMax" | "marginSteps" | "seed", raw: string) {
      const value = Number(raw);
      if (!Number.isNaN(value)) {
        if (field === "marginSteps" || field === "seed") {
          state[field] = Math.trunc(value);
        } else {
          state[field] = value;
        }
      }
      rerender();
    },
    async onSubmit() {
      if (!canSubmit(state)) return;
      const request = buildRequest(state);
      state.pending = true; // controls stay disabled until the reply lands
      rerender();
      try {
        const outcome = await postExplain(request, base);
        if (outcome.ok) {
          recordHistory(state, request, outcome.result);
        }
        renderOutcome(page.outcome, state, request, outcome);
      } finally {
        state.pending = false;
        rerender();
      }
    },
  };

  rerender();
  return state;
}

function section(root: HTMLElement, className: string): HTMLElement {
  const node = document.createElement("section");
  node.className = className;
  root.appendChild(node);
  return node;
}

declare global {
  interface Window {
    __recourseExplorerBooted?: Promise<SessionState>;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  window.__recourseExplorerBooted = boot(document.getElementById("app")!);
}
