import { describe, expect, it } from "vitest";

import type { ExplainResultBody } from "../src/api.js";
import {
  buildRequest,
  canSubmit,
  fieldError,
  formErrors,
  formStateFromRequest,
  freeFeatures,
  newSession,
  recordHistory,
  setValue,
  sortHistory,
  toggleAllow,
} from "../src/model.js";
import { schemaFixture } from "./helpers.js";

function session() {
  return newSession(schemaFixture());
}

function fakeResult(overrides: Partial<ExplainResultBody>): ExplainResultBody {
  return {
    version: 1,
    valid: true,
    counterfactual: {},
    steps_taken: 1,
    eps_at_validity: 0.1,
    changed_features: [],
    proximity: 1.0,
    sparsity: 1,
    postprocessed: false,
    diagnostics: {},
    error: null,
    elapsed_us: 10,
    ...overrides,
  };
}

describe("session defaults", () => {
  it("fills every feature with a schema-valid value", () => {
    const state = session();
    expect(Object.keys(formErrors(state))).toEqual([]);
    expect(state.values["grp"]).toBe("a");
  });

  it("locks immutable features out of the free set", () => {
    const state = session();
    expect(state.allowChange["grp"]).toBe(false);
    expect(freeFeatures(state)).toEqual(["f1", "f2"]);
  });

  it("takes hyperparameter defaults from the schema summary", () => {
    const state = session();
    expect(state.dEps).toBe(0.1);
    expect(state.epsMax).toBe(10.0);
  });
});

describe("permission toggles", () => {
  it("toggling an immutable feature is a refused no-op", () => {
    const state = session();
    expect(toggleAllow(state, "grp")).toBe(false);
    expect(state.allowChange["grp"]).toBe(false);
    expect(freeFeatures(state)).not.toContain("grp");
  });

  it("mutable features toggle freely", () => {
    const state = session();
    expect(toggleAllow(state, "f2")).toBe(true);
    expect(freeFeatures(state)).toEqual(["f1"]);
    toggleAllow(state, "f2");
    expect(freeFeatures(state)).toEqual(["f1", "f2"]);
  });

  it("immutable features are excluded from the emitted free set", () => {
    const state = session();
    state.variant = "ce3";
    const body = buildRequest(state);
    expect(body.free).toEqual(["f1", "f2"]);
    expect(body.free).not.toContain("grp");
  });
});

describe("form validation", () => {
  it("out-of-range numbers block submission with a message", () => {
    const state = session();
    setValue(state, "f1", "99");
    expect(fieldError(state, "f1")).toMatch(/at most/);
    expect(canSubmit(state)).toBe(false);
  });

  it("non-numeric input blocks submission", () => {
    const state = session();
    setValue(state, "f1", "banana");
    expect(fieldError(state, "f1")).toMatch(/number/);
    expect(canSubmit(state)).toBe(false);
  });

  it("ce2 requires a target feature", () => {
    const state = session();
    state.variant = "ce2";
    expect(formErrors(state)["__variant"]).toMatch(/pick a feature/);
    state.targetFeature = "f1";
    expect(canSubmit(state)).toBe(true);
  });

  it("ce3 with nothing allowed to change blocks submission", () => {
    const state = session();
    state.variant = "ce3";
    toggleAllow(state, "f1");
    toggleAllow(state, "f2");
    expect(formErrors(state)["__variant"]).toMatch(/at least one/);
  });

  it("pending blocks submission", () => {
    const state = session();
    state.pending = true;
    expect(canSubmit(state)).toBe(false);
  });
});

describe("request serialization", () => {
  it("round-trips the form state through the wire body", () => {
    const state = session();
    setValue(state, "f1", "0.42");
    setValue(state, "grp", "b");
    const body = buildRequest(state);
    const back = formStateFromRequest(state.schema, body);
    expect(back).toEqual(state.values);
  });

  it("continuous values are sent as numbers, categories as strings", () => {
    const state = session();
    const body = buildRequest(state);
    expect(typeof body.row["f1"]).toBe("number");
    expect(typeof body.row["grp"]).toBe("string");
  });

  it("carries the hyperparameters", () => {
    const state = session();
    state.dEps = 0.3;
    state.marginSteps = 2;
    const body = buildRequest(state);
    expect(body.d_eps).toBe(0.3);
    expect(body.margin_steps).toBe(2);
  });
});

describe("history", () => {
  it("is append-only and sortable with stable ties", () => {
    const state = session();
    const req = buildRequest(state);
    recordHistory(state, req, fakeResult({ proximity: 2.0, sparsity: 2 }));
    recordHistory(state, req, fakeResult({ proximity: 1.0, sparsity: 1 }));
    recordHistory(state, req, fakeResult({ proximity: 1.0, sparsity: 3 }));
    expect(state.history.length).toBe(3);

    const byProximity = sortHistory(state.history, "proximity");
    expect(byProximity.map((e) => e.result.proximity)).toEqual([1.0, 1.0, 2.0]);
    // tie between the two proximity-1.0 entries keeps insertion order
    expect(byProximity[0].id).toBeLessThan(byProximity[1].id);

    const bySparsity = sortHistory(state.history, "sparsity", false);
    expect(bySparsity.map((e) => e.result.sparsity)).toEqual([3, 2, 1]);
  });

  it("invalid results sort to the end on proximity", () => {
    const state = session();
    const req = buildRequest(state);
    recordHistory(state, req, fakeResult({ proximity: null, valid: false }));
    recordHistory(state, req, fakeResult({ proximity: 0.5 }));
    const sorted = sortHistory(state.history, "proximity");
    expect(sorted[0].result.proximity).toBe(0.5);
  });
});
