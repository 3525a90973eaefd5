// Shared fixture loading and fetch stubbing for the UI tests. The
// fixture payloads are captured from the real service by
// scripts/capture_fixtures.py, so every mocked response body is a real
// server response.

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { vi } from "vitest";

import type { ExplainRequestBody, SchemaSummary } from "../src/api.js";

const here = dirname(fileURLToPath(import.meta.url));

export function fixture<T = unknown>(name: string): T {
  return JSON.parse(readFileSync(join(here, "fixtures", name), "utf-8")) as T;
}

export interface CapturedCase {
  request: ExplainRequestBody;
  status: number;
  response: unknown;
}

export const schemaFixture = (): SchemaSummary => fixture<SchemaSummary>("schema.json");

export interface FetchStub {
  calls: Array<{ url: string; body: unknown }>;
  respondWith(status: number, body: unknown): void;
  hold(): () => void; // returns the release function
}

export function stubFetch(schema: SchemaSummary): FetchStub {
  const calls: FetchStub["calls"] = [];
  let nextStatus = 200;
  let nextBody: unknown = null;
  let gate: Promise<void> | null = null;
  let release: (() => void) | null = null;

  const impl = async (url: string | URL | Request, init?: RequestInit) => {
    const target = String(url);
    if (target.endsWith("/v1/schema")) {
      return jsonResponse(200, schema);
    }
    const body = init?.body ? JSON.parse(String(init.body)) : null;
    calls.push({ url: target, body });
    if (gate) {
      await gate;
    }
    return jsonResponse(nextStatus, nextBody);
  };
  vi.stubGlobal("fetch", vi.fn(impl));

  return {
    calls,
    respondWith(status, body) {
      nextStatus = status;
      nextBody = body;
    },
    hold() {
      gate = new Promise<void>((resolve) => {
        release = resolve;
      });
      return () => {
        release?.();
        gate = null;
      };
    },
  };
}

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export async function flush(): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, 0));
  await new Promise((resolve) => setTimeout(resolve, 0));
}
