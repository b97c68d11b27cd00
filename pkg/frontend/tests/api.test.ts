import { afterEach, describe, expect, it, vi } from "vitest";

import { GatewayClient, GatewayError } from "../src/api.js";

interface RecordedCall {
  url: string;
  method: string;
  headers: Record<string, string>;
  body?: unknown;
}

function recordingFetch(payload: unknown, status = 200) {
  const calls: RecordedCall[] = [];
  const mock = vi.fn().mockImplementation(
    (url: string, init: RequestInit) => {
      calls.push({
        url,
        method: init.method ?? "GET",
        headers: init.headers as Record<string, string>,
        body: init.body === undefined ? undefined
          : JSON.parse(init.body as string),
      });
      return Promise.resolve(new Response(JSON.stringify(payload), {
        status,
        headers: { "Content-Type": "application/json" },
      }));
    });
  vi.stubGlobal("fetch", mock);
  return calls;
}

// the complete HTTP surface the dashboard is allowed to touch
const DOCUMENTED_ROUTES = [
  /^GET \/api\/v1\/health$/,
  /^GET \/api\/v1\/catalog$/,
  /^GET \/api\/v1\/templates$/,
  /^POST \/api\/v1\/templates$/,
  /^GET \/api\/v1\/templates\/[^/]+$/,
  /^GET \/api\/v1\/templates\/[^/]+\/\d+$/,
  /^POST \/api\/v1\/jobs$/,
  /^GET \/api\/v1\/jobs(\?workspace=[^&]+)?$/,
  /^GET \/api\/v1\/jobs\/[^/]+$/,
  /^POST \/api\/v1\/jobs\/[^/]+\/cancel$/,
  /^GET \/api\/v1\/jobs\/[^/]+\/events$/,
  /^GET \/api\/v1\/budgets$/,
  /^GET \/api\/v1\/budgets\/[^/]+$/,
];

function assertDocumented(call: RecordedCall): void {
  const signature = `${call.method} ${call.url}`;
  expect(
    DOCUMENTED_ROUTES.some((route) => route.test(signature)),
    `undocumented endpoint: ${signature}`,
  ).toBe(true);
}

describe("GatewayClient", () => {
  afterEach(() => {
    vi.unstubAllGlobals();
  });

  it("sends the user on every request", async () => {
    const calls = recordingFetch({ status: "ok" });
    const client = new GatewayClient("", "carol");
    await client.health();
    expect(calls[0].headers["X-User"]).toBe("carol");
  });

  it("submits run requests as documented JSON bodies", async () => {
    const calls = recordingFetch({ job_id: "job-1" });
    const client = new GatewayClient();
    const result = await client.submit({
      template: "pism",
      template_version: 1,
      overrides: { q: 0.5 },
      backend: "simulated",
    });
    expect(result.job_id).toBe("job-1");
    expect(calls[0].method).toBe("POST");
    expect(calls[0].url).toBe("/api/v1/jobs");
    expect(calls[0].body).toEqual({
      template: "pism", template_version: 1,
      overrides: { q: 0.5 }, backend: "simulated",
    });
  });

  it("unwraps list envelopes", async () => {
    recordingFetch({ templates: [{ name: "pism", version: 1 }] });
    const client = new GatewayClient();
    const templates = await client.templates();
    expect(templates[0].name).toBe("pism");
  });

  it("filters job listings by workspace", async () => {
    const calls = recordingFetch({ jobs: [] });
    await new GatewayClient().jobs("glaciers");
    expect(calls[0].url).toBe("/api/v1/jobs?workspace=glaciers");
  });

  it("raises GatewayError with the structured body", async () => {
    recordingFetch(
      { error: "BudgetExhausted", message: "no headroom", headroom: 1.5 },
      409);
    const client = new GatewayClient();
    const err = await client.submit({ run_command: "true" })
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(GatewayError);
    expect((err as GatewayError).status).toBe(409);
    expect((err as GatewayError).body.error).toBe("BudgetExhausted");
    expect((err as GatewayError).body.headroom).toBe(1.5);
  });

  it("only ever touches documented endpoints", async () => {
    const calls = recordingFetch({
      status: "ok", entries: [], templates: [], jobs: [], budgets: {},
      name: "t", version: 1, job_id: "j", cancelled: true, id: "default",
      allocation: 0, reserved: 0, spent: 0, headroom: 0, overage_flags: [],
    });
    const client = new GatewayClient();
    await client.health();
    await client.catalog();
    await client.templates();
    await client.template("pism");
    await client.template("pism", 2);
    await client.registerTemplate({ name: "t", run_command: "true" });
    await client.submit({ run_command: "true" });
    await client.jobs();
    await client.jobs("glaciers");
    await client.job("job-1");
    await client.cancel("job-1");
    await client.budgets();
    await client.budget("default");
    expect(calls.length).toBe(13);
    for (const call of calls) assertDocumented(call);
    // the stream URL is part of the same documented surface
    expect("GET " + new GatewayClient().eventsUrl("job-1")).toMatch(
      DOCUMENTED_ROUTES[10]);
  });
});
