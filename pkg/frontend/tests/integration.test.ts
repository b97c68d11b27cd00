// End-to-end run against a real gateway process. Exercises exactly what
// the dashboard does: register a template, preview, launch, watch the
// event stream, cancel, and reconcile the budget.

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { GatewayClient, JobDetail } from "../src/api.js";
import { openStream } from "../src/sse.js";

let server: ChildProcess;
let serverErr = "";
let workdir: string;
let base: string;
let client: GatewayClient;
let simJobId: string;

function delay(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const addr = probe.address();
      if (addr === null || typeof addr === "string") {
        reject(new Error("no port assigned"));
        return;
      }
      probe.close(() => resolve(addr.port));
    });
  });
}

async function pollUntil<T>(
  fn: () => Promise<T>,
  pred: (value: T) => boolean,
  timeoutMs = 15000,
): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    const value = await fn();
    if (pred(value)) return value;
    if (Date.now() > deadline) {
      throw new Error(`condition not reached within ${timeoutMs} ms`);
    }
    await delay(100);
  }
}

interface StatusFrame {
  seq: number;
  state: string;
}

/** Consume a job's stream until the server's end marker. */
async function collectStatuses(
  url: string,
  lastEventId?: string,
): Promise<StatusFrame[]> {
  const statuses: StatusFrame[] = [];
  const headers: Record<string, string> = { "X-User": "alice" };
  if (lastEventId !== undefined) headers["Last-Event-ID"] = lastEventId;
  const handle = openStream(url, {
    headers,
    retryMs: 100,
    onMessage: (message) => {
      if (message.event !== "status") return;
      const doc = JSON.parse(message.data) as StatusFrame;
      statuses.push({ seq: doc.seq, state: doc.state });
    },
  });
  const guard = setTimeout(() => handle.close(), 20000);
  await handle.done;
  clearTimeout(guard);
  return statuses;
}

beforeAll(async () => {
  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  workdir = mkdtempSync(join(tmpdir(), "stratus-dash-"));
  server = spawn(
    "python3",
    ["-m", "stratus", "serve", "--host", "127.0.0.1", "--port", String(port)],
    { cwd: workdir, stdio: ["ignore", "ignore", "pipe"] },
  );
  server.stderr!.on("data", (chunk) => {
    serverErr += String(chunk);
  });
  client = new GatewayClient(base, "alice");
  const deadline = Date.now() + 30000;
  for (;;) {
    try {
      await client.health();
      break;
    } catch {
      if (server.exitCode !== null) {
        throw new Error(`gateway exited early:\n${serverErr}`);
      }
      if (Date.now() > deadline) {
        throw new Error(`gateway never answered:\n${serverErr}`);
      }
      await delay(250);
    }
  }
}, 60000);

afterAll(async () => {
  if (server !== undefined && server.exitCode === null) {
    server.kill("SIGTERM");
    await new Promise<void>((resolve) => {
      const hammer = setTimeout(() => {
        server.kill("SIGKILL");
        resolve();
      }, 5000);
      server.once("exit", () => {
        clearTimeout(hammer);
        resolve();
      });
    });
  }
  rmSync(workdir, { recursive: true, force: true });
});

describe("dashboard traffic against a live gateway", () => {
  it("registers a simulation template", async () => {
    const result = await client.registerTemplate({
      name: "pism-greenland",
      run_command: "mpirun -np {{np}} ./pism -q {{q}}",
      parameters: [
        { name: "np", kind: "number", default: 8, description: "MPI ranks" },
        { name: "q", kind: "number", default: 0.6, description: "sliding exponent" },
      ],
      description: "ice sheet run",
    });
    expect(result).toEqual({ name: "pism-greenland", version: 1 });

    const fetched = await client.template("pism-greenland");
    expect(fetched.run_command).toBe("mpirun -np {{np}} ./pism -q {{q}}");
    expect(fetched.parameters.map((p) => p.name)).toEqual(["np", "q"]);
  });

  it("dry-run preview picks the gpu instance and creates no job", async () => {
    const result = await client.submit({
      run_command: "python train.py",
      requirements: { min_gpus: 1, min_memory_gib: 32 },
      dry_run: true,
    });
    expect(result.job_id).toBeUndefined();
    expect(result.dry_run!.instance_name).toBe("g6.2xlarge");
    expect(result.dry_run!.estimated_cost).toBeGreaterThan(0);
    expect(await client.jobs()).toEqual([]);
  });

  it("launches a template job and streams it to success", async () => {
    const before = await client.budget("default");
    expect(before.spent).toBe(0);

    const result = await client.submit({
      template: "pism-greenland",
      overrides: { q: 0.5 },
    });
    simJobId = result.job_id!;
    expect(simJobId).toMatch(/^job-/);

    const statuses = await collectStatuses(client.eventsUrl(simJobId));
    expect(statuses.map((s) => s.state)).toEqual([
      "Queued", "Provisioning", "Setup", "Running", "Collecting", "Succeeded",
    ]);
    expect(statuses.map((s) => s.seq)).toEqual([0, 1, 2, 3, 4, 5]);

    const detail = await client.job(simJobId);
    expect(detail.state).toBe("Succeeded");
    expect(detail.parameters).toEqual({ np: 8, q: 0.5 });
    expect(detail.mpi).toEqual({ np: 8, grid: [2, 4], slots_per_node: [8] });
    expect(detail.cost_settled).toBeGreaterThan(0);
    expect(detail.record_id).toBeTruthy();

    const after = await client.budget("default");
    expect(after.spent).toBeCloseTo(detail.cost_settled!, 6);
    expect(after.reserved).toBe(0);
    expect(after.headroom).toBeCloseTo(after.allocation - after.spent, 6);
  });

  it("holds a reservation while a local job runs, releases it on cancel", async () => {
    const result = await client.submit({
      run_command: "sleep 30",
      backend: "local",
    });
    const jobId = result.job_id!;
    await pollUntil(() => client.job(jobId), (d) => d.state === "Running");

    const during = await client.budget("default");
    expect(during.reserved).toBeGreaterThan(0);

    const streaming = collectStatuses(client.eventsUrl(jobId));
    await delay(200); // let the tail attach before the push
    expect((await client.cancel(jobId)).cancelled).toBe(true);

    const statuses = await streaming;
    expect(statuses[statuses.length - 1]!.state).toBe("Cancelled");

    const detail = await pollUntil(
      () => client.job(jobId), (d: JobDetail) => d.state === "Cancelled");
    expect(detail.cost_settled).not.toBeNull();
    expect((await client.cancel(jobId)).cancelled).toBe(false);

    const after = await client.budget("default");
    expect(after.reserved).toBe(0);
    expect(after.headroom).toBeCloseTo(after.allocation - after.spent, 6);
  });

  it("replays identical history on reconnect, trimmed by Last-Event-ID", async () => {
    const full = await collectStatuses(client.eventsUrl(simJobId));
    expect(full.length).toBe(6);
    expect(full[0]).toEqual({ seq: 0, state: "Queued" });
    expect(full[full.length - 1]!.state).toBe("Succeeded");

    const resumed = await collectStatuses(client.eventsUrl(simJobId), "2");
    expect(resumed.length).toBe(full.length - 3);
    expect(resumed[0]!.seq).toBe(3);
  });

  it("every interaction replays as raw HTTP on documented endpoints", async () => {
    const get = async (path: string) => {
      const resp = await fetch(base + path, { headers: { "X-User": "alice" } });
      expect(resp.status, path).toBe(200);
      return resp;
    };
    await get("/api/v1/health");
    await get("/api/v1/catalog");
    await get("/api/v1/templates");
    await get("/api/v1/templates/pism-greenland");
    await get("/api/v1/templates/pism-greenland/1");
    await get("/api/v1/jobs");
    await get(`/api/v1/jobs/${simJobId}`);
    await get("/api/v1/budgets");
    await get("/api/v1/budgets/default");

    const events = await get(`/api/v1/jobs/${simJobId}/events`);
    expect(events.headers.get("content-type")).toContain("text/event-stream");
    expect(await events.text()).toContain("event: end");

    const submit = await fetch(base + "/api/v1/jobs", {
      method: "POST",
      headers: { "X-User": "alice", "Content-Type": "application/json" },
      body: JSON.stringify({ run_command: "mpirun -np 8 ./solve", dry_run: true }),
    });
    expect(submit.status).toBe(201);

    const register = await fetch(base + "/api/v1/templates", {
      method: "POST",
      headers: { "X-User": "alice", "Content-Type": "application/json" },
      body: JSON.stringify({
        name: "pism-greenland",
        run_command: "mpirun -np {{np}} ./pism -q {{q}}",
        parameters: [
          { name: "np", kind: "number", default: 8, description: "" },
          { name: "q", kind: "number", default: 0.6, description: "" },
        ],
      }),
    });
    expect(register.status).toBe(201);
    expect((await register.json()).version).toBe(2);

    const cancel = await fetch(base + `/api/v1/jobs/${simJobId}/cancel`, {
      method: "POST",
      headers: { "X-User": "alice" },
    });
    expect(cancel.status).toBe(200);
    expect((await cancel.json()).cancelled).toBe(false);
  });
});
