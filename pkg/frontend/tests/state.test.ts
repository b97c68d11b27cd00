import { describe, expect, it } from "vitest";

import type { JobDetail } from "../src/api.js";
import { JobStore, StatusEvent } from "../src/state.js";

function detail(overrides: Partial<JobDetail> = {}): JobDetail {
  return {
    id: "job-1",
    state: "Queued",
    template: { name: "pism", version: 1 },
    parameters: { q: 0.5 },
    workspace: "default",
    principal: "alice",
    submitted_at: 1000,
    cost_estimate: 3.5,
    cost_settled: null,
    record_id: null,
    plan: {
      instance: "hpc7a.12xlarge", provider: "aws", region: "us-east-2",
      price_per_hour: 7.2, num_nodes: 1, total_slots: 24, backend: "simulated",
    },
    events: [],
    ...overrides,
  };
}

function status(seq: number, state: string, lines: string[] = []): StatusEvent {
  return { seq, timestamp: 1000 + seq, state, event: "e", lines };
}

describe("JobStore", () => {
  it("seeds a view from a job detail document", () => {
    const store = new JobStore();
    const view = store.upsert(detail());
    expect(view.state).toBe("Queued");
    expect(view.template).toBe("pism");
    expect(view.costEstimate).toBe(3.5);
    expect(store.all().length).toBe(1);
  });

  it("replays the embedded event history on first upsert", () => {
    const store = new JobStore();
    const view = store.upsert(detail({
      state: "Running",
      events: [
        { seq: 1, timestamp: 1001, state: "Provisioning", event: "a", lines: [] },
        { seq: 2, timestamp: 1002, state: "Setup", event: "b", lines: ["s"] },
        { seq: 3, timestamp: 1003, state: "Running", event: "c", lines: [] },
      ],
    }));
    expect(view.state).toBe("Running");
    expect(view.lastSeq).toBe(3);
    expect(view.enteredAt["Setup"]).toBe(1002);
    expect(view.logTail).toEqual(["s"]);
  });

  it("applies transitions in order and tracks entry times", () => {
    const store = new JobStore();
    store.upsert(detail());
    store.applyStatus("job-1", status(1, "Provisioning"));
    store.applyStatus("job-1", status(2, "Setup"));
    const view = store.get("job-1")!;
    expect(view.state).toBe("Setup");
    expect(view.enteredAt).toEqual({ Provisioning: 1001, Setup: 1002 });
  });

  it("ignores replayed and duplicate events", () => {
    const store = new JobStore();
    store.upsert(detail());
    store.applyStatus("job-1", status(1, "Provisioning"));
    store.applyStatus("job-1", status(1, "Provisioning"));
    store.applyStatus("job-1", status(0, "Queued"));
    const view = store.get("job-1")!;
    expect(view.state).toBe("Provisioning");
    expect(view.lastSeq).toBe(1);
  });

  it("keeps only the last eight log lines", () => {
    const store = new JobStore();
    store.upsert(detail());
    for (let i = 1; i <= 5; i++) {
      store.applyStatus("job-1", status(i, "Running", [`a${i}`, `b${i}`]));
    }
    const view = store.get("job-1")!;
    expect(view.logTail.length).toBe(8);
    expect(view.logTail[7]).toBe("b5");
    expect(view.logTail[0]).toBe("a2");
  });

  it("notifies subscribers on every accepted change", () => {
    const store = new JobStore();
    const states: string[] = [];
    store.subscribe((job) => states.push(job.state));
    store.upsert(detail());
    store.applyStatus("job-1", status(1, "Provisioning"));
    store.applyStatus("job-1", status(1, "Provisioning"));  // dropped
    expect(states).toEqual(["Queued", "Provisioning"]);
  });

  it("flags terminal states", () => {
    const store = new JobStore();
    store.upsert(detail());
    expect(store.isTerminal("job-1")).toBe(false);
    store.applyStatus("job-1", status(1, "Succeeded"));
    expect(store.isTerminal("job-1")).toBe(true);
  });
});
