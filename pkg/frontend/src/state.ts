// Client-side job state. One JobView per job, updated from the event
// stream; the rendered state is always the latest streamed transition.

import type { JobDetail } from "./api.js";

export const TERMINAL_STATES = new Set(["Succeeded", "Failed", "Cancelled"]);

export interface StatusEvent {
  seq: number;
  timestamp: number;
  state: string;
  event: string;
  lines: string[];
}

export interface JobView {
  id: string;
  template: string;
  version: number;
  state: string;
  /** First time each state was entered (epoch seconds). */
  enteredAt: Record<string, number>;
  logTail: string[];
  costEstimate: number;
  costSettled: number | null;
  lastSeq: number;
}

const LOG_TAIL_LIMIT = 8;

export type StoreListener = (job: JobView) => void;

export class JobStore {
  private jobs = new Map<string, JobView>();
  private listeners: StoreListener[] = [];

  subscribe(listener: StoreListener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private notify(job: JobView): void {
    for (const listener of this.listeners) listener(job);
  }

  all(): JobView[] {
    return [...this.jobs.values()];
  }

  get(id: string): JobView | undefined {
    return this.jobs.get(id);
  }

  /** Seed or refresh a job from a full detail document. */
  upsert(detail: JobDetail): JobView {
    const existing = this.jobs.get(detail.id);
    const view: JobView = existing ?? {
      id: detail.id,
      template: detail.template.name,
      version: detail.template.version,
      state: detail.state,
      enteredAt: {},
      logTail: [],
      costEstimate: detail.cost_estimate,
      costSettled: null,
      lastSeq: -1,
    };
    view.costSettled = detail.cost_settled;
    if (existing === undefined) {
      this.jobs.set(detail.id, view);
      for (const event of detail.events) {
        this.applyStatus(detail.id, event);
      }
      // detail.state is authoritative even if the event list lags
      view.state = detail.state;
    }
    this.notify(view);
    return view;
  }

  /**
   * Apply one streamed transition. Replayed or duplicate events (seq at
   * or below the high-water mark) are ignored, so reconnects are safe.
   */
  applyStatus(id: string, event: StatusEvent): void {
    const view = this.jobs.get(id);
    if (view === undefined || event.seq <= view.lastSeq) return;
    view.lastSeq = event.seq;
    view.state = event.state;
    if (!(event.state in view.enteredAt)) {
      view.enteredAt[event.state] = event.timestamp;
    }
    for (const line of event.lines) {
      view.logTail.push(line);
    }
    if (view.logTail.length > LOG_TAIL_LIMIT) {
      view.logTail = view.logTail.slice(-LOG_TAIL_LIMIT);
    }
    this.notify(view);
  }

  isTerminal(id: string): boolean {
    const view = this.jobs.get(id);
    return view !== undefined && TERMINAL_STATES.has(view.state);
  }
}
