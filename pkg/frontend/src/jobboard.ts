// Live job table. Each tracked job holds one event-stream subscription;
// rows update in place and go quiet once the job is terminal.

import { GatewayClient } from "./api.js";
import { openStream, StreamHandle } from "./sse.js";
import { JobStore, JobView, StatusEvent, TERMINAL_STATES } from "./state.js";

export interface JobBoardOptions {
  /** Called once per job after its terminal event, settled cost known. */
  onSettled?: (job: JobView) => void;
}

export class JobBoard {
  readonly store = new JobStore();
  private streams = new Map<string, StreamHandle>();
  private rows = new Map<string, HTMLTableRowElement>();
  private tbody: HTMLTableSectionElement;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: GatewayClient,
    private readonly options: JobBoardOptions = {},
  ) {
    this.root.innerHTML = `
      <table class="jobs">
        <thead><tr>
          <th>job</th><th>template</th><th>state</th>
          <th>cost est / settled</th><th>log</th><th></th>
        </tr></thead>
        <tbody></tbody>
      </table>`;
    this.tbody = this.root.querySelector("tbody") as HTMLTableSectionElement;
    this.store.subscribe((job) => this.renderRow(job));
  }

  /** Load existing jobs, wiring streams for the ones still running. */
  async loadExisting(): Promise<void> {
    const jobs = await this.client.jobs();
    for (const detail of jobs) {
      this.store.upsert(detail);
      if (!TERMINAL_STATES.has(detail.state)) {
        this.subscribeStream(detail.id);
      }
    }
  }

  /** Begin tracking a freshly submitted job. */
  async track(jobId: string): Promise<void> {
    const detail = await this.client.job(jobId);
    this.store.upsert(detail);
    if (!TERMINAL_STATES.has(detail.state)) {
      this.subscribeStream(jobId);
    } else {
      await this.settle(jobId);
    }
  }

  private subscribeStream(jobId: string): void {
    if (this.streams.has(jobId)) return;
    const handle = openStream(this.client.eventsUrl(jobId), {
      headers: { "X-User": this.client.user },
      onMessage: (message) => {
        if (message.event !== "status") return;
        const status = JSON.parse(message.data) as StatusEvent;
        this.store.applyStatus(jobId, status);
        if (TERMINAL_STATES.has(status.state)) {
          void this.settle(jobId);
        }
      },
    });
    this.streams.set(jobId, handle);
  }

  /** Re-fetch the terminal job so the settled cost lands in the row. */
  private async settle(jobId: string): Promise<void> {
    const stream = this.streams.get(jobId);
    if (stream !== undefined) {
      this.streams.delete(jobId);
      stream.close();
    }
    const detail = await this.client.job(jobId);
    const view = this.store.get(jobId);
    if (view !== undefined) {
      view.costSettled = detail.cost_settled;
      view.state = detail.state;
      this.renderRow(view);
      this.options.onSettled?.(view);
    }
  }

  private async cancel(jobId: string): Promise<void> {
    await this.client.cancel(jobId);
  }

  private renderRow(job: JobView): void {
    let row = this.rows.get(job.id);
    if (row === undefined) {
      row = document.createElement("tr");
      row.dataset.jobId = job.id;

      for (const name of ["id", "template", "state", "cost", "log"]) {
        const cell = document.createElement("td");
        cell.dataset.cell = name;
        row.appendChild(cell);
      }
      const actions = document.createElement("td");
      actions.dataset.cell = "actions";
      const button = document.createElement("button");
      button.textContent = "cancel";
      button.addEventListener("click", () => void this.cancel(job.id));
      actions.appendChild(button);
      row.appendChild(actions);

      this.tbody.prepend(row);
      this.rows.set(job.id, row);
    }
    const cell = (name: string) =>
      row!.querySelector(`td[data-cell="${name}"]`) as HTMLTableCellElement;
    cell("id").textContent = job.id;
    cell("template").textContent = `${job.template}@${job.version}`;
    const state = cell("state");
    state.textContent = job.state;
    state.className = `state state-${job.state.toLowerCase()}`;
    const settled = job.costSettled === null ? "-" : job.costSettled.toFixed(4);
    cell("cost").textContent = `${job.costEstimate.toFixed(4)} / ${settled}`;
    cell("log").textContent = job.logTail[job.logTail.length - 1] ?? "";
    const button = cell("actions").querySelector("button") as HTMLButtonElement;
    button.disabled = TERMINAL_STATES.has(job.state);
  }

  close(): void {
    for (const stream of this.streams.values()) stream.close();
    this.streams.clear();
  }
}
