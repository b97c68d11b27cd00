// Typed client for the stratus gateway HTTP API. Every dashboard action
// goes through one of these methods; there are no other endpoints.

export interface CatalogEntry {
  provider: string;
  region: string;
  name: string;
  vcpus: number;
  memory_gib: number;
  gpus: number;
  gpu_model: string | null;
  network_gbps: number;
  price_per_hour: number;
  family_class: string;
}

export interface CatalogSnapshot {
  snapshot_date: string;
  source_label: string;
  entries: CatalogEntry[];
}

export interface TemplateParameter {
  name: string;
  kind: string;
  default: unknown;
  description: string;
}

export interface TemplateInfo {
  name: string;
  version: number;
  description: string;
  run_command: string;
  setup_command: string | null;
  parameters: TemplateParameter[];
}

export interface Requirements {
  min_gpus?: number | null;
  min_memory_gib?: number | null;
  min_vcpus?: number | null;
  provider?: string | null;
  instance_type?: string | null;
  num_nodes?: number;
  max_price_per_hour?: number | null;
}

export interface SubmitRequest {
  run_command?: string | null;
  setup_command?: string | null;
  template?: string | null;
  template_version?: number | null;
  overrides?: Record<string, unknown>;
  requirements?: Requirements;
  backend?: string;
  workspace?: string;
  dry_run?: boolean;
}

export interface DryRunReport {
  instance_name: string;
  provider: string;
  region: string;
  price_per_hour: number;
  num_nodes: number;
  total_slots: number;
  estimated_cost: number;
  rationale: string;
  np: number | null;
  grid: [number, number] | null;
}

export interface JobEventEntry {
  seq: number;
  timestamp: number;
  state: string;
  event: string;
  lines: string[];
}

export interface JobDetail {
  id: string;
  state: string;
  template: { name: string; version: number };
  parameters: Record<string, unknown>;
  workspace: string;
  principal: string;
  submitted_at: number;
  cost_estimate: number;
  cost_settled: number | null;
  record_id: string | null;
  plan: {
    instance: string;
    provider: string;
    region: string;
    price_per_hour: number;
    num_nodes: number;
    total_slots: number;
    backend: string;
  };
  events: JobEventEntry[];
  mpi?: { np: number; grid: number[]; slots_per_node: number[] };
}

export interface BudgetInfo {
  id: string;
  allocation: number;
  reserved: number;
  spent: number;
  headroom: number;
  overage_flags: { reservation_id: string; uncharged: number }[];
}

export interface GatewayErrorBody {
  error: string;
  message: string;
  headroom?: number;
  violations?: string[];
}

/** Thrown for any non-2xx response carrying a structured error body. */
export class GatewayError extends Error {
  constructor(readonly status: number, readonly body: GatewayErrorBody) {
    super(`${body.error}: ${body.message}`);
    this.name = "GatewayError";
  }
}

const API = "/api/v1";

export class GatewayClient {
  constructor(
    readonly baseUrl: string = "",
    public user: string = "anonymous",
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "X-User": this.user };
    if (body !== undefined) headers["Content-Type"] = "application/json";
    const resp = await fetch(this.baseUrl + API + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const doc = await resp.json();
    if (!resp.ok) {
      throw new GatewayError(resp.status, doc as GatewayErrorBody);
    }
    return doc as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  catalog(): Promise<CatalogSnapshot> {
    return this.request("GET", "/catalog");
  }

  async templates(): Promise<TemplateInfo[]> {
    const doc = await this.request<{ templates: TemplateInfo[] }>("GET", "/templates");
    return doc.templates;
  }

  template(name: string, version?: number): Promise<TemplateInfo> {
    const path = version === undefined
      ? `/templates/${encodeURIComponent(name)}`
      : `/templates/${encodeURIComponent(name)}/${version}`;
    return this.request("GET", path);
  }

  registerTemplate(body: {
    name: string;
    run_command: string;
    setup_command?: string | null;
    parameters?: TemplateParameter[];
    description?: string;
  }): Promise<{ name: string; version: number }> {
    return this.request("POST", "/templates", body);
  }

  submit(req: SubmitRequest): Promise<{ job_id?: string; dry_run?: DryRunReport }> {
    return this.request("POST", "/jobs", req);
  }

  async jobs(workspace?: string): Promise<JobDetail[]> {
    const query = workspace ? `?workspace=${encodeURIComponent(workspace)}` : "";
    const doc = await this.request<{ jobs: JobDetail[] }>("GET", `/jobs${query}`);
    return doc.jobs;
  }

  job(jobId: string): Promise<JobDetail> {
    return this.request("GET", `/jobs/${encodeURIComponent(jobId)}`);
  }

  cancel(jobId: string): Promise<{ cancelled: boolean }> {
    return this.request("POST", `/jobs/${encodeURIComponent(jobId)}/cancel`);
  }

  async budgets(): Promise<Record<string, BudgetInfo>> {
    const doc = await this.request<{ budgets: Record<string, BudgetInfo> }>(
      "GET", "/budgets");
    return doc.budgets;
  }

  budget(budgetId: string): Promise<BudgetInfo> {
    return this.request("GET", `/budgets/${encodeURIComponent(budgetId)}`);
  }

  /** Absolute URL of a job's server-sent event stream. */
  eventsUrl(jobId: string): string {
    return `${this.baseUrl}${API}/jobs/${encodeURIComponent(jobId)}/events`;
  }
}
