// Launch form: template picker with per-parameter override fields,
// capability fields, a dry-run preview, and submission.

import {
  DryRunReport,
  GatewayClient,
  GatewayError,
  SubmitRequest,
  TemplateInfo,
} from "./api.js";

export interface LaunchFormOptions {
  onLaunched: (jobId: string) => void;
}

export class LaunchForm {
  private templates: TemplateInfo[] = [];

  constructor(
    private readonly root: HTMLElement,
    private readonly client: GatewayClient,
    private readonly options: LaunchFormOptions,
  ) {
    this.root.innerHTML = `
      <form class="launch">
        <label>template
          <select name="template"><option value="">ad-hoc command</option></select>
        </label>
        <label class="raw-command">run command
          <input name="run_command" placeholder="mpirun -np 8 ./solve">
        </label>
        <fieldset class="params" hidden><legend>parameters</legend></fieldset>
        <div class="capabilities">
          <label>gpu <input name="gpu" type="number" min="0"></label>
          <label>ram GiB <input name="ram" type="number" min="1"></label>
          <label>nodes <input name="nodes" type="number" min="1" value="1"></label>
          <label>instance type <input name="instance_type"></label>
          <label>backend
            <select name="backend">
              <option value="simulated" selected>simulated</option>
              <option value="local">local</option>
            </select>
          </label>
        </div>
        <div class="actions">
          <button type="button" name="preview">dry run</button>
          <button type="submit" name="launch">launch</button>
        </div>
        <div class="error-banner" hidden></div>
        <div class="preview" hidden></div>
      </form>`;
    this.form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submit(false);
    });
    this.button("preview").addEventListener("click", () => void this.submit(true));
    this.select("template").addEventListener("change", () => this.renderParams());
  }

  private get form(): HTMLFormElement {
    return this.root.querySelector("form") as HTMLFormElement;
  }

  private select(name: string): HTMLSelectElement {
    return this.form.querySelector(`select[name="${name}"]`) as HTMLSelectElement;
  }

  private input(name: string): HTMLInputElement {
    return this.form.querySelector(`input[name="${name}"]`) as HTMLInputElement;
  }

  private button(name: string): HTMLButtonElement {
    return this.form.querySelector(`button[name="${name}"]`) as HTMLButtonElement;
  }

  async loadTemplates(): Promise<void> {
    this.templates = await this.client.templates();
    const picker = this.select("template");
    for (const t of this.templates) {
      const option = document.createElement("option");
      option.value = `${t.name}@${t.version}`;
      option.textContent = `${t.name}@${t.version}`;
      picker.appendChild(option);
    }
  }

  private currentTemplate(): TemplateInfo | undefined {
    const value = this.select("template").value;
    if (!value) return undefined;
    const [name, version] = value.split("@");
    return this.templates.find(
      (t) => t.name === name && t.version === Number(version));
  }

  /** Rebuild the override fields, pre-filled with declared defaults. */
  private renderParams(): void {
    const fieldset = this.form.querySelector(".params") as HTMLFieldSetElement;
    for (const label of [...fieldset.querySelectorAll("label")]) label.remove();
    const template = this.currentTemplate();
    (this.root.querySelector(".raw-command") as HTMLElement).hidden =
      template !== undefined;
    fieldset.hidden = template === undefined || template.parameters.length === 0;
    if (template === undefined) return;
    for (const param of template.parameters) {
      const label = document.createElement("label");
      label.textContent = `${param.name} `;
      const field = document.createElement("input");
      field.name = `param:${param.name}`;
      field.value = String(param.default);
      field.dataset.kind = param.kind;
      label.appendChild(field);
      fieldset.appendChild(label);
    }
  }

  /** Assemble the request exactly as the gateway expects it. */
  buildRequest(dryRun: boolean): SubmitRequest {
    const template = this.currentTemplate();
    const request: SubmitRequest = {
      backend: this.select("backend").value,
      dry_run: dryRun,
      requirements: {},
    };
    const gpu = this.input("gpu").value;
    const ram = this.input("ram").value;
    const nodes = this.input("nodes").value;
    const instanceType = this.input("instance_type").value;
    if (gpu) request.requirements!.min_gpus = Number(gpu);
    if (ram) request.requirements!.min_memory_gib = Number(ram);
    if (nodes) request.requirements!.num_nodes = Number(nodes);
    if (instanceType) request.requirements!.instance_type = instanceType;

    if (template === undefined) {
      request.run_command = this.input("run_command").value;
      return request;
    }
    request.template = template.name;
    request.template_version = template.version;
    const overrides: Record<string, unknown> = {};
    for (const param of template.parameters) {
      const field = this.form.querySelector(
        `input[name="param:${param.name}"]`) as HTMLInputElement;
      if (field.value === String(param.default)) continue;
      overrides[param.name] =
        param.kind === "number" ? Number(field.value) : field.value;
    }
    if (Object.keys(overrides).length > 0) request.overrides = overrides;
    return request;
  }

  private async submit(dryRun: boolean): Promise<void> {
    const banner = this.root.querySelector(".error-banner") as HTMLElement;
    const preview = this.root.querySelector(".preview") as HTMLElement;
    banner.hidden = true;
    try {
      const result = await this.client.submit(this.buildRequest(dryRun));
      if (result.dry_run !== undefined) {
        this.renderPreview(preview, result.dry_run);
      } else if (result.job_id !== undefined) {
        preview.hidden = true;
        this.options.onLaunched(result.job_id);
      }
    } catch (err) {
      // gateway errors surface verbatim; anything else is a client bug
      if (!(err instanceof GatewayError)) throw err;
      banner.textContent = `${err.body.error}: ${err.body.message}`;
      banner.hidden = false;
    }
  }

  private renderPreview(el: HTMLElement, report: DryRunReport): void {
    const mpi = report.np !== null && report.grid !== null
      ? `<dt>mpi</dt><dd>np=${report.np} grid=${report.grid[0]}x${report.grid[1]}</dd>`
      : "";
    el.innerHTML = `
      <dl>
        <dt>instance</dt>
        <dd data-field="instance">${report.instance_name}
          (${report.provider}/${report.region})</dd>
        <dt>nodes</dt><dd>${report.num_nodes} (${report.total_slots} slots)</dd>
        ${mpi}
        <dt>price</dt><dd>${report.price_per_hour.toFixed(4)}/h</dd>
        <dt>estimated cost</dt>
        <dd data-field="cost">${report.estimated_cost.toFixed(4)}</dd>
        <dt>rationale</dt><dd>${report.rationale}</dd>
      </dl>`;
    el.hidden = false;
  }
}
