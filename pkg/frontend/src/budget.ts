// Budget burn-down widget. Refreshed after each job settles rather than
// on a polling timer.

import { GatewayClient, BudgetInfo } from "./api.js";

const fmt = (value: number) => value.toFixed(4);

export class BudgetWidget {
  constructor(
    private readonly root: HTMLElement,
    private readonly client: GatewayClient,
    private readonly budgetId: string = "default",
  ) {}

  async refresh(): Promise<BudgetInfo> {
    const info = await this.client.budget(this.budgetId);
    this.render(info);
    return info;
  }

  render(info: BudgetInfo): void {
    const used = info.spent + info.reserved;
    const pct = info.allocation > 0
      ? Math.min(100, (used / info.allocation) * 100)
      : 0;
    this.root.innerHTML = `
      <div class="budget-title">budget ${info.id}</div>
      <div class="budget-bar"><div class="budget-fill" style="width:${pct.toFixed(1)}%"></div></div>
      <dl class="budget-figures">
        <dt>allocation</dt><dd data-field="allocation">${fmt(info.allocation)}</dd>
        <dt>reserved</dt><dd data-field="reserved">${fmt(info.reserved)}</dd>
        <dt>spent</dt><dd data-field="spent">${fmt(info.spent)}</dd>
        <dt>headroom</dt><dd data-field="headroom">${fmt(info.headroom)}</dd>
      </dl>`;
    if (info.overage_flags.length > 0) {
      const note = document.createElement("div");
      note.className = "budget-overage";
      note.textContent =
        `${info.overage_flags.length} run(s) exceeded their reservation`;
      this.root.appendChild(note);
    }
  }
}
