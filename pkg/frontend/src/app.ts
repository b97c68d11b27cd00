// Entry point: wire the launch form, job board, and budget widget to a
// gateway reached at the page origin.

import { GatewayClient } from "./api.js";
import { BudgetWidget } from "./budget.js";
import { JobBoard } from "./jobboard.js";
import { LaunchForm } from "./launchform.js";

function mount(): void {
  const client = new GatewayClient("", "anonymous");

  const budget = new BudgetWidget(
    document.getElementById("budget") as HTMLElement, client);
  const board = new JobBoard(
    document.getElementById("jobs") as HTMLElement, client, {
      onSettled: () => void budget.refresh(),
    });
  const form = new LaunchForm(
    document.getElementById("launch") as HTMLElement, client, {
      onLaunched: (jobId) => {
        void board.track(jobId);
        void budget.refresh();
      },
    });

  const userField = document.getElementById("user") as HTMLInputElement;
  userField.value = client.user;
  userField.addEventListener("change", () => {
    client.user = userField.value || "anonymous";
  });

  void form.loadTemplates();
  void board.loadExisting();
  void budget.refresh();
}

mount();
