// What-if panel: hypothetical outcomes for the pending cohort, previewed
// side by side against the current posterior. The preview comes entirely
// from the server; the same outcomes submitted for real produce the same
// numbers because both transitions draw from the same per-version stream.

import { OfflineError } from "./api.js";
import type { TrialClient } from "./api.js";
import { fmtDose } from "./format.js";
import { renderHeatmap } from "./heatmap.js";
import type {
  Allocation,
  OutcomeEntry,
  PosteriorSummary,
  TransitionDoc,
  WhatIfCurrentDoc,
} from "./types.js";

function isTransition(doc: TransitionDoc | WhatIfCurrentDoc): doc is TransitionDoc {
  return "stopped" in doc;
}

export function renderWhatIf(
  container: HTMLElement,
  api: TrialClient,
  trialId: string,
  pending: Allocation[],
  current: PosteriorSummary,
): void {
  container.innerHTML = "";
  container.classList.add("what-if");

  const h = document.createElement("h3");
  h.textContent = "What if the pending cohort came back like this?";
  container.appendChild(h);

  if (pending.length === 0) {
    const idle = document.createElement("p");
    idle.textContent = "No pending cohort to explore.";
    container.appendChild(idle);
    return;
  }

  const form = document.createElement("form");
  const toggles: { allocation: Allocation; input: HTMLInputElement }[] = [];
  for (const allocation of pending) {
    const row = document.createElement("label");
    row.className = "patient-row";
    const input = document.createElement("input");
    input.type = "checkbox";
    input.name = `whatif-dlt-${allocation.patient}`;
    const text = document.createElement("span");
    text.textContent = `patient ${allocation.patient} at ${fmtDose(allocation.dose)}: DLT`;
    row.append(input, text);
    form.appendChild(row);
    toggles.push({ allocation, input });
  }
  const preview = document.createElement("button");
  preview.type = "submit";
  preview.textContent = "Preview";
  form.appendChild(preview);
  container.appendChild(form);

  const result = document.createElement("div");
  result.className = "what-if-result";
  container.appendChild(result);

  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    preview.disabled = true;
    result.innerHTML = "";
    const outcomes: OutcomeEntry[] = toggles.map(({ allocation, input }) => ({
      dose: allocation.dose,
      dlt: input.checked,
    }));
    api
      .whatIf(trialId, outcomes)
      .then((doc) => {
        const columns = document.createElement("div");
        columns.className = "side-by-side";
        const left = document.createElement("div");
        const right = document.createElement("div");
        columns.append(left, right);
        result.appendChild(columns);
        renderHeatmap(left, current, { title: "Current posterior" });
        renderHeatmap(right, doc.posterior, { title: "Hypothetical posterior" });

        const summary = document.createElement("div");
        summary.className = "what-if-summary";
        if (isTransition(doc)) {
          if (doc.stopped) {
            summary.innerHTML =
              '<p class="warning stop-preview">These outcomes would stop the trial for toxicity.</p>';
          } else if (doc.next_allocations) {
            const doses = doc.next_allocations
              .map((a) => `patient ${a.patient} at ${fmtDose(a.dose)}`)
              .join("; ");
            summary.textContent = `Next cohort would be: ${doses}`;
          } else {
            summary.textContent = "These outcomes would complete the trial.";
          }
        } else {
          summary.textContent = "No outcomes entered: showing the current posterior twice.";
        }
        result.appendChild(summary);
      })
      .catch((err) => {
        const failed = document.createElement("p");
        failed.className = "warning";
        failed.textContent =
          err instanceof OfflineError
            ? "Service unreachable; preview unavailable."
            : `Preview failed: ${err instanceof Error ? err.message : String(err)}`;
        result.appendChild(failed);
      })
      .finally(() => {
        preview.disabled = false;
      });
  });
}
