// Cohort outcome entry. One idempotency key is minted per rendered pending
// cohort and reused for every click and retry, so a double click or a
// resubmit after a network drop can only ever apply one state transition.

import { ApiError, OfflineError, newIdempotencyKey } from "./api.js";
import type { TrialClient } from "./api.js";
import { fmtDose } from "./format.js";
import type { Allocation, OutcomeEntry, TransitionDoc } from "./types.js";

export interface CohortFormHandlers {
  onSubmitted: (doc: TransitionDoc) => void;
}

function conflictDiff(detail: unknown): HTMLElement {
  const box = document.createElement("div");
  box.className = "warning conflict-warning";
  const msg = document.createElement("p");
  msg.textContent =
    "Submission rejected: it does not match the cohort the server is waiting for.";
  box.appendChild(msg);
  const expected =
    detail !== null && typeof detail === "object" && "expected" in detail
      ? (detail as { expected: Allocation[] }).expected
      : null;
  if (expected) {
    const label = document.createElement("p");
    label.textContent = "Server expects outcomes for:";
    box.appendChild(label);
    const list = document.createElement("ul");
    list.className = "expected-pending";
    for (const alloc of expected) {
      const item = document.createElement("li");
      item.textContent = `patient ${alloc.patient} at ${fmtDose(alloc.dose)}`;
      list.appendChild(item);
    }
    box.appendChild(list);
  }
  const hint = document.createElement("p");
  hint.textContent = "Reload the trial to resync before entering outcomes.";
  box.appendChild(hint);
  return box;
}

export function renderCohortForm(
  container: HTMLElement,
  api: TrialClient,
  trialId: string,
  pending: Allocation[],
  handlers: CohortFormHandlers,
): void {
  container.innerHTML = "";
  container.classList.add("cohort-form");

  const h = document.createElement("h3");
  h.textContent = "Record cohort outcomes";
  container.appendChild(h);

  if (pending.length === 0) {
    const idle = document.createElement("p");
    idle.textContent = "No pending allocations.";
    container.appendChild(idle);
    return;
  }

  // minted once for this pending cohort; retries reuse it
  const idempotencyKey = newIdempotencyKey();
  let inFlight = false;
  let applied = false;

  const form = document.createElement("form");
  const toggles: { allocation: Allocation; input: HTMLInputElement }[] = [];
  for (const allocation of pending) {
    const row = document.createElement("label");
    row.className = "patient-row";
    const input = document.createElement("input");
    input.type = "checkbox";
    input.name = `dlt-${allocation.patient}`;
    const text = document.createElement("span");
    text.textContent = `patient ${allocation.patient} at ${fmtDose(allocation.dose)}: DLT observed`;
    row.append(input, text);
    form.appendChild(row);
    toggles.push({ allocation, input });
  }

  const submit = document.createElement("button");
  submit.type = "submit";
  submit.textContent = "Submit cohort";
  form.appendChild(submit);

  const note = document.createElement("div");
  note.className = "form-note";
  container.appendChild(form);
  container.appendChild(note);

  const send = async () => {
    if (inFlight || applied) return;
    inFlight = true;
    submit.disabled = true;
    note.innerHTML = "";
    const outcomes: OutcomeEntry[] = toggles.map(({ allocation, input }) => ({
      dose: allocation.dose,
      dlt: input.checked,
    }));
    try {
      const doc = await api.submitCohort(trialId, outcomes, idempotencyKey);
      applied = true;
      handlers.onSubmitted(doc);
    } catch (err) {
      if (err instanceof OfflineError) {
        // hold the entry as queued; the retry resends the identical request
        for (const { input } of toggles) input.disabled = true;
        const queued = document.createElement("div");
        queued.className = "warning offline-warning";
        queued.textContent =
          "Service unreachable. The cohort is queued locally and was not applied.";
        const retry = document.createElement("button");
        retry.type = "button";
        retry.className = "retry-button";
        retry.textContent = "Retry submission";
        retry.addEventListener("click", () => {
          retry.disabled = true;
          void send();
        });
        note.append(queued, retry);
      } else if (err instanceof ApiError && err.status === 409) {
        submit.disabled = false;
        note.appendChild(conflictDiff(err.detail));
      } else if (err instanceof ApiError) {
        submit.disabled = false;
        const boxed = document.createElement("div");
        boxed.className = "warning";
        boxed.textContent = `Request failed (${err.status}): ${JSON.stringify(err.detail)}`;
        note.appendChild(boxed);
      } else {
        throw err;
      }
    } finally {
      inFlight = false;
    }
  };

  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    void send();
  });
}
