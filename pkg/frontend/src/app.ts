// Dashboard wiring. The page is a pure function of the latest server
// payloads: every mutation triggers a full refetch and re-render, so the
// screen can never drift from the trial log. Dispatches a "rendered" event
// after each render so tests can await quiescence.

import { ApiError, OfflineError, newIdempotencyKey } from "./api.js";
import type { TrialClient } from "./api.js";
import { renderCohortForm } from "./cohortForm.js";
import { fmtDose } from "./format.js";
import { renderHeatmap } from "./heatmap.js";
import { renderRecommendation } from "./recommendation.js";
import { renderTimeline } from "./timeline.js";
import { renderWhatIf } from "./whatIf.js";
import type { TrialStatus } from "./types.js";

const PRESETS = ["study1", "study2", "trial"];

function section(parent: HTMLElement, id: string): HTMLElement {
  const el = document.createElement("section");
  el.id = id;
  parent.appendChild(el);
  return el;
}

export class Dashboard extends EventTarget {
  private trialId: string | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: TrialClient,
  ) {
    super();
  }

  mount(): void {
    this.root.innerHTML = "";
    const launcher = section(this.root, "launcher");
    this.renderLauncher(launcher);
    section(this.root, "trial");
  }

  private renderLauncher(container: HTMLElement): void {
    container.innerHTML = "";
    const h = document.createElement("h2");
    h.textContent = "Dose-finding dashboard";
    container.appendChild(h);

    const createForm = document.createElement("form");
    createForm.id = "create-form";
    const select = document.createElement("select");
    select.name = "preset";
    for (const preset of PRESETS) {
      const opt = document.createElement("option");
      opt.value = preset;
      opt.textContent = preset;
      select.appendChild(opt);
    }
    const seed = document.createElement("input");
    seed.type = "number";
    seed.name = "seed";
    seed.placeholder = "seed (optional)";
    const go = document.createElement("button");
    go.type = "submit";
    go.textContent = "Start trial";
    createForm.append(select, seed, go);
    container.appendChild(createForm);

    const loadForm = document.createElement("form");
    loadForm.id = "load-form";
    const idInput = document.createElement("input");
    idInput.type = "text";
    idInput.name = "trial_id";
    idInput.placeholder = "existing trial id";
    const load = document.createElement("button");
    load.type = "submit";
    load.textContent = "Load trial";
    loadForm.append(idInput, load);
    container.appendChild(loadForm);

    const note = document.createElement("div");
    note.className = "launcher-note";
    container.appendChild(note);

    const fail = (err: unknown) => {
      note.textContent =
        err instanceof OfflineError
          ? "Service unreachable."
          : err instanceof ApiError
            ? `Request failed (${err.status}): ${JSON.stringify(err.detail)}`
            : String(err);
    };

    createForm.addEventListener("submit", (ev) => {
      ev.preventDefault();
      go.disabled = true;
      const body: { preset: string; seed?: number } = { preset: select.value };
      if (seed.value !== "") body.seed = Number(seed.value);
      this.api
        .createTrial(body, newIdempotencyKey())
        .then((doc) => this.openTrial(doc.trial_id))
        .catch(fail)
        .finally(() => {
          go.disabled = false;
        });
    });

    loadForm.addEventListener("submit", (ev) => {
      ev.preventDefault();
      if (idInput.value.trim() === "") return;
      this.openTrial(idInput.value.trim()).catch(fail);
    });
  }

  async openTrial(trialId: string): Promise<void> {
    this.trialId = trialId;
    await this.refresh();
  }

  /** Refetch every panel's payload and rebuild the trial view. */
  async refresh(): Promise<void> {
    if (this.trialId === null) return;
    const id = this.trialId;
    const container = this.root.querySelector<HTMLElement>("#trial");
    if (!container) return;
    try {
      const [status, posterior, recommendation, events] = await Promise.all([
        this.api.getTrial(id),
        this.api.getPosterior(id),
        this.api.getRecommendation(id),
        this.api.getEvents(id),
      ]);
      container.innerHTML = "";

      this.renderHeader(section(container, "status-header"), status);
      renderHeatmap(section(container, "heatmap"), posterior, {
        title: "Posterior DLT probability",
        expectedVersion: status.state_version,
      });
      renderRecommendation(section(container, "recommendation"), recommendation);
      if (status.status === "running") {
        renderCohortForm(section(container, "cohort-form"), this.api, id, status.pending, {
          onSubmitted: () => void this.refresh(),
        });
        renderWhatIf(section(container, "what-if"), this.api, id, status.pending, posterior);
      }
      renderTimeline(section(container, "timeline"), events.events);
    } catch (err) {
      container.innerHTML = "";
      const warn = document.createElement("div");
      warn.className = "warning";
      warn.textContent =
        err instanceof OfflineError
          ? "Service unreachable; could not load the trial."
          : err instanceof ApiError
            ? `Could not load trial (${err.status}): ${JSON.stringify(err.detail)}`
            : String(err);
      container.appendChild(warn);
    }
    this.dispatchEvent(new Event("rendered"));
  }

  private renderHeader(container: HTMLElement, status: TrialStatus): void {
    const h = document.createElement("h2");
    h.textContent = `Trial ${status.trial_id}`;
    container.appendChild(h);

    const badge = document.createElement("span");
    badge.className = `status-badge status-${status.status}`;
    badge.textContent = status.status.replaceAll("_", " ");
    container.appendChild(badge);

    const facts = document.createElement("p");
    facts.className = "status-facts";
    facts.textContent =
      `version ${status.state_version} · cohort ${status.cohort} · ` +
      `${status.enrolled} of ${status.n_max} patients with outcomes · ` +
      `target rate ${status.theta}`;
    container.appendChild(facts);

    if (status.current_pair !== null && status.status === "running") {
      const doses = [...new Set(status.current_pair.map((d) => fmtDose(d)))];
      const pair = document.createElement("p");
      pair.className = "current-pair";
      pair.textContent =
        doses.length > 1
          ? `enrolling by alternating between ${doses.join(" and ")}`
          : `enrolling at ${doses[0]}`;
      container.appendChild(pair);
    }

    const refreshButton = document.createElement("button");
    refreshButton.type = "button";
    refreshButton.id = "refresh-button";
    refreshButton.textContent = "Refresh";
    refreshButton.addEventListener("click", () => void this.refresh());
    container.appendChild(refreshButton);
  }
}
