// Recommendation panel: the dose set the design would report now, plus
// diagnostics. A toxicity stop gets a prominent banner.

import { fmtDose, fmtInterval } from "./format.js";
import type { RecommendationDoc } from "./types.js";

export function renderRecommendation(container: HTMLElement, doc: RecommendationDoc): void {
  container.innerHTML = "";
  container.classList.add("recommendation");

  const h = document.createElement("h3");
  h.textContent = "Recommendation";
  container.appendChild(h);

  if (doc.status === "stopped_for_toxicity") {
    const banner = document.createElement("div");
    banner.className = "stop-banner";
    banner.textContent =
      "Trial stopped for toxicity: even the lowest dose combination is likely above the target rate. No dose is recommended.";
    container.appendChild(banner);
  }

  const list = document.createElement("div");
  list.className = "recommended-doses";
  if (doc.recommended.length === 0) {
    list.textContent =
      doc.status === "stopped_for_toxicity"
        ? "Recommended doses: none."
        : "No dose currently meets the recommendation window.";
  } else {
    const label = document.createElement("span");
    label.textContent = "Recommended dose combinations: ";
    list.appendChild(label);
    for (const dose of doc.recommended) {
      const chip = document.createElement("span");
      chip.className = "dose-chip";
      chip.textContent = fmtDose(dose);
      list.appendChild(chip);
    }
  }
  container.appendChild(list);

  const diag = document.createElement("dl");
  diag.className = "diagnostics";
  const rows: [string, string][] = [
    ["Selection window", fmtInterval(doc.diagnostics.window_lower, doc.diagnostics.window_upper)],
    ["Selection path", doc.diagnostics.path],
    ["Toxic scenario", doc.diagnostics.toxic_scenario ? "yes" : "no"],
    ["State version", String(doc.state_version)],
  ];
  for (const [term, value] of rows) {
    const dt = document.createElement("dt");
    dt.textContent = term;
    const dd = document.createElement("dd");
    dd.textContent = value;
    diag.append(dt, dd);
  }
  container.appendChild(diag);
}
