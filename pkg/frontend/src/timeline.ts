// Event timeline: renders the audit trail as a readable list, newest first.

import { fmtDose, fmtProb } from "./format.js";
import type { TrialEventDoc } from "./types.js";

function describe(ev: TrialEventDoc): string {
  const p = ev.payload;
  switch (ev.kind) {
    case "allocation": {
      let line = `patient ${p.patient} allocated to ${fmtDose(p.dose as [number, number])}`;
      if (p.source) line += ` from ${fmtDose(p.source as [number, number])}`;
      if (p.direction) {
        const chosen = p.overridden ? `${p.direction} (safety override)` : p.direction;
        line += `, move ${chosen}, draw ${fmtProb(p.draw as number)}`;
      }
      return line;
    }
    case "outcome":
      return `patient ${p.patient} at ${fmtDose(p.dose as [number, number])}: ${
        p.dlt ? "DLT" : "no DLT"
      }`;
    case "stop_check":
      return (
        `safety check: P(lowest dose too toxic) = ${fmtProb(p.tail as number)}, ` +
        `ω = ${fmtProb(p.omega as number)}${p.stop ? ", STOP" : ""}`
      );
    case "termination":
      return `trial ended (${p.reason}) after ${p.enrolled} patients`;
    default:
      return JSON.stringify(p);
  }
}

export function renderTimeline(container: HTMLElement, events: TrialEventDoc[]): void {
  container.innerHTML = "";
  container.classList.add("timeline");

  const h = document.createElement("h3");
  h.textContent = `Event log (${events.length})`;
  container.appendChild(h);

  if (events.length === 0) {
    const empty = document.createElement("p");
    empty.className = "timeline-empty";
    empty.textContent = "No events yet.";
    container.appendChild(empty);
    return;
  }

  const list = document.createElement("ol");
  list.className = "timeline-list";
  for (const ev of [...events].reverse()) {
    const item = document.createElement("li");
    item.className = `timeline-item kind-${ev.kind}`;
    item.dataset.seq = String(ev.seq);
    const seq = document.createElement("span");
    seq.className = "timeline-seq";
    seq.textContent = `#${ev.seq}`;
    const cohort = document.createElement("span");
    cohort.className = "timeline-cohort";
    cohort.textContent = `cohort ${ev.cohort}`;
    const text = document.createElement("span");
    text.className = "timeline-text";
    text.textContent = describe(ev);
    item.append(seq, cohort, text);
    list.appendChild(item);
  }
  container.appendChild(list);
}
