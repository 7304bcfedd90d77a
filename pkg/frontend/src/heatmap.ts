// Posterior heatmap: an I×J table colored by posterior median on a diverging
// scale centered at the target rate, annotated with per-dose counts. Pure
// render of one posterior payload; no statistics happen here.

import { fmtDose, fmtInterval, fmtProb } from "./format.js";
import type { PosteriorSummary } from "./types.js";

/**
 * Diverging color anchored at theta: doses estimated below target shade
 * toward blue, above target toward red, equal to target stays white.
 */
export function medianColor(median: number, theta: number): string {
  const span = median <= theta ? theta : 1 - theta;
  const t = Math.max(-1, Math.min(1, (median - theta) / (span || 1)));
  const lightness = 97 - 45 * Math.abs(t);
  return t <= 0 ? `hsl(215 65% ${lightness}%)` : `hsl(8 70% ${lightness}%)`;
}

/** Non-strict monotonicity along both axes; payload grids must satisfy it. */
export function monotoneAlongAxes(grid: number[][]): boolean {
  for (let i = 0; i < grid.length; i++) {
    for (let j = 0; j < grid[i].length; j++) {
      if (j + 1 < grid[i].length && grid[i][j] > grid[i][j + 1]) return false;
      if (i + 1 < grid.length && grid[i][j] > grid[i + 1][j]) return false;
    }
  }
  return true;
}

export interface HeatmapOptions {
  title?: string;
  /** Version the rest of the page believes is current; mismatch => stale. */
  expectedVersion?: number;
}

export function renderHeatmap(
  container: HTMLElement,
  posterior: PosteriorSummary,
  options: HeatmapOptions = {},
): void {
  container.innerHTML = "";
  container.classList.add("heatmap");

  if (options.title) {
    const h = document.createElement("h3");
    h.textContent = options.title;
    container.appendChild(h);
  }

  if (
    options.expectedVersion !== undefined &&
    options.expectedVersion !== posterior.state_version
  ) {
    const stale = document.createElement("div");
    stale.className = "warning stale-warning";
    stale.textContent =
      `Posterior shown is for state version ${posterior.state_version}, ` +
      `but the trial is at version ${options.expectedVersion}. Refresh to update.`;
    container.appendChild(stale);
  }

  if (!monotoneAlongAxes(posterior.medians)) {
    const broken = document.createElement("div");
    broken.className = "warning integrity-warning";
    broken.textContent =
      "Integrity warning: posterior medians are not monotone along the dose axes. " +
      "This should never happen; do not act on this display.";
    container.appendChild(broken);
  }

  const table = document.createElement("table");
  table.className = "heatmap-grid";
  const rows = posterior.medians.length;
  const cols = posterior.medians[0]?.length ?? 0;

  const header = document.createElement("tr");
  header.appendChild(document.createElement("th"));
  for (let j = 0; j < cols; j++) {
    const th = document.createElement("th");
    th.textContent = `B${j + 1}`;
    header.appendChild(th);
  }
  table.appendChild(header);

  // render top dose row first so agent-A levels read upward
  for (let i = rows - 1; i >= 0; i--) {
    const tr = document.createElement("tr");
    const th = document.createElement("th");
    th.textContent = `A${i + 1}`;
    tr.appendChild(th);
    for (let j = 0; j < cols; j++) {
      const td = document.createElement("td");
      td.className = "dose-cell";
      td.dataset.dose = `${i + 1},${j + 1}`;
      td.style.backgroundColor = medianColor(posterior.medians[i][j], posterior.theta);
      const inBand =
        posterior.ci_lower[i][j] <= posterior.theta &&
        posterior.theta <= posterior.ci_upper[i][j];
      if (inBand) td.classList.add("theta-band");
      td.title =
        `dose ${fmtDose([i + 1, j + 1])}  median ${fmtProb(posterior.medians[i][j])}  ` +
        `95% ${fmtInterval(posterior.ci_lower[i][j], posterior.ci_upper[i][j])}`;

      const median = document.createElement("div");
      median.className = "cell-median";
      median.textContent = fmtProb(posterior.medians[i][j]);
      const counts = document.createElement("div");
      counts.className = "cell-counts";
      counts.textContent = `n=${posterior.n[i][j]} z=${posterior.z[i][j]}`;
      td.appendChild(median);
      td.appendChild(counts);
      tr.appendChild(td);
    }
    table.appendChild(tr);
  }
  container.appendChild(table);

  const legend = document.createElement("div");
  legend.className = "heatmap-legend";
  legend.innerHTML =
    `<span class="swatch" style="background:${medianColor(0, posterior.theta)}"></span> below target ` +
    `<span class="swatch" style="background:${medianColor(posterior.theta, posterior.theta)}"></span> ` +
    `θ = ${fmtProb(posterior.theta)} ` +
    `<span class="swatch" style="background:${medianColor(1, posterior.theta)}"></span> above target; ` +
    `outlined cells: 95% interval covers θ`;
  container.appendChild(legend);

  const meta = document.createElement("div");
  meta.className = "heatmap-meta";
  const omega = posterior.omega === null ? "prior only (no data yet)" : `ω = ${fmtProb(posterior.omega)}`;
  meta.textContent =
    `${omega} · P(lowest dose too toxic) = ${fmtProb(posterior.tail_probability_lowest)} · ` +
    `state version ${posterior.state_version}`;
  container.appendChild(meta);
}
