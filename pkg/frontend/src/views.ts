// Pure render functions: state in, HTML string out. Every number shown
// comes verbatim from a server response (the tests diff rendered output
// against direct API calls).

import type { JobStatus, OcRow, TableResponse } from "./api.js";
import { barChart, densityChart, qCurveChart } from "./charts.js";
import type { SessionState } from "./state.js";
import { historyToData } from "./state.js";

function esc(value: unknown): string {
  return String(value).replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/"/g, "&quot;");
}

function fmt(value: number | null | undefined, digits = 2): string {
  if (value === null || value === undefined) return "NA";
  return value.toFixed(digits);
}

const ACTION_LABELS: Record<string, string> = {
  escalate: "Escalate",
  stay: "Stay",
  de_escalate: "De-escalate",
  eliminate_and_de_escalate: "Eliminate & de-escalate",
  terminate: "Terminate trial",
};

export function actionLabel(action: string): string {
  return ACTION_LABELS[action] ?? action;
}

export function renderConduct(state: SessionState): string {
  const { design, history, decision, insertion } = state;
  const data = historyToData(history, design.doses);
  const historyRows = history
    .map(
      (entry, i) =>
        `<tr><td>${i + 1}</td><td>${entry.dose}</td><td>${entry.n}</td><td>${entry.y}</td>
         <td><button class="remove-cohort" data-index="${i}">remove</button></td></tr>`,
    )
    .join("");
  const totals = data.n
    .map((n, j) => `<td>${n}${data.y[j] ? ` <span class="dlt">(${data.y[j]} DLT)</span>` : ""}</td>`)
    .join("");

  let panel = `<p class="muted">Enter the first cohort's outcomes to get a recommendation.</p>`;
  if (decision) {
    const pc = decision.pseudo_counts;
    const strongest = decision.keys[decision.strongest_key];
    const target = decision.keys[decision.target_key];
    panel = `
      <div class="recommendation action-${esc(decision.action)}">
        <div class="action-line" id="action-line">${actionLabel(decision.action)}${
          decision.suspended ? " (escalation suspended)" : ""
        }</div>
        <dl>
          <dt>Pseudo-counts</dt><dd id="pseudo-counts">y' = ${fmt(pc.y_prime)}, n' = ${fmt(pc.n_prime)}</dd>
          <dt>Posterior</dt><dd>Beta(${fmt(decision.posterior.alpha, 3)}, ${fmt(decision.posterior.beta, 3)})</dd>
          <dt>Strongest key</dt><dd id="strongest-key">(${fmt(strongest.lo)}, ${fmt(strongest.hi)}) p=${fmt(
            strongest.probability,
            3,
          )}</dd>
          <dt>Target key</dt><dd id="target-key">(${fmt(target.lo)}, ${fmt(target.hi)}) p=${fmt(
            target.probability,
            3,
          )}</dd>
        </dl>
        ${densityChart(decision)}
      </div>`;
  }

  let insertionPanel = "";
  if (insertion && insertion.trigger !== "none") {
    const dose = insertion.proposed_dose;
    insertionPanel = `
      <div class="insertion-prompt">
        <strong>Dose-insertion prompt:</strong> ${esc(insertion.trigger)}
        ${dose !== undefined ? ` &mdash; proposed dose <b id="proposed-dose">${fmt(dose, 1)} mg</b>` : ""}
        ${insertion.q_curve && dose !== undefined ? qCurveChart(insertion.q_curve, dose) : ""}
      </div>`;
  }

  return `
  <section class="conduct">
    <form id="cohort-form">
      <label>Dose level <input name="dose" id="cohort-dose" type="number" min="1" max="${design.doses}" value="${Math.min(
        design.doses,
        (history.length ? history[history.length - 1].dose : 1),
      )}"></label>
      <label>Patients <input name="n" id="cohort-n" type="number" min="1" value="${design.cohortSize}"></label>
      <label>DLTs <input name="y" id="cohort-y" type="number" min="0" value="0"></label>
      <button type="submit">Submit cohort</button>
      <span id="cohort-error" class="error">${esc(state.error ?? "")}</span>
    </form>
    <table class="history">
      <thead><tr><th>Cohort</th><th>Dose</th><th>n</th><th>DLTs</th><th></th></tr></thead>
      <tbody>${historyRows}</tbody>
    </table>
    <table class="totals">
      <thead><tr>${data.n.map((_, j) => `<th>d${j + 1}</th>`).join("")}</tr></thead>
      <tbody><tr>${totals}</tr></tbody>
    </table>
    ${insertionPanel}
    ${panel}
    <div class="session-io">
      <button id="export-session">Export session</button>
      <label class="import-label">Import session <input type="file" id="import-session"></label>
    </div>
  </section>`;
}

export function renderTable(table: TableResponse | null, error: string | null): string {
  if (error) return `<p class="error">${esc(error)}</p>`;
  if (!table) return `<p class="muted">Decision table loads once the design is valid.</p>`;
  const cell = (value: number | null) =>
    value === null ? `<td class="na">NA</td>` : `<td>${value}</td>`;
  const header = table.rows.map((row) => `<th>${row.n}</th>`).join("");
  const esc_ = table.rows.map((row) => cell(row.escalate_le)).join("");
  const dee = table.rows.map((row) => cell(row.deescalate_ge)).join("");
  const eli = table.rows.map((row) => cell(row.eliminate_ge)).join("");
  return `
  <section class="table-view">
    <h3 id="table-title">${esc(table.design)} boundaries (target rate ${table.phi})</h3>
    <table class="boundaries" id="boundary-table">
      <tr><th>Number treated</th>${header}</tr>
      <tr><th>Escalate if #DLT &le;</th>${esc_}</tr>
      <tr><th>De-escalate if #DLT &ge;</th>${dee}</tr>
      <tr><th>Eliminate if #DLT &ge;</th>${eli}</tr>
    </table>
  </section>`;
}

export function renderSimulate(state: {
  scenarios: { name: string; tox: number[]; phi: number }[];
  jobs: JobStatus[];
  selected: number;
  replicates: number;
  seed: number;
}): string {
  const options = state.scenarios
    .map(
      (sc, i) =>
        `<option value="${i + 1}" ${i + 1 === state.selected ? "selected" : ""}>${esc(sc.name)} (phi=${sc.phi})</option>`,
    )
    .join("");
  const jobs = state.jobs.map((job) => renderJob(job)).join("");
  return `
  <section class="simulate">
    <form id="simulate-form">
      <label>Scenario <select id="sim-scenario">${options}</select></label>
      <label>Replicates <input id="sim-replicates" type="number" min="1" value="${state.replicates}"></label>
      <label>Seed <input id="sim-seed" type="number" min="0" value="${state.seed}"></label>
      <button type="submit" id="sim-launch">Run simulation</button>
    </form>
    <div id="jobs">${jobs}</div>
  </section>`;
}

export function renderJob(job: JobStatus): string {
  const progress = Math.round(job.progress * 100);
  let body = "";
  if (job.status === "failed") {
    body = `<p class="error">${esc(job.error ?? "failed")}</p>`;
  } else if (job.status === "done" && job.result) {
    body = renderOcResult(job.result.rows) +
      `<button class="download-csv" data-job="${esc(job.id)}">Download CSV</button>`;
  }
  return `
  <div class="job" data-job="${esc(job.id)}">
    <div class="job-head">
      <span class="job-id">${esc(job.id.slice(0, 8))}</span>
      <span class="job-status status-${esc(job.status)}">${esc(job.status)}</span>
      <progress max="100" value="${progress}"></progress><span>${progress}%</span>
    </div>
    ${body}
  </div>`;
}

export function renderOcResult(rows: OcRow[]): string {
  const insertion = rows.some((row) => row.modification_rate !== null);
  const header =
    `<tr><th>Scenario</th><th>Design</th><th>PCS</th><th>PCA</th><th>Above MTD</th><th>ROD</th><th>None</th>` +
    (insertion
      ? `<th>Modification</th><th>Inserted mean (SD)</th><th>Inserted sel.</th><th>Inserted alloc.</th>`
      : "") +
    `</tr>`;
  const body = rows
    .map(
      (row) =>
        `<tr><td>${esc(row.scenario)}</td><td>${esc(row.design)}</td>` +
        `<td class="pcs">${fmt(row.pcs, 1)}</td><td>${fmt(row.pca, 1)}</td>` +
        `<td>${fmt(row.above_mtd, 1)}</td><td>${fmt(row.rod, 1)}</td><td>${fmt(row.none_selected, 1)}</td>` +
        (insertion
          ? `<td>${fmt(row.modification_rate, 2)}</td><td>${fmt(row.inserted_mean, 2)} (${fmt(
              row.inserted_sd,
              2,
            )})</td><td>${fmt(row.inserted_selection, 2)}</td><td>${fmt(row.inserted_allocation, 2)}</td>`
          : "") +
        `</tr>`,
    )
    .join("");
  const charts = rows
    .map((row) =>
      barChart(
        row.per_dose_selection.map((value, j) => ({ label: `d${j + 1}`, value })),
        `${row.design}: selection % by dose`,
      ) +
      barChart(
        row.per_dose_allocation.map((value, j) => ({ label: `d${j + 1}`, value })),
        `${row.design}: patient % by dose`,
        "#6a1b9a",
      ),
    )
    .join("");
  return `<table class="oc-table" id="oc-table">${header}${body}</table><div class="oc-charts">${charts}</div>`;
}
