// App bootstrap: three views (Conduct, Tables, Simulate) over the /v1 API.
// All statistics arrive from the server; this file only wires events and
// re-renders.

import { ApiClient, designToConfig, type FixedScenario, type JobStatus } from "./api.js";
import {
  currentDose,
  exportSession,
  historyToData,
  importSession,
  initialState,
  validateCohort,
  validateDesign,
  type SessionState,
} from "./state.js";
import { renderConduct, renderSimulate, renderTable } from "./views.js";

const api = new ApiClient(
  (window as unknown as { SKBD_API?: string }).SKBD_API ?? "http://127.0.0.1:8321",
);

const state: SessionState = initialState();
let activeView: "conduct" | "tables" | "simulate" = "conduct";
let scenarios: FixedScenario[] = [];
let simSelected = 16;
let simReplicates = 1000;
let simSeed = 42;
const csvCache = new Map<string, string>();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function designFromForm(): void {
  const read = (id: string) => Number((el<HTMLInputElement>(id)).value);
  state.design = {
    ...state.design,
    phi: read("design-phi"),
    eps1: read("design-eps1"),
    eps2: read("design-eps2"),
    cohortSize: read("design-cohort"),
    maxN: read("design-maxn"),
    eliminationCutoff: read("design-cutoff"),
    doses: read("design-doses"),
    kernelKind: el<HTMLSelectElement>("design-kernel").value as
      | "asymmetric"
      | "symmetric"
      | "kronecker",
    kLower: read("design-klower"),
    kUpper: read("design-kupper"),
  };
}

async function refreshDecision(): Promise<void> {
  if (!state.history.length) {
    state.decision = null;
    state.insertion = null;
    return;
  }
  const data = historyToData(state.history, state.design.doses);
  const config = designToConfig(state.design);
  state.decision = await api.decision(config, data, currentDose(state.history));
  const insertionConfig = { ...config, insertion: { enabled: true } };
  const doses = Array.from({ length: state.design.doses }, (_, j) => j + 1);
  try {
    state.insertion = await api.insertionCheck(
      insertionConfig,
      data,
      currentDose(state.history),
      doses,
    );
  } catch {
    state.insertion = null;
  }
}

async function refreshTable(): Promise<void> {
  const problem = validateDesign(state.design);
  if (problem) {
    state.table = null;
    renderTables(problem);
    return;
  }
  const data = historyToData(state.history, state.design.doses);
  const current = currentDose(state.history);
  const context = { ...data };
  context.n = [...data.n];
  context.y = [...data.y];
  context.n[current - 1] = 0;
  context.y[current - 1] = 0;
  state.table = await api.table(designToConfig(state.design), {
    context,
    current,
    nRange: [1, 18],
  });
  renderTables(null);
}

function renderConductView(): void {
  el("view-conduct").innerHTML = renderConduct(state);
  const form = el<HTMLFormElement>("cohort-form");
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const entry = {
      dose: Number(el<HTMLInputElement>("cohort-dose").value),
      n: Number(el<HTMLInputElement>("cohort-n").value),
      y: Number(el<HTMLInputElement>("cohort-y").value),
    };
    const problem = validateCohort(entry, state.design.doses);
    if (problem) {
      state.error = problem;
      renderConductView();
      return;
    }
    state.error = null;
    state.history.push(entry);
    try {
      await refreshDecision();
      await refreshTable();
    } catch (err) {
      state.history.pop();
      state.error = String(err instanceof Error ? err.message : err);
    }
    renderConductView();
  });
  for (const button of document.querySelectorAll<HTMLButtonElement>(".remove-cohort")) {
    button.addEventListener("click", async () => {
      state.history.splice(Number(button.dataset.index), 1);
      try {
        await refreshDecision();
        await refreshTable();
        state.error = null;
      } catch (err) {
        state.error = String(err instanceof Error ? err.message : err);
      }
      renderConductView();
    });
  }
  el("export-session").addEventListener("click", () => {
    download("skbd-session.json", exportSession(state), "application/json");
  });
  el<HTMLInputElement>("import-session").addEventListener("change", async (event) => {
    const input = event.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file) return;
    try {
      const session = importSession(await file.text());
      state.design = session.design;
      state.history = session.history;
      await refreshDecision();
      await refreshTable();
      state.error = null;
    } catch (err) {
      state.error = String(err instanceof Error ? err.message : err);
    }
    renderConductView();
  });
}

function renderTables(error: string | null): void {
  el("view-tables").innerHTML = renderTable(state.table, error);
}

function renderSimulateView(): void {
  el("view-simulate").innerHTML = renderSimulate({
    scenarios,
    jobs: state.jobs,
    selected: simSelected,
    replicates: simReplicates,
    seed: simSeed,
  });
  el<HTMLFormElement>("simulate-form").addEventListener("submit", async (event) => {
    event.preventDefault();
    simSelected = Number(el<HTMLSelectElement>("sim-scenario").value);
    simReplicates = Number(el<HTMLInputElement>("sim-replicates").value);
    simSeed = Number(el<HTMLInputElement>("sim-seed").value);
    const submitted = await api.submitSimulation({
      config: designToConfig(state.design),
      fixed_scenario: simSelected,
      replicates: simReplicates,
      seed: simSeed,
    });
    const pending: JobStatus = {
      id: submitted.id,
      status: "queued",
      progress: 0,
    };
    state.jobs.unshift(pending);
    renderSimulateView();
    void api.pollJob(submitted.id, {
      onProgress: (job) => {
        const index = state.jobs.findIndex((existing) => existing.id === job.id);
        if (index >= 0) state.jobs[index] = job;
        if (job.status === "done" && job.result) {
          csvCache.set(job.id, job.result.csv);
        }
        if (activeView === "simulate") renderSimulateView();
      },
    });
  });
  for (const button of document.querySelectorAll<HTMLButtonElement>(".download-csv")) {
    button.addEventListener("click", () => {
      const id = button.dataset.job ?? "";
      const csv = csvCache.get(id);
      if (csv !== undefined) download(`skbd-oc-${id.slice(0, 8)}.csv`, csv, "text/csv");
    });
  }
}

function download(filename: string, content: string, mime: string): void {
  const blob = new Blob([content], { type: mime });
  const url = URL.createObjectURL(blob);
  const link = document.createElement("a");
  link.href = url;
  link.download = filename;
  link.click();
  URL.revokeObjectURL(url);
}

function switchView(view: typeof activeView): void {
  activeView = view;
  for (const name of ["conduct", "tables", "simulate"] as const) {
    el(`view-${name}`).style.display = name === view ? "block" : "none";
    el(`tab-${name}`).classList.toggle("active", name === view);
  }
}

async function bootstrap(): Promise<void> {
  for (const name of ["conduct", "tables", "simulate"] as const) {
    el(`tab-${name}`).addEventListener("click", () => switchView(name));
  }
  el<HTMLFormElement>("design-form").addEventListener("change", async () => {
    designFromForm();
    try {
      await refreshDecision();
      await refreshTable();
      state.error = null;
    } catch (err) {
      state.error = String(err instanceof Error ? err.message : err);
    }
    renderConductView();
  });
  try {
    scenarios = await api.fixedScenarios();
  } catch {
    scenarios = [];
  }
  renderConductView();
  await refreshTable().catch((err) => renderTables(String(err)));
  renderSimulateView();
  switchView("conduct");
}

void bootstrap();
