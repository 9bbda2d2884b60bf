// Typed client for the /v1 HTTP API. The UI performs no statistical
// computation: every number it renders arrives through these calls.

export interface DesignDraft {
  phi: number;
  eps1: number;
  eps2: number;
  cohortSize: number;
  maxN: number;
  eliminationCutoff: number;
  kernelKind: "asymmetric" | "symmetric" | "kronecker";
  kLower: number;
  kUpper: number;
  doses: number;
}

export interface KeyProb {
  lo: number;
  hi: number;
  probability: number;
}

export interface DecisionResponse {
  design: string;
  action: string;
  posterior: { alpha: number; beta: number };
  pseudo_counts: { y_prime: number; n_prime: number };
  keys: KeyProb[];
  strongest_key: number;
  target_key: number;
  density: { x: number[]; y: number[] };
  suspended?: boolean;
}

export interface TableRow {
  n: number;
  escalate_le: number | null;
  deescalate_ge: number | null;
  eliminate_ge: number | null;
}

export interface TableResponse {
  design: string;
  phi: number;
  rows: TableRow[];
}

export interface InsertionCheckResponse {
  design: string;
  trigger: string;
  reason?: string;
  interval_index?: number;
  proposed_dose?: number;
  proposed_std?: number;
  q_curve?: { dose: number; q: number }[];
}

export interface OcRow {
  scenario: string;
  design: string;
  replicates: number;
  seed: number;
  pcs: number;
  pca: number;
  above_mtd: number;
  rod: number;
  none_selected: number;
  modification_rate: number | null;
  inserted_mean: number | null;
  inserted_sd: number | null;
  inserted_selection: number | null;
  inserted_allocation: number | null;
  per_dose_selection: number[];
  per_dose_allocation: number[];
}

export interface JobResult {
  rows: OcRow[];
  csv: string;
  manifest: Record<string, unknown>;
}

export interface JobStatus {
  id: string;
  status: "queued" | "running" | "done" | "failed";
  progress: number;
  result?: JobResult;
  error?: string;
}

export interface FixedScenario {
  name: string;
  doses: number[];
  tox: number[];
  phi: number;
  mtd_index?: number;
}

export class ApiError extends Error {
  status: number;
  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

export function designToConfig(draft: DesignDraft): Record<string, unknown> {
  const kernel: Record<string, unknown> = { kind: draft.kernelKind };
  if (draft.kernelKind === "asymmetric") {
    kernel.k_lower = draft.kLower;
    kernel.k_upper = draft.kUpper;
  } else if (draft.kernelKind === "symmetric") {
    kernel.k_value = draft.kLower;
  }
  return {
    design: {
      phi: draft.phi,
      eps1: draft.eps1,
      eps2: draft.eps2,
      cohort_size: draft.cohortSize,
      max_n: draft.maxN,
      elimination_cutoff: draft.eliminationCutoff,
    },
    kernel,
  };
}

async function parseError(response: Response): Promise<never> {
  let message = `${response.status} ${response.statusText}`;
  try {
    const body = await response.json();
    if (typeof body.detail === "string") {
      message = body.detail;
    } else if (Array.isArray(body.detail)) {
      message = body.detail
        .map((item: { field?: string; message?: string }) =>
          item.field ? `${item.field}: ${item.message}` : `${item.message}`,
        )
        .join("; ");
    }
  } catch {
    // keep the HTTP status text
  }
  throw new ApiError(response.status, message);
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  private async get<T>(path: string): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`);
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string; version: string }> {
    return this.get("/v1/health");
  }

  fixedScenarios(): Promise<FixedScenario[]> {
    return this.get("/v1/scenarios/fixed");
  }

  decision(
    config: Record<string, unknown>,
    data: { n: number[]; y: number[] },
    current: number,
  ): Promise<DecisionResponse> {
    return this.post("/v1/decision", { config, data, current });
  }

  table(
    config: Record<string, unknown>,
    options: {
      context?: { n: number[]; y: number[] };
      doses?: number;
      current?: number;
      nRange?: [number, number];
    } = {},
  ): Promise<TableResponse> {
    return this.post("/v1/table", {
      config,
      context: options.context ?? null,
      doses: options.doses ?? 5,
      current: options.current ?? 1,
      n_range: options.nRange ?? [1, 18],
    });
  }

  insertionCheck(
    config: Record<string, unknown>,
    data: { n: number[]; y: number[] },
    current: number,
    doses: number[],
  ): Promise<InsertionCheckResponse> {
    return this.post("/v1/insertion/check", { config, data, current, doses });
  }

  submitSimulation(request: {
    config: Record<string, unknown>;
    fixed_scenario?: number;
    scenario?: Record<string, unknown>;
    replicates: number;
    seed: number;
  }): Promise<{ id: string; status: string }> {
    return this.post("/v1/simulations", request);
  }

  jobStatus(id: string): Promise<JobStatus> {
    return this.get(`/v1/simulations/${id}`);
  }

  async pollJob(
    id: string,
    options: { intervalMs?: number; timeoutMs?: number; onProgress?: (j: JobStatus) => void } = {},
  ): Promise<JobStatus> {
    const interval = options.intervalMs ?? 250;
    const deadline = Date.now() + (options.timeoutMs ?? 120_000);
    for (;;) {
      const job = await this.jobStatus(id);
      options.onProgress?.(job);
      if (job.status === "done" || job.status === "failed") return job;
      if (Date.now() > deadline) throw new ApiError(408, `job ${id} timed out`);
      await new Promise((resolve) => setTimeout(resolve, interval));
    }
  }
}
