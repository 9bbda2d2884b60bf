// Session state: the design draft, the editable cohort history, and the
// latest server responses. The cohort history is the source of truth; it
// replays to exactly the per-dose counts sent to the server, so reloading a
// saved session reproduces the identical recommendation sequence.

import type {
  DecisionResponse,
  DesignDraft,
  InsertionCheckResponse,
  JobStatus,
  TableResponse,
} from "./api.js";

export interface CohortEntry {
  dose: number; // 1-based dose level
  n: number;
  y: number;
}

export interface SessionState {
  design: DesignDraft;
  history: CohortEntry[];
  decision: DecisionResponse | null;
  insertion: InsertionCheckResponse | null;
  table: TableResponse | null;
  jobs: JobStatus[];
  error: string | null;
}

export const DEFAULT_DESIGN: DesignDraft = {
  phi: 0.3,
  eps1: 0.05,
  eps2: 0.05,
  cohortSize: 3,
  maxN: 30,
  eliminationCutoff: 0.95,
  kernelKind: "asymmetric",
  kLower: 0.2,
  kUpper: 0.8,
  doses: 5,
};

export function initialState(): SessionState {
  return {
    design: { ...DEFAULT_DESIGN },
    history: [],
    decision: null,
    insertion: null,
    table: null,
    jobs: [],
    error: null,
  };
}

export function validateCohort(
  entry: CohortEntry,
  doses: number,
): string | null {
  if (!Number.isInteger(entry.dose) || entry.dose < 1 || entry.dose > doses) {
    return `dose level must lie in 1..${doses}`;
  }
  if (!Number.isInteger(entry.n) || entry.n < 1) {
    return "patients treated must be a positive integer";
  }
  if (!Number.isInteger(entry.y) || entry.y < 0 || entry.y > entry.n) {
    return "DLT count must lie in 0..n";
  }
  return null;
}

/** Replay the cohort history into per-dose (n, y) vectors. */
export function historyToData(
  history: CohortEntry[],
  doses: number,
): { n: number[]; y: number[] } {
  const n = new Array(doses).fill(0);
  const y = new Array(doses).fill(0);
  for (const entry of history) {
    n[entry.dose - 1] += entry.n;
    y[entry.dose - 1] += entry.y;
  }
  return { n, y };
}

/** The dose level under study: the latest cohort's dose, else level 1. */
export function currentDose(history: CohortEntry[]): number {
  return history.length ? history[history.length - 1].dose : 1;
}

export function validateDesign(design: DesignDraft): string | null {
  if (!(design.phi > 0 && design.phi < 1)) return "phi must lie in (0, 1)";
  if (!(design.phi - design.eps1 > 0)) return "eps1 too large for phi";
  if (!(design.phi + design.eps2 < 1)) return "eps2 too large for phi";
  if (!(design.doses >= 2)) return "at least two dose levels";
  if (!(design.cohortSize >= 1)) return "cohort size must be positive";
  if (!(design.maxN >= design.cohortSize)) return "max sample below one cohort";
  if (
    !(design.eliminationCutoff > 0 && design.eliminationCutoff < 1)
  ) {
    return "elimination cutoff must lie in (0, 1)";
  }
  return null;
}

export interface SessionExport {
  design: DesignDraft;
  history: CohortEntry[];
}

export function exportSession(state: SessionState): string {
  const payload: SessionExport = {
    design: state.design,
    history: state.history,
  };
  return JSON.stringify(payload, null, 2);
}

export function importSession(text: string): SessionExport {
  const payload = JSON.parse(text) as Partial<SessionExport>;
  if (!payload || typeof payload !== "object" || !payload.design) {
    throw new Error("not a session export: missing design");
  }
  const design = { ...DEFAULT_DESIGN, ...payload.design };
  const history = Array.isArray(payload.history) ? payload.history : [];
  for (const entry of history) {
    const problem = validateCohort(entry, design.doses);
    if (problem) throw new Error(`invalid cohort in session: ${problem}`);
  }
  return { design, history };
}
