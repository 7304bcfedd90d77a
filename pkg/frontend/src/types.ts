// Payload shapes of the trial service /v1 API. The dashboard renders these
// verbatim: every number on screen comes from one of these documents.

export interface Dims {
  n_rows: number;
  n_cols: number;
}

export interface Allocation {
  patient: number;
  dose: [number, number];
}

export interface TrialStatus {
  trial_id: string;
  status: TrialPhase;
  state_version: number;
  cohort: number;
  enrolled: number;
  n_allocated: number;
  n_max: number;
  theta: number;
  dims: Dims;
  pending: Allocation[];
  current_pair: [number, number][] | null;
  n: number[][];
  z: number[][];
  created_at: string;
  updated_at: string;
  n_events: number;
}

export type TrialPhase = "running" | "stopped_for_toxicity" | "completed";

export interface PosteriorSummary {
  state_version: number;
  theta: number;
  omega: number | null;
  medians: number[][];
  variances: number[][];
  ci_lower: number[][];
  ci_upper: number[][];
  tail_probability_lowest: number;
  n: number[][];
  z: number[][];
}

export interface RecommendationDiagnostics {
  toxic_scenario: boolean;
  window_lower: number;
  window_upper: number;
  path: "multi" | "single" | "none";
}

export interface RecommendationDoc {
  state_version: number;
  status: TrialPhase;
  recommended: [number, number][];
  diagnostics: RecommendationDiagnostics;
}

export interface TransitionDoc {
  trial_id: string;
  hypothetical: boolean;
  state_version: number;
  status: TrialPhase;
  stopped: boolean;
  progress: string;
  posterior: PosteriorSummary;
  next_allocations: Allocation[] | null;
  recommendation: RecommendationDoc | null;
}

export interface WhatIfCurrentDoc {
  trial_id: string;
  hypothetical: true;
  state_version: number;
  status: TrialPhase;
  posterior: PosteriorSummary;
}

export interface CreateDoc {
  trial_id: string;
  status: TrialPhase;
  state_version: number;
  cohort: number;
  allocations: Allocation[];
  dims: Dims;
  created_at: string;
}

export interface TrialEventDoc {
  seq: number;
  kind: "allocation" | "outcome" | "stop_check" | "termination";
  cohort: number;
  payload: Record<string, unknown>;
}

export interface EventsDoc {
  trial_id: string;
  count: number;
  events: TrialEventDoc[];
}

export interface OutcomeEntry {
  dose: [number, number];
  dlt: boolean;
}

export interface CreateRequest {
  preset?: string;
  config?: Record<string, unknown>;
  prior?: { n_rows: number; n_cols: number; alpha: number[]; beta: number[] };
  recommender?: Record<string, unknown>;
  seed?: number;
}
