// Thin fetch client for the trial service. Every mutating call carries an
// Idempotency-Key; callers hold one key per intended state transition so a
// retry (or double click) can never apply twice.

import type {
  CreateDoc,
  CreateRequest,
  EventsDoc,
  OutcomeEntry,
  PosteriorSummary,
  RecommendationDoc,
  TransitionDoc,
  TrialStatus,
  WhatIfCurrentDoc,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly detail: unknown;

  constructor(status: number, detail: unknown) {
    super(typeof detail === "string" ? detail : `request failed with ${status}`);
    this.status = status;
    this.detail = detail;
  }
}

/** Network-level failure (server unreachable), distinct from an API error. */
export class OfflineError extends Error {
  constructor(cause: unknown) {
    super("service unreachable");
    this.cause = cause;
  }
}

export function newIdempotencyKey(): string {
  return crypto.randomUUID();
}

/** The surface components depend on; TrialApi is the HTTP implementation. */
export interface TrialClient {
  createTrial(body: CreateRequest, idempotencyKey: string): Promise<CreateDoc>;
  getTrial(trialId: string): Promise<TrialStatus>;
  submitCohort(
    trialId: string,
    outcomes: OutcomeEntry[],
    idempotencyKey: string,
  ): Promise<TransitionDoc>;
  whatIf(trialId: string, outcomes: OutcomeEntry[]): Promise<TransitionDoc | WhatIfCurrentDoc>;
  getPosterior(trialId: string): Promise<PosteriorSummary>;
  getRecommendation(trialId: string): Promise<RecommendationDoc>;
  getEvents(trialId: string): Promise<EventsDoc>;
}

async function parseBody(response: Response): Promise<unknown> {
  const text = await response.text();
  try {
    return text ? JSON.parse(text) : null;
  } catch {
    return text;
  }
}

export class TrialApi implements TrialClient {
  constructor(
    private readonly base: string = "",
    private readonly token: string | null = null,
  ) {}

  private headers(idempotencyKey?: string): Record<string, string> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token !== null) headers["Authorization"] = `Bearer ${this.token}`;
    if (idempotencyKey !== undefined) headers["Idempotency-Key"] = idempotencyKey;
    return headers;
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    idempotencyKey?: string,
  ): Promise<T> {
    let response: Response;
    try {
      response = await fetch(`${this.base}/v1${path}`, {
        method,
        headers: this.headers(idempotencyKey),
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new OfflineError(err);
    }
    const parsed = await parseBody(response);
    if (!response.ok) {
      const detail =
        parsed !== null && typeof parsed === "object" && "detail" in parsed
          ? (parsed as { detail: unknown }).detail
          : parsed;
      throw new ApiError(response.status, detail);
    }
    return parsed as T;
  }

  createTrial(body: CreateRequest, idempotencyKey: string): Promise<CreateDoc> {
    return this.request<CreateDoc>("POST", "/trials", body, idempotencyKey);
  }

  getTrial(trialId: string): Promise<TrialStatus> {
    return this.request<TrialStatus>("GET", `/trials/${trialId}`);
  }

  submitCohort(
    trialId: string,
    outcomes: OutcomeEntry[],
    idempotencyKey: string,
  ): Promise<TransitionDoc> {
    return this.request<TransitionDoc>(
      "POST",
      `/trials/${trialId}/cohorts`,
      { outcomes },
      idempotencyKey,
    );
  }

  whatIf(trialId: string, outcomes: OutcomeEntry[]): Promise<TransitionDoc | WhatIfCurrentDoc> {
    return this.request("POST", `/trials/${trialId}/what-if`, { outcomes });
  }

  getPosterior(trialId: string): Promise<PosteriorSummary> {
    return this.request<PosteriorSummary>("GET", `/trials/${trialId}/posterior`);
  }

  getRecommendation(trialId: string): Promise<RecommendationDoc> {
    return this.request<RecommendationDoc>("GET", `/trials/${trialId}/recommendation`);
  }

  getEvents(trialId: string): Promise<EventsDoc> {
    return this.request<EventsDoc>("GET", `/trials/${trialId}/events`);
  }
}
