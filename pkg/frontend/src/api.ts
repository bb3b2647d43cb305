/**
 * Typed client for the registration service.
 *
 * Every request is appended to `log` so tests can assert the endpoint
 * contract and request counts. Registration responses are cached by
 * (patient, source, target, method), so re-selecting a method never
 * re-POSTs; blend fetches are latest-wins (at most one in flight).
 */

import type { Method, ViewerState } from "./state.js";

/** The complete service surface this client is allowed to touch. */
export const API_SCHEMA: ReadonlyArray<{ method: string; pattern: RegExp }> = [
  { method: "GET", pattern: /^\/patients$/ },
  { method: "GET", pattern: /^\/patients\/[^/]+\/exams$/ },
  { method: "GET", pattern: /^\/patients\/[^/]+\/exams\/[^/]+\/landmarks$/ },
  { method: "POST", pattern: /^\/register$/ },
  { method: "GET", pattern: /^\/blend(\?.*)?$/ },
];

export interface RequestLogEntry {
  method: string;
  path: string;
}

export function matchesSchema(entry: RequestLogEntry): boolean {
  const pathOnly = entry.path.split("?")[0] ?? entry.path;
  return API_SCHEMA.some(
    (row) =>
      row.method === entry.method &&
      (row.pattern.test(entry.path) || row.pattern.test(pathOnly)),
  );
}

export interface ExamSummary {
  exam_id: string;
  date: string;
  modality: string;
  files: Record<string, string>;
}

export interface PatientSummary {
  patient_id: string;
  exams: ExamSummary[];
}

export interface TransformJson {
  scale: number;
  angle: number;
  pivot: [number, number];
  anchor: [number, number];
}

export interface RegistrationReport {
  transform: TransformJson;
  decomposition: Record<string, number> | null;
  residual_left: number;
  residual_right: number;
  psis_distance_sum: number;
}

export interface ApiErrorBody {
  status: number;
  code: string;
  message: string;
  stage?: string;
}

export class ApiError extends Error {
  constructor(readonly body: ApiErrorBody) {
    super(body.stage ? `[${body.stage}] ${body.message}` : body.message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  readonly log: RequestLogEntry[] = [];
  private readonly registerCache = new Map<string, Promise<RegistrationReport>>();
  private blendController: AbortController | null = null;

  constructor(
    private readonly fetchFn: FetchLike,
    private readonly base: string = "",
  ) {}

  private async request(method: string, path: string, body?: unknown, signal?: AbortSignal): Promise<Response> {
    this.log.push({ method, path });
    const resp = await this.fetchFn(this.base + path, {
      method,
      signal,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!resp.ok) {
      let parsed: ApiErrorBody;
      try {
        parsed = (await resp.json()) as ApiErrorBody;
      } catch {
        parsed = { status: resp.status, code: "unknown", message: resp.statusText };
      }
      throw new ApiError(parsed);
    }
    return resp;
  }

  async listPatients(): Promise<PatientSummary[]> {
    const resp = await this.request("GET", "/patients");
    return (await resp.json()) as PatientSummary[];
  }

  async listExams(patientId: string): Promise<ExamSummary[]> {
    const resp = await this.request("GET", `/patients/${encodeURIComponent(patientId)}/exams`);
    return (await resp.json()) as ExamSummary[];
  }

  async getLandmarks(patientId: string, examId: string): Promise<unknown> {
    const resp = await this.request(
      "GET",
      `/patients/${encodeURIComponent(patientId)}/exams/${encodeURIComponent(examId)}/landmarks`,
    );
    return resp.json();
  }

  /** POST /register, cached per (patient, source, target, method). */
  register(
    patientId: string,
    sourceExam: string,
    targetExam: string,
    method: Method,
  ): Promise<RegistrationReport> {
    const key = [patientId, sourceExam, targetExam, method].join("|");
    const hit = this.registerCache.get(key);
    if (hit) return hit;
    const pending = this.request("POST", "/register", {
      patient: patientId,
      source_exam: sourceExam,
      target_exam: targetExam,
      method,
    }).then(async (resp) => (await resp.json()) as RegistrationReport);
    pending.catch(() => this.registerCache.delete(key)); // don't cache failures
    this.registerCache.set(key, pending);
    return pending;
  }

  blendPath(state: ViewerState): string {
    const q = new URLSearchParams({
      patient: state.patient ?? "",
      target: state.target ?? "",
      sources: state.sources.join(","),
      alpha: state.alpha.toString(),
      method: state.method,
      overlay: state.overlay,
    });
    return `/blend?${q.toString()}`;
  }

  /** Fetch the blended PNG; a newer call aborts the one in flight. */
  async fetchBlend(state: ViewerState): Promise<Blob> {
    this.blendController?.abort();
    const controller = new AbortController();
    this.blendController = controller;
    const resp = await this.request("GET", this.blendPath(state), undefined, controller.signal);
    return resp.blob();
  }
}
