/** Typed client for the evisynth service REST API.
 *
 * This module is the ONLY place the workbench talks to the network, and it
 * performs no domain computation: scores, rankings, and pooled values are
 * rendered exactly as the service returns them.
 */

export interface Problem {
  code: string;
  message: string;
  detail?: unknown;
}

/** HTTP error carrying the service's problem JSON verbatim. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly problem: Problem,
  ) {
    super(problem.message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

// ---------------------------------------------------------------- payloads

export interface Envelope<T> {
  name: string;
  version: number;
  stale: boolean;
  content: T;
}

export interface Pico {
  title: string;
  population: string;
  intervention: string;
  comparison: string;
  outcome: string;
}

export interface ArtifactHead {
  version: number;
  stale: boolean;
}

export interface DecisionEvent {
  kind: string;
  seq: number;
  [key: string]: unknown;
}

export interface ProjectState {
  id: string;
  pico: Pico;
  stage: string;
  artifacts: Record<string, ArtifactHead>;
  excluded_pmids: string[];
  decisions: DecisionEvent[];
  busy: boolean;
  active_job: string | null;
}

export interface Job {
  id: string;
  project_id: string;
  kind: string;
  params: Record<string, unknown>;
  status: string;
  progress: number | null;
  error: Problem | null;
  artifact: { name: string; version: number } | null;
}

export interface QueriesContent {
  initial: string[];
  terms_identified: string[];
  terms_filtered: string[];
  final: string;
  added_terms: string[];
  context_pmids: string[];
  executable?: string[];
}

export interface StudyRecord {
  pmid: string;
  title: string;
  abstract: string;
  year: number | null;
  mesh_terms: string[];
}

export interface StudiesContent {
  pmids: string[];
  studies: StudyRecord[];
  per_query: { query: string; total: number }[];
}

export interface Criterion {
  id: string;
  text: string;
  aspect: string;
  enabled: boolean;
}

export interface CriteriaContent {
  criteria: Criterion[];
  warnings: string[];
}

export interface RankEntry {
  pmid: string;
  score: number;
}

export interface Strategy {
  kind: "sum" | "weighted" | "masked";
  weights: Record<string, number>;
  excluded: string[];
}

export interface ScreeningContent {
  matrix: {
    study_ids: string[];
    criterion_ids: string[];
    labels: number[][];
    rationales: string[][];
  };
  ranking: { entries: RankEntry[]; tiebreak_trace: string };
  strategy: Strategy;
}

export interface CellValue {
  kind: "text" | "number" | "categorical" | "missing";
  text: string;
  number: number | null;
  unit: string;
}

export interface ExtractedCell {
  field: string;
  value: CellValue;
  chunk_refs: string[];
  rationale: string;
}

export interface ExtractionContent {
  fields: { name: string; description: string; kind: string }[];
  rows: { pmid: string; cells: ExtractedCell[]; violations: unknown[]; warnings: string[] }[];
}

export interface Chunk {
  id: string;
  section_path: string;
  text: string;
}

export interface DocumentChunks {
  pmid: string;
  chunks: Chunk[];
}

export interface EffectRowContent {
  pmid: string;
  status: string;
  findings: { values: { name: string; value: number; unit: string; chunk_ref: string }[] };
  program: string;
  row: Record<string, unknown> | null;
  warnings: string[];
}

export interface ResultsContent {
  outcome: { endpoint: string; cohort: string; effect_kind: string };
  rows: EffectRowContent[];
}

export interface PooledContent {
  method: string;
  pooled: {
    estimate: number;
    se: number;
    ci_low: number;
    ci_high: number;
    exp_estimate: number;
    exp_ci_low: number;
    exp_ci_high: number;
    k: number;
    q: number;
    df: number;
    i2: number;
    tau2: number;
    method: string;
    weights: Record<string, number>;
  };
  estimates: { pmid: string; log_rr: number; se: number }[];
  excluded: string[];
  corrected_pmids: string[];
}

export type Decision = Record<string, unknown> & { kind: string };

// ---------------------------------------------------------------- client

async function problemOf(res: Response): Promise<Problem> {
  try {
    const body = (await res.json()) as Problem;
    if (body && typeof body.code === "string" && typeof body.message === "string") {
      return body;
    }
  } catch {
    // fall through to the synthetic problem
  }
  return { code: `http_${res.status}`, message: res.statusText || `HTTP ${res.status}` };
}

export class Api {
  constructor(
    private readonly fetchImpl: FetchLike,
    readonly base = "",
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchImpl(this.base + path, init);
    if (!res.ok) {
      throw new ApiError(res.status, await problemOf(res));
    }
    return (await res.json()) as T;
  }

  private json(method: string, body: unknown): RequestInit {
    return {
      method,
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    };
  }

  listProjects(): Promise<{ projects: string[] }> {
    return this.request("/projects");
  }

  createProject(pico: Pico): Promise<{ id: string; stage: string }> {
    return this.request("/projects", this.json("POST", { pico }));
  }

  getProject(id: string): Promise<ProjectState> {
    return this.request(`/projects/${id}`);
  }

  submitJob(id: string, kind: string): Promise<Job> {
    return this.request(`/projects/${id}/jobs`, this.json("POST", { kind }));
  }

  getJob(jobId: string): Promise<Job> {
    return this.request(`/jobs/${jobId}`);
  }

  postDecision(id: string, decision: Decision): Promise<DecisionEvent> {
    return this.request(`/projects/${id}/decisions`, this.json("POST", decision));
  }

  putArtifact(id: string, segment: string, content: unknown): Promise<{ seq: number; version: number }> {
    return this.request(`/projects/${id}/${segment}`, this.json("PUT", content));
  }

  queries(id: string): Promise<Envelope<QueriesContent>> {
    return this.request(`/projects/${id}/queries`);
  }

  studies(id: string): Promise<Envelope<StudiesContent> & { excluded_pmids: string[] }> {
    return this.request(`/projects/${id}/studies`);
  }

  criteria(id: string): Promise<Envelope<CriteriaContent>> {
    return this.request(`/projects/${id}/criteria`);
  }

  matrix(id: string): Promise<Envelope<ScreeningContent>> {
    return this.request(`/projects/${id}/matrix`);
  }

  extraction(id: string): Promise<Envelope<ExtractionContent>> {
    return this.request(`/projects/${id}/extraction`);
  }

  effects(id: string): Promise<Envelope<ResultsContent>> {
    return this.request(`/projects/${id}/effects`);
  }

  pooled(id: string): Promise<Envelope<PooledContent>> {
    return this.request(`/projects/${id}/pooled`);
  }

  document(id: string, pmid: string): Promise<DocumentChunks> {
    return this.request(`/projects/${id}/documents/${pmid}`);
  }

  /** The forest plot stays a server-rendered SVG; the UI never redraws it. */
  forestUrl(id: string): string {
    return `${this.base}/projects/${id}/forest.svg`;
  }
}
