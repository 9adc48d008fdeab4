/**
 * Typed client for the annotation service.
 *
 * The server is the source of truth for every rule decision; this module only
 * moves JSON. Decision POSTs are deduplicated in-flight per rule id so a
 * double-click produces a single request.
 */

export interface RulePayload {
  id: string;
  kind: "exact_match" | "range" | "contain" | "prompt";
  mu: number;
  iteration: number;
  attribute?: string | null;
  anchor_attribute?: string | null;
  rec_attribute?: string | null;
  direction?: string;
  side?: string | null;
  token?: string | null;
  prompt_text?: string | null;
}

export interface ExamplePair {
  pair_id: string;
  label: number;
  anchor: { id: string; name: string; attributes: Record<string, unknown>; description: string };
  rec: { id: string; name: string; attributes: Record<string, unknown>; description: string };
}

export interface CandidatePayload {
  rule: RulePayload;
  feature_index: number;
  examples: ExamplePair[];
}

export interface SessionPayload {
  iteration: number;
  budget: number;
  state: "open" | "finalized";
  candidates: CandidatePayload[];
  decisions: Record<string, { verdict: string; params: Record<string, string> }>;
}

export interface RunStatus {
  iteration: number;
  stage: string;
  done: boolean;
  error: string | null;
}

export interface DecisionBody {
  rule_id: string;
  verdict: string;
  params: Record<string, string>;
  annotator?: string;
}

export interface MetricsDoc {
  schema_version: number;
  seed: number;
  ablation: string;
  iterations: Array<Record<string, number>>;
  final: Record<string, unknown>;
}

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`${status}: ${detail}`);
  }
}

async function parse<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = await resp.json();
      detail = typeof body.detail === "string" ? body.detail : JSON.stringify(body);
    } catch {
      /* keep statusText */
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

export class AnnotationApi {
  private inflight = new Map<string, Promise<{ decided: number; pending: string[] }>>();

  constructor(private base: string = "") {}

  status(): Promise<RunStatus> {
    return fetch(`${this.base}/api/run/status`).then((r) => parse<RunStatus>(r));
  }

  session(): Promise<SessionPayload> {
    return fetch(`${this.base}/api/sessions/current`).then((r) => parse<SessionPayload>(r));
  }

  candidates(): Promise<CandidatePayload[]> {
    return fetch(`${this.base}/api/sessions/current/candidates`).then((r) =>
      parse<CandidatePayload[]>(r),
    );
  }

  /** POST one decision; concurrent submissions for the same rule share one request. */
  submitDecision(body: DecisionBody): Promise<{ decided: number; pending: string[] }> {
    const existing = this.inflight.get(body.rule_id);
    if (existing) return existing;
    const request = fetch(`${this.base}/api/sessions/current/decisions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    })
      .then((r) => parse<{ decided: number; pending: string[] }>(r))
      .finally(() => this.inflight.delete(body.rule_id));
    this.inflight.set(body.rule_id, request);
    return request;
  }

  finalize(): Promise<{ accepted: RulePayload[] }> {
    return fetch(`${this.base}/api/sessions/current/finalize`, { method: "POST" }).then((r) =>
      parse<{ accepted: RulePayload[] }>(r),
    );
  }

  metrics(): Promise<MetricsDoc> {
    return fetch(`${this.base}/api/metrics`).then((r) => parse<MetricsDoc>(r));
  }
}
