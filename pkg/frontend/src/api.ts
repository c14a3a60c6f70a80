// Client for the classification service. The UI renders only fields present
// in PredictionResponse; no inference happens client-side.

export interface PredictionResponse {
  label_code: string;
  display_amharic: string;
  display_latin: string;
  probabilities: Record<string, number>;
  model_id: string;
  latency_ms?: number;
}

export interface HealthResponse {
  status: string;
  model_id: string;
}

export interface LabelEntry {
  code: string;
  display_amharic: string;
  display_latin: string;
}

export type ServiceErrorKind = "network" | "unrecognized" | "server";

export class ServiceError extends Error {
  readonly kind: ServiceErrorKind;
  readonly status?: number;

  constructor(kind: ServiceErrorKind, message: string, status?: number) {
    super(message);
    this.name = "ServiceError";
    this.kind = kind;
    this.status = status;
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class BirrClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async health(): Promise<HealthResponse> {
    const resp = await this.wrap(this.fetchFn(this.url("/health")));
    if (!resp.ok) {
      throw new ServiceError("server", `health check failed (${resp.status})`, resp.status);
    }
    return (await resp.json()) as HealthResponse;
  }

  async labels(): Promise<Record<string, LabelEntry>> {
    const resp = await this.wrap(this.fetchFn(this.url("/labels")));
    if (!resp.ok) {
      throw new ServiceError("server", `labels fetch failed (${resp.status})`, resp.status);
    }
    return (await resp.json()) as Record<string, LabelEntry>;
  }

  async classify(image: Blob | ArrayBuffer | Uint8Array<ArrayBuffer>): Promise<PredictionResponse> {
    const body = image instanceof Blob ? image : new Blob([image]);
    const resp = await this.wrap(this.fetchFn(this.url("/classify"), {
      method: "POST",
      body,
    }));
    if (resp.status === 422) {
      throw new ServiceError("unrecognized", "image not recognized", 422);
    }
    if (!resp.ok) {
      throw new ServiceError("server", `classify failed (${resp.status})`, resp.status);
    }
    return (await resp.json()) as PredictionResponse;
  }

  private async wrap(call: Promise<Response>): Promise<Response> {
    try {
      return await call;
    } catch (err) {
      throw new ServiceError("network", `service unreachable: ${String(err)}`);
    }
  }
}

export function topConfidence(resp: PredictionResponse): number {
  return resp.probabilities[resp.label_code] ?? 0;
}
