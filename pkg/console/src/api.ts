import type {
  ClustersPayload,
  EstimatesPayload,
  HealthPayload,
  Metric,
  ModelsPayload,
} from "./types.js";

export class ApiError extends Error {
  constructor(public readonly status: number, message: string) {
    super(message);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/**
 * Thin typed client over the read-only workspace API. The fetch function is
 * injectable so tests can run without a server.
 */
export class ApiClient {
  constructor(
    private readonly base: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async get<T>(path: string, signal?: AbortSignal): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchFn(this.base + path, { signal });
    } catch (err) {
      if ((err as Error).name === "AbortError") throw err;
      throw new ApiError(0, `API unreachable: ${(err as Error).message}`);
    }
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = (await resp.json()) as { error?: string };
        if (body.error) detail = body.error;
      } catch {
        /* non-JSON error body; keep the status text */
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  health(): Promise<HealthPayload> {
    return this.get<HealthPayload>("/api/health");
  }

  clusters(): Promise<ClustersPayload> {
    return this.get<ClustersPayload>("/api/clusters");
  }

  estimates(
    apiId: string,
    isoTimestamp: string,
    metric: Metric,
    signal?: AbortSignal,
  ): Promise<EstimatesPayload> {
    const t = encodeURIComponent(isoTimestamp);
    return this.get<EstimatesPayload>(
      `/api/clusters/${apiId}/estimates?t=${t}&metric=${metric}`,
      signal,
    );
  }

  models(): Promise<ModelsPayload> {
    return this.get<ModelsPayload>("/api/models");
  }
}
