/** Thin typed client for the tweezerlab HTTP API.
 *
 * All scoring is server-side; this client never computes fidelity.  Error
 * responses carry `{error: string}` and are surfaced verbatim through
 * `ApiError` so the UI can show field-level validation messages.
 */

import type {
  LeaderboardEntry,
  Problem,
  ProtocolDoc,
  ScoreResult,
  SubmitResult,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export interface ScoreOptions {
  frames?: boolean;
  frame_stride?: number;
  levels?: number;
}

export interface SubmitOptions {
  name?: string;
  source?: string;
  entryId?: string;
  /** Ignored by the server (recomputed); present so the adversarial test
   * can demonstrate that. */
  claimedFidelity?: number;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class Client {
  constructor(
    private readonly base: string,
    private readonly fetchFn: FetchLike = (...a) => fetch(...a),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.base + path, init);
    let body: unknown;
    try {
      body = await resp.json();
    } catch {
      throw new ApiError(resp.status, `malformed response (${resp.status})`);
    }
    if (!resp.ok) {
      const message =
        typeof body === "object" && body !== null && "error" in body
          ? String((body as { error: unknown }).error)
          : `request failed (${resp.status})`;
      throw new ApiError(resp.status, message);
    }
    return body as T;
  }

  problem(): Promise<Problem> {
    return this.request<Problem>("/api/problem");
  }

  score(protocol: ProtocolDoc, options?: ScoreOptions): Promise<ScoreResult> {
    const body: Record<string, unknown> = { protocol };
    if (options) body.options = options;
    return this.request<ScoreResult>("/api/score", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  submit(protocol: ProtocolDoc, options: SubmitOptions = {}): Promise<SubmitResult> {
    const body: Record<string, unknown> = { protocol };
    if (options.name !== undefined) body.name = options.name;
    if (options.source !== undefined) body.source = options.source;
    if (options.entryId !== undefined) body.entry_id = options.entryId;
    if (options.claimedFidelity !== undefined) body.fidelity = options.claimedFidelity;
    return this.request<SubmitResult>("/api/leaderboard", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async leaderboard(duration?: number): Promise<LeaderboardEntry[]> {
    const query = duration === undefined ? "" : `?duration=${duration}`;
    const doc = await this.request<{ entries: LeaderboardEntry[] }>(
      `/api/leaderboard${query}`,
    );
    return doc.entries;
  }
}
