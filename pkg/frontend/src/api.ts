import type {
  BlockEntry,
  EntitySummary,
  NotificationBatch,
  OperatorAction,
  TimelineView,
} from "./types.js";

export class Unauthorized extends Error {}
export class NotFound extends Error {}
export class GatewayError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

/** Thin typed client over the gateway HTTP surface.  Holds no state
 * beyond connection settings; every fact the console shows comes from
 * these calls, so a refresh rebuilds the exact same view. */
export class GatewayClient {
  constructor(
    readonly baseUrl: string,
    readonly token: string,
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init: RequestInit = {}): Promise<T> {
    const headers = new Headers(init.headers);
    headers.set("Authorization", `Bearer ${this.token}`);
    const resp = await this.fetchFn(this.baseUrl + path, { ...init, headers });
    if (resp.status === 401) throw new Unauthorized(`401 for ${path}`);
    if (resp.status === 404) throw new NotFound(`404 for ${path}`);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        detail = (await resp.json()).detail ?? detail;
      } catch {
        // non-json error body, keep the status text
      }
      throw new GatewayError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  health(): Promise<{ status: string; entities: number; malformed: number }> {
    return this.request("/health");
  }

  async entities(): Promise<EntitySummary[]> {
    const doc = await this.request<{ entities: EntitySummary[] }>("/entities");
    return doc.entities;
  }

  timeline(id: string): Promise<TimelineView> {
    return this.request(`/entities/${encodeURIComponent(id)}/timeline`);
  }

  notifications(since: number, waitSeconds = 0): Promise<NotificationBatch> {
    return this.request(`/notifications?since=${since}&wait=${waitSeconds}`);
  }

  act(id: string, action: OperatorAction): Promise<unknown> {
    return this.request(`/entities/${encodeURIComponent(id)}/actions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ action }),
    });
  }

  async blocks(): Promise<BlockEntry[]> {
    const doc = await this.request<{ blocks: BlockEntry[] }>("/blocks");
    return doc.blocks;
  }

  postEvents(events: { format: string; line: string }[]): Promise<unknown> {
    return this.request("/events", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ events }),
    });
  }
}
