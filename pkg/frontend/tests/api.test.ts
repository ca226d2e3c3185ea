import { describe, expect, it } from "vitest";

import { GatewayClient, GatewayError, NotFound, Unauthorized } from "../src/api.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

/* Records every call and replays a canned response per invocation. */
function recordingFetch(...responses: (Response | Error)[]) {
  const calls: { url: string; init: RequestInit }[] = [];
  const fetchFn = async (input: string | URL | Request, init: RequestInit = {}) => {
    calls.push({ url: String(input), init });
    const next = responses.shift();
    if (!next) throw new Error("fetch stub exhausted");
    if (next instanceof Error) throw next;
    return next;
  };
  return { calls, fetchFn: fetchFn as typeof fetch };
}

describe("GatewayClient", () => {
  it("sends the bearer token and parses the body", async () => {
    const { calls, fetchFn } = recordingFetch(
      jsonResponse({ status: "ok", entities: 3, malformed: 0 }),
    );
    const client = new GatewayClient("http://gw:1", "sekrit", fetchFn);
    const health = await client.health();

    expect(health.entities).toBe(3);
    expect(calls[0].url).toBe("http://gw:1/health");
    const headers = new Headers(calls[0].init.headers);
    expect(headers.get("authorization")).toBe("Bearer sekrit");
  });

  it("maps 401 to Unauthorized", async () => {
    const { fetchFn } = recordingFetch(new Response("denied", { status: 401 }));
    const client = new GatewayClient("http://gw:1", "bad", fetchFn);
    await expect(client.entities()).rejects.toBeInstanceOf(Unauthorized);
  });

  it("maps 404 to NotFound", async () => {
    const { fetchFn } = recordingFetch(new Response("nope", { status: 404 }));
    const client = new GatewayClient("http://gw:1", "tok", fetchFn);
    await expect(client.timeline("ip:10.0.0.9")).rejects.toBeInstanceOf(NotFound);
  });

  it("surfaces other failures as GatewayError with the server detail", async () => {
    const { fetchFn } = recordingFetch(jsonResponse({ detail: "blocked target is invalid" }, 400));
    const client = new GatewayClient("http://gw:1", "tok", fetchFn);
    const err = await client.act("ip:1.2.3.4", "confirm_block").catch((e: unknown) => e);

    expect(err).toBeInstanceOf(GatewayError);
    expect((err as GatewayError).status).toBe(400);
    expect((err as GatewayError).message).toBe("blocked target is invalid");
  });

  it("falls back to the status text for non-json error bodies", async () => {
    const { fetchFn } = recordingFetch(
      new Response("<html>boom</html>", { status: 502, statusText: "Bad Gateway" }),
    );
    const client = new GatewayClient("http://gw:1", "tok", fetchFn);
    const err = await client.health().catch((e: unknown) => e);
    expect((err as GatewayError).message).toBe("Bad Gateway");
  });

  it("unwraps the entities envelope", async () => {
    const summary = {
      id: "ip:10.150.2.21",
      status: "normal",
      alert_count: 2,
      last_ts: null,
      decision: null,
      escalated: false,
    };
    const { fetchFn } = recordingFetch(jsonResponse({ entities: [summary] }));
    const client = new GatewayClient("http://gw:1", "tok", fetchFn);
    expect(await client.entities()).toEqual([summary]);
  });

  it("percent-encodes entity ids in paths", async () => {
    const { calls, fetchFn } = recordingFetch(jsonResponse({}));
    const client = new GatewayClient("http://gw:1", "tok", fetchFn);
    await client.timeline("ip:203.0.113.77");
    expect(calls[0].url).toBe("http://gw:1/entities/ip%3A203.0.113.77/timeline");
  });

  it("builds the long-poll query from the cursor", async () => {
    const { calls, fetchFn } = recordingFetch(jsonResponse({ notifications: [], next: 7 }));
    const client = new GatewayClient("http://gw:1", "tok", fetchFn);
    const batch = await client.notifications(7, 25);

    expect(batch.next).toBe(7);
    expect(calls[0].url).toBe("http://gw:1/notifications?since=7&wait=25");
  });

  it("posts operator actions as json", async () => {
    const { calls, fetchFn } = recordingFetch(jsonResponse({ ok: true }));
    const client = new GatewayClient("http://gw:1", "tok", fetchFn);
    await client.act("ip:203.0.113.77", "dismiss");

    expect(calls[0].url).toBe("http://gw:1/entities/ip%3A203.0.113.77/actions");
    expect(calls[0].init.method).toBe("POST");
    expect(JSON.parse(String(calls[0].init.body))).toEqual({ action: "dismiss" });
  });

  it("posts raw event batches for replay", async () => {
    const { calls, fetchFn } = recordingFetch(jsonResponse({ accepted: 1 }));
    const client = new GatewayClient("http://gw:1", "tok", fetchFn);
    const events = [{ format: "syslog", line: "Aug  1 00:00:01 host sshd[1]: ..." }];
    await client.postEvents(events);

    expect(calls[0].url).toBe("http://gw:1/events");
    expect(JSON.parse(String(calls[0].init.body))).toEqual({ events });
  });

  it("unwraps the blocks envelope", async () => {
    const entry = {
      target: "203.0.113.77",
      reason: "preemption_operator",
      ttl_seconds: 3600,
      created_at: "2024-08-01T00:30:00+00:00",
      created_by: "operator-1",
      expires_at: "2024-08-01T01:30:00+00:00",
      seq: 1,
    };
    const { fetchFn } = recordingFetch(jsonResponse({ blocks: [entry] }));
    const client = new GatewayClient("http://gw:1", "tok", fetchFn);
    expect(await client.blocks()).toEqual([entry]);
  });
});
