// Full-loop exercise: spawn the real gateway, replay the bundled
// ransomware scenario over HTTP, and drive the console components in
// jsdom exactly the way a browser session would.

import { type ChildProcess, spawn, spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import net from "node:net";
import os from "node:os";
import path from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { GatewayClient } from "../src/api.js";
import { NotificationFeed } from "../src/notifications.js";
import { renderTimeline } from "../src/timeline.js";

const TOKEN = "e2e-tok";
const ATTACKER = "ip:203.0.113.77";

const havePreempt = spawnSync("preempt", ["--help"], { stdio: "ignore" }).status === 0;

function run(args: string[]): void {
  const proc = spawnSync("preempt", args, { encoding: "utf-8" });
  if (proc.status !== 0) {
    throw new Error(`preempt ${args[0]} failed: ${proc.stderr || proc.stdout}`);
  }
}

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = net.createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const { port } = probe.address() as net.AddressInfo;
      probe.close(() => resolve(port));
    });
  });
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

describe.skipIf(!havePreempt)("console against a live gateway", () => {
  let workdir: string;
  let server: ChildProcess;
  let serverLog = "";
  let client: GatewayClient;

  beforeAll(async () => {
    workdir = mkdtempSync(path.join(os.tmpdir(), "preempt-console-"));
    const simDir = path.join(workdir, "sim");
    run(["sim", "--builtin", "demo", "--out", simDir]);
    run(["train", "--out", path.join(workdir, "model.txt")]);

    const scenario = JSON.parse(readFileSync(path.join(simDir, "scenario.json"), "utf-8")) as {
      start: string;
      topology: { internal_cidr: string };
    };
    const configPath = path.join(workdir, "server.json");
    writeFileSync(
      configPath,
      JSON.stringify({
        model: "model.txt",
        ingest: { base_date: scenario.start.slice(0, 10) },
        gateway: { tokens: { [TOKEN]: "operator-1" } },
        responder: { allowlist: [scenario.topology.internal_cidr] },
      }),
    );

    const port = await freePort();
    server = spawn("preempt", ["serve", "--config", configPath, "--port", String(port)], {
      stdio: ["ignore", "pipe", "pipe"],
    });
    server.stdout?.on("data", (chunk: Buffer) => (serverLog += chunk.toString()));
    server.stderr?.on("data", (chunk: Buffer) => (serverLog += chunk.toString()));

    client = new GatewayClient(`http://127.0.0.1:${port}`, TOKEN);
    const deadline = Date.now() + 30_000;
    for (;;) {
      try {
        await client.health();
        break;
      } catch {
        if (server.exitCode !== null || Date.now() > deadline) {
          throw new Error(`gateway did not come up:\n${serverLog}`);
        }
        await sleep(250);
      }
    }

    // replay the recorded wire traffic the way a tap would deliver it
    const events = readFileSync(path.join(simDir, "stream.jsonl"), "utf-8")
      .split("\n")
      .filter(Boolean)
      .map((line) => JSON.parse(line) as { format: string; line: string });
    for (let i = 0; i < events.length; i += 500) {
      await client.postEvents(events.slice(i, i + 500));
    }
  });

  afterAll(async () => {
    if (server && server.exitCode === null) {
      server.kill("SIGTERM");
      await new Promise((resolve) => {
        const hammer = setTimeout(() => {
          server.kill("SIGKILL");
          resolve(null);
        }, 5000);
        server.once("exit", () => {
          clearTimeout(hammer);
          resolve(null);
        });
      });
    }
    if (workdir) rmSync(workdir, { recursive: true, force: true });
  });

  it("shows a preemption card for the ransomware source", async () => {
    const feed = new NotificationFeed(client, () => {});
    await feed.pollOnce();

    expect(feed.cardCount()).toBeGreaterThanOrEqual(1);
    const card = feed.root.querySelector<HTMLElement>(`[data-entity="${ATTACKER}"]`);
    expect(card).not.toBeNull();
    expect(card?.classList.contains("too-late")).toBe(false);
    expect(card?.querySelector("h3")?.textContent).toBe(`Preempt ${ATTACKER}`);
    expect(card?.querySelectorAll(".alert-trail li").length).toBeGreaterThan(0);
  });

  it("renders the attacker timeline with a strip that ends malicious", async () => {
    const view = await client.timeline(ATTACKER);
    expect(view.status).toBe("preempted");

    const pane = renderTimeline(view, { onAction: () => {} });
    const cells = pane.querySelectorAll(".state-strip .state-cell");
    expect(cells).toHaveLength(view.alerts.length);
    expect(pane.querySelectorAll("tbody tr")).toHaveLength(view.alerts.length);
    expect(cells[cells.length - 1].classList.contains("state-malicious")).toBe(true);
    expect(pane.querySelector(".status-banner")?.classList.contains("status-preempted")).toBe(true);
  });

  it("adds the source address to the blocklist when the operator confirms", async () => {
    expect((await client.blocks()).map((b) => b.target)).not.toContain("203.0.113.77");

    const view = await client.timeline(ATTACKER);
    let pending: Promise<unknown> | null = null;
    const pane = renderTimeline(view, {
      onAction: (id, action) => {
        pending = client.act(id, action);
      },
    });
    pane.querySelector<HTMLButtonElement>("button.action-confirm_block")?.click();
    expect(pending).not.toBeNull();
    await pending;

    const blocks = await client.blocks();
    const entry = blocks.find((b) => b.target === "203.0.113.77");
    expect(entry).toBeDefined();
    expect(entry?.created_by).toBe("operator-1");
    expect(entry?.reason).toBe("preemption_operator");
  });
});
