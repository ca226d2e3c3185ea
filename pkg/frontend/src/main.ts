import { GatewayClient, NotFound, Unauthorized } from "./api.js";
import { GraphView } from "./graph.js";
import { NotificationFeed } from "./notifications.js";
import { renderTimeline } from "./timeline.js";
import type { EntitySummary, OperatorAction } from "./types.js";

const CONFIG_KEY = "preempt.console.config";
const ENTITY_REFRESH_MS = 5000;

interface ConsoleConfig {
  baseUrl: string;
  token: string;
}

function loadConfig(): ConsoleConfig | null {
  try {
    const raw = localStorage.getItem(CONFIG_KEY);
    return raw ? (JSON.parse(raw) as ConsoleConfig) : null;
  } catch {
    return null;
  }
}

/** Gateway URL + token prompt; shown at startup and again whenever the
 * gateway answers 401. */
export function renderLogin(container: HTMLElement, onSubmit: (c: ConsoleConfig) => void): void {
  const form = document.createElement("form");
  form.className = "login-form";
  form.innerHTML = `
    <h2>Connect to gateway</h2>
    <label>Gateway URL <input name="baseUrl" value="http://127.0.0.1:8420"></label>
    <label>Token <input name="token" type="password"></label>
    <button type="submit">Connect</button>
  `;
  form.addEventListener("submit", (e) => {
    e.preventDefault();
    const data = new FormData(form);
    const config = {
      baseUrl: String(data.get("baseUrl") ?? "").replace(/\/$/, ""),
      token: String(data.get("token") ?? ""),
    };
    localStorage.setItem(CONFIG_KEY, JSON.stringify(config));
    onSubmit(config);
  });
  container.replaceChildren(form);
}

export class ConsoleApp {
  private readonly client: GatewayClient;
  private readonly feed: NotificationFeed;
  private readonly graph = new GraphView();
  private selected: string | null = null;
  private entityTimer: ReturnType<typeof setInterval> | null = null;

  readonly root: HTMLElement;
  private readonly entityList: HTMLElement;
  private readonly timelinePane: HTMLElement;

  constructor(
    private readonly container: HTMLElement,
    config: ConsoleConfig,
  ) {
    this.client = new GatewayClient(config.baseUrl, config.token);
    this.feed = new NotificationFeed(this.client, (entity) => void this.select(entity));

    this.root = document.createElement("main");
    this.root.className = "console";
    this.entityList = document.createElement("nav");
    this.entityList.className = "entity-list";
    this.timelinePane = document.createElement("section");
    this.timelinePane.className = "timeline-pane";

    const graphPane = document.createElement("details");
    graphPane.className = "graph-pane";
    const summary = document.createElement("summary");
    summary.textContent = "Connection graph";
    const picker = document.createElement("input");
    picker.type = "file";
    picker.accept = ".dot,.gexf";
    picker.addEventListener("change", () => {
      const file = picker.files?.[0];
      if (!file) return;
      void file.text().then((text) => this.graph.render(text));
    });
    graphPane.append(summary, picker, this.graph.root);

    this.root.append(this.entityList, this.timelinePane, this.feed.root, graphPane);
    container.replaceChildren(this.root);
  }

  async start(): Promise<void> {
    this.feed.start();
    await this.refreshEntities();
    this.entityTimer = setInterval(() => void this.refreshEntities(), ENTITY_REFRESH_MS);
  }

  stop(): void {
    this.feed.stop();
    if (this.entityTimer !== null) clearInterval(this.entityTimer);
  }

  async refreshEntities(): Promise<void> {
    let entities: EntitySummary[];
    try {
      entities = await this.client.entities();
    } catch (err) {
      if (err instanceof Unauthorized) return this.relogin();
      return; // transient; the feed shows the stale indicator
    }
    const list = document.createElement("ul");
    for (const entity of entities) {
      const item = document.createElement("li");
      item.className = `entity-row status-${entity.status}` + (entity.escalated ? " escalated" : "");
      item.dataset.entity = entity.id;
      item.textContent = `${entity.id} (${entity.alert_count})`;
      item.addEventListener("click", () => void this.select(entity.id));
      list.append(item);
    }
    this.entityList.replaceChildren(list);
  }

  async select(entity: string): Promise<void> {
    this.selected = entity;
    await this.renderSelected();
  }

  private async renderSelected(): Promise<void> {
    if (!this.selected) return;
    try {
      const view = await this.client.timeline(this.selected);
      const pane = renderTimeline(view, {
        onAction: (id, action) => void this.runAction(id, action),
      });
      this.timelinePane.replaceChildren(pane);
    } catch (err) {
      if (err instanceof NotFound) {
        const banner = document.createElement("div");
        banner.className = "stale-entity-banner";
        banner.textContent = `${this.selected} is no longer known to the gateway`;
        this.timelinePane.replaceChildren(banner);
      } else if (err instanceof Unauthorized) {
        this.relogin();
      }
    }
  }

  private async runAction(entity: string, action: OperatorAction): Promise<void> {
    try {
      await this.client.act(entity, action);
    } catch (err) {
      if (err instanceof Unauthorized) return this.relogin();
      // 400s (e.g. confirm_block without a responder) surface inline
      const banner = document.createElement("div");
      banner.className = "action-error";
      banner.textContent = String(err instanceof Error ? err.message : err);
      this.timelinePane.prepend(banner);
      return;
    }
    await Promise.all([this.renderSelected(), this.refreshEntities()]);
  }

  private relogin(): void {
    this.stop();
    renderLogin(this.container, (config) => boot(this.container, config));
  }
}

function boot(container: HTMLElement, config: ConsoleConfig): void {
  const app = new ConsoleApp(container, config);
  void app.start();
}

export function mount(container: HTMLElement): void {
  const config = loadConfig();
  if (config) boot(container, config);
  else renderLogin(container, (c) => boot(container, c));
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  mount(document.getElementById("app") as HTMLElement);
}
