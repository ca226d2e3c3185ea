import type { GatewayClient } from "./api.js";
import type { Notification } from "./types.js";

const RETRY_MS = 2000;
const LONG_POLL_SECONDS = 25;

/** Live notification feed over the gateway's long-poll endpoint.
 *
 * The `since` cursor only ever advances, and card ids are tracked in a
 * set, so a reconnect that replays old entries cannot produce duplicate
 * cards.  Connection trouble flips a visible stale indicator and keeps
 * retrying; the cursor survives the outage.
 */
export class NotificationFeed {
  private cursor = 0;
  private seen = new Set<number>();
  private running = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  readonly root: HTMLElement;
  private readonly list: HTMLElement;
  private readonly staleBanner: HTMLElement;

  constructor(
    private readonly client: GatewayClient,
    private readonly onSelect: (entity: string) => void,
  ) {
    this.root = document.createElement("section");
    this.root.className = "notification-feed";
    this.staleBanner = document.createElement("div");
    this.staleBanner.className = "stale-indicator hidden";
    this.staleBanner.textContent = "connection lost, retrying";
    this.list = document.createElement("div");
    this.list.className = "notification-list";
    const heading = document.createElement("h2");
    heading.textContent = "Preemption notifications";
    this.root.append(heading, this.staleBanner, this.list);
    this.renderEmptyState();
  }

  get stale(): boolean {
    return !this.staleBanner.classList.contains("hidden");
  }

  cardCount(): number {
    return this.list.querySelectorAll(".notification-card").length;
  }

  /** One poll round; resolves when the response is applied. */
  async pollOnce(waitSeconds = 0): Promise<void> {
    try {
      const batch = await this.client.notifications(this.cursor, waitSeconds);
      this.cursor = Math.max(this.cursor, batch.next);
      for (const note of batch.notifications) this.addCard(note);
      this.staleBanner.classList.add("hidden");
    } catch (err) {
      this.staleBanner.classList.remove("hidden");
      throw err;
    }
  }

  start(): void {
    if (this.running) return;
    this.running = true;
    const loop = async () => {
      if (!this.running) return;
      let delay = 0;
      try {
        await this.pollOnce(LONG_POLL_SECONDS);
      } catch {
        delay = RETRY_MS;
      }
      if (this.running) this.timer = setTimeout(loop, delay);
    };
    void loop();
  }

  stop(): void {
    this.running = false;
    if (this.timer !== null) clearTimeout(this.timer);
  }

  private renderEmptyState(): void {
    const empty = document.createElement("p");
    empty.className = "empty-state";
    empty.textContent = "No preemption notifications yet.";
    this.list.replaceChildren(empty);
  }

  private addCard(note: Notification): void {
    if (this.seen.has(note.id)) return;
    this.seen.add(note.id);
    this.list.querySelector(".empty-state")?.remove();

    const card = document.createElement("article");
    card.className = "notification-card" + (note.too_late ? " too-late" : "");
    card.dataset.entity = note.entity;
    card.dataset.noteId = String(note.id);

    const title = document.createElement("h3");
    title.textContent = note.too_late
      ? `Critical activity on ${note.entity}`
      : `Preempt ${note.entity}`;
    const when = document.createElement("time");
    when.dateTime = note.timestamp;
    when.textContent = note.timestamp;
    const trail = document.createElement("ol");
    trail.className = "alert-trail";
    for (const alert of note.alerts) {
      const item = document.createElement("li");
      item.className = `severity-${alert.severity}`;
      item.textContent = `${alert.ts}  ${alert.symbol}`;
      trail.append(item);
    }
    card.append(title, when, trail);
    card.addEventListener("click", () => this.onSelect(note.entity));
    // newest first; server ids ascend with server timestamps
    this.list.prepend(card);
  }
}
