import type { OperatorAction, TimelineView } from "./types.js";

const STATE_INDEX: Record<string, number> = { benign: 0, suspicious: 1, malicious: 2 };

/** Inline SVG sparkline of the malicious marginal across the chain. */
export function marginalSparkline(marginals: number[][], width = 240, height = 32): SVGSVGElement {
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("class", "marginal-sparkline");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));
  if (marginals.length === 0) return svg;
  const step = marginals.length > 1 ? width / (marginals.length - 1) : 0;
  const points = marginals
    .map((m, i) => {
      const p = m[2] ?? 0; // malicious component
      const x = marginals.length > 1 ? i * step : width / 2;
      const y = height - p * (height - 2) - 1;
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
  const line = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
  line.setAttribute("points", points);
  line.setAttribute("fill", "none");
  line.setAttribute("stroke", "currentColor");
  svg.append(line);
  return svg;
}

export interface TimelineCallbacks {
  onAction: (entity: string, action: OperatorAction) => void;
}

/** Render one entity's timeline: alert rows, MAP state strip, marginal
 * sparkline, status banner, and the action bar.  Everything is rebuilt
 * from the gateway document, nothing is cached. */
export function renderTimeline(view: TimelineView, callbacks: TimelineCallbacks): HTMLElement {
  const root = document.createElement("section");
  root.className = "timeline-view";
  root.dataset.entity = view.id;

  const banner = document.createElement("div");
  banner.className = `status-banner status-${view.status}`;
  let bannerText = `${view.id}: ${view.status}`;
  if (view.decision) bannerText += ` (${view.decision})`;
  if (view.escalated) bannerText += " [escalated]";
  banner.textContent = bannerText;
  root.append(banner);

  if (view.alerts.length === 0) {
    const placeholder = document.createElement("p");
    placeholder.className = "empty-state";
    placeholder.textContent = "No alerts recorded for this entity.";
    root.append(placeholder);
  } else {
    const strip = document.createElement("div");
    strip.className = "state-strip";
    view.map_states.forEach((state, i) => {
      const cell = document.createElement("span");
      cell.className = `state-cell state-${state}`;
      cell.title = `#${i} ${state}`;
      if (i === view.decided_at_index) cell.classList.add("decided-at");
      strip.append(cell);
    });
    root.append(strip, marginalSparkline(view.marginals));

    const table = document.createElement("table");
    table.className = "alert-table";
    const head = table.createTHead().insertRow();
    for (const column of ["#", "time", "symbol", "severity", "state"]) {
      const th = document.createElement("th");
      th.textContent = column;
      head.append(th);
    }
    const body = table.createTBody();
    view.alerts.forEach((alert, i) => {
      const row = body.insertRow();
      row.insertCell().textContent = String(i);
      row.insertCell().textContent = alert.ts;
      row.insertCell().textContent = alert.symbol;
      const badge = document.createElement("span");
      badge.className = `severity-badge severity-${alert.severity}`;
      badge.textContent = alert.severity;
      row.insertCell().append(badge);
      const state = view.map_states[i] ?? "";
      const cell = row.insertCell();
      cell.textContent = state;
      cell.className = `state-${state}`;
      if (STATE_INDEX[state] === undefined) cell.classList.add("state-unknown");
    });
    root.append(table);
  }

  // Entities that never left normal get only escalate; everything else
  // gets the full action bar.
  const actions: OperatorAction[] =
    view.status === "normal" ? ["escalate"] : ["confirm_block", "dismiss", "escalate"];
  const bar = document.createElement("div");
  bar.className = "action-bar";
  for (const action of actions) {
    const button = document.createElement("button");
    button.className = `action-${action}`;
    button.textContent = action.replace("_", " ");
    button.addEventListener("click", () => callbacks.onAction(view.id, action));
    bar.append(button);
  }
  root.append(bar);
  return root;
}
