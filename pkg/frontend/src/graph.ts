// Connection-graph view: parses the engine's DOT/GEXF exports and
// renders an interactive SVG node-link diagram with role colors,
// pan/zoom, and click-to-inspect.

export type Role = "scanner" | "attacker" | "legit" | "unknown";

export interface ParsedGraph {
  nodes: Map<string, Role>;
  edges: Map<string, { src: string; dst: string; weight: number }>;
}

export const MAX_RENDER_NODES = 5000;

const EDGE_RE = /^\s*"(?<src>[^"]+)"\s*->\s*"(?<dst>[^"]+)"\s*(?:\[(?<attrs>[^\]]*)\])?\s*;?\s*$/;
const NODE_RE = /^\s*"(?<id>[^"]+)"\s*(?:\[(?<attrs>[^\]]*)\])?\s*;?\s*$/;

function parseAttrs(text: string | undefined): Record<string, string> {
  const out: Record<string, string> = {};
  if (!text) return out;
  for (const match of text.matchAll(/(\w+)\s*=\s*(?:"([^"]*)"|(\w+))/g)) {
    out[match[1]] = match[2] ?? match[3];
  }
  return out;
}

function asRole(value: string | undefined): Role {
  return value === "scanner" || value === "attacker" || value === "legit" ? value : "unknown";
}

export function parseDot(text: string): ParsedGraph {
  const nodes = new Map<string, Role>();
  const edges = new Map<string, { src: string; dst: string; weight: number }>();
  for (const raw of text.split("\n")) {
    const line = raw.trim();
    if (!line || line.startsWith("digraph") || line === "{" || line === "}" || line.startsWith("//")) {
      continue;
    }
    const edge = EDGE_RE.exec(line);
    if (edge?.groups) {
      const { src, dst } = edge.groups;
      const attrs = parseAttrs(edge.groups.attrs);
      const weight = Number(attrs.weight ?? "1") || 1;
      edges.set(`${src}\u0000${dst}`, { src, dst, weight });
      if (!nodes.has(src)) nodes.set(src, "unknown");
      if (!nodes.has(dst)) nodes.set(dst, "unknown");
      continue;
    }
    const node = NODE_RE.exec(line);
    if (node?.groups) {
      const attrs = parseAttrs(node.groups.attrs);
      nodes.set(node.groups.id, asRole(attrs.role));
      continue;
    }
    throw new Error(`unparseable dot line: ${line}`);
  }
  return { nodes, edges };
}

export function parseGexf(text: string): ParsedGraph {
  const doc = new DOMParser().parseFromString(text, "application/xml");
  if (doc.querySelector("parsererror")) throw new Error("unparseable gexf document");
  const nodes = new Map<string, Role>();
  const edges = new Map<string, { src: string; dst: string; weight: number }>();
  for (const el of Array.from(doc.querySelectorAll("node"))) {
    const label = el.getAttribute("label") ?? el.getAttribute("id") ?? "";
    const roleAttr = el.querySelector('attvalue[for="0"]')?.getAttribute("value") ?? undefined;
    nodes.set(label, asRole(roleAttr));
  }
  for (const el of Array.from(doc.querySelectorAll("edge"))) {
    const src = el.getAttribute("source") ?? "";
    const dst = el.getAttribute("target") ?? "";
    const weight = Number(el.getAttribute("weight") ?? "1") || 1;
    edges.set(`${src}\u0000${dst}`, { src, dst, weight });
    if (!nodes.has(src)) nodes.set(src, "unknown");
    if (!nodes.has(dst)) nodes.set(dst, "unknown");
  }
  return { nodes, edges };
}

export function parseGraph(text: string): ParsedGraph {
  return text.trimStart().startsWith("<") ? parseGexf(text) : parseDot(text);
}

interface Placed {
  label: string;
  role: Role;
  x: number;
  y: number;
  degree: number;
}

/** Deterministic circular layout: labels sorted, spaced evenly.  Good
 * enough for the two-octet aggregated graphs this engine emits, which
 * stay small; no force simulation needed. */
function layout(graph: ParsedGraph, size: number): Map<string, Placed> {
  const degree = new Map<string, number>();
  for (const { src, dst, weight } of graph.edges.values()) {
    degree.set(src, (degree.get(src) ?? 0) + weight);
    degree.set(dst, (degree.get(dst) ?? 0) + weight);
  }
  let labels = [...graph.nodes.keys()].sort();
  if (labels.length > MAX_RENDER_NODES) {
    // beyond the render cap keep the busiest nodes; the CLI's top-k
    // sampling is the server-side answer for anything bigger
    labels = labels
      .sort((a, b) => (degree.get(b) ?? 0) - (degree.get(a) ?? 0) || (a < b ? -1 : 1))
      .slice(0, MAX_RENDER_NODES)
      .sort();
  }
  const placed = new Map<string, Placed>();
  const radius = size / 2 - 40;
  labels.forEach((label, i) => {
    const angle = (2 * Math.PI * i) / labels.length - Math.PI / 2;
    placed.set(label, {
      label,
      role: graph.nodes.get(label) ?? "unknown",
      x: size / 2 + radius * Math.cos(angle),
      y: size / 2 + radius * Math.sin(angle),
      degree: degree.get(label) ?? 0,
    });
  });
  return placed;
}

export class GraphView {
  readonly root: HTMLElement;
  private readonly svg: SVGSVGElement;
  private readonly inspector: HTMLElement;
  private readonly notice: HTMLElement;
  private view = { x: 0, y: 0, size: 600 };
  private dragFrom: { x: number; y: number } | null = null;

  constructor() {
    this.root = document.createElement("section");
    this.root.className = "graph-view";
    this.svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
    this.svg.setAttribute("class", "graph-canvas");
    this.svg.setAttribute("width", "600");
    this.svg.setAttribute("height", "600");
    this.inspector = document.createElement("div");
    this.inspector.className = "node-inspector";
    this.notice = document.createElement("div");
    this.notice.className = "graph-notice";
    this.root.append(this.notice, this.svg, this.inspector);
    this.applyViewBox();
    this.svg.addEventListener("wheel", (e) => this.onWheel(e));
    this.svg.addEventListener("mousedown", (e) => {
      this.dragFrom = { x: e.clientX, y: e.clientY };
    });
    this.svg.addEventListener("mousemove", (e) => this.onDrag(e));
    this.svg.addEventListener("mouseup", () => {
      this.dragFrom = null;
    });
  }

  render(text: string): void {
    const graph = parseGraph(text);
    const placed = layout(graph, 600);
    const skipped = graph.nodes.size - placed.size;
    this.notice.textContent = skipped > 0 ? `showing ${placed.size} of ${graph.nodes.size} nodes` : "";
    this.svg.replaceChildren();

    for (const { src, dst, weight } of graph.edges.values()) {
      const a = placed.get(src);
      const b = placed.get(dst);
      if (!a || !b) continue;
      const line = document.createElementNS("http://www.w3.org/2000/svg", "line");
      line.setAttribute("class", "graph-edge");
      line.setAttribute("x1", String(a.x));
      line.setAttribute("y1", String(a.y));
      line.setAttribute("x2", String(b.x));
      line.setAttribute("y2", String(b.y));
      line.setAttribute("stroke-width", String(Math.min(1 + Math.log2(weight), 6)));
      this.svg.append(line);
    }
    for (const node of placed.values()) {
      const group = document.createElementNS("http://www.w3.org/2000/svg", "g");
      group.setAttribute("class", `graph-node role-${node.role}`);
      const circle = document.createElementNS("http://www.w3.org/2000/svg", "circle");
      circle.setAttribute("cx", String(node.x));
      circle.setAttribute("cy", String(node.y));
      circle.setAttribute("r", String(Math.min(6 + Math.sqrt(node.degree), 18)));
      const text2 = document.createElementNS("http://www.w3.org/2000/svg", "text");
      text2.setAttribute("x", String(node.x));
      text2.setAttribute("y", String(node.y - 12));
      text2.textContent = node.label;
      group.append(circle, text2);
      group.addEventListener("click", () => this.inspect(node));
      this.svg.append(group);
    }
  }

  private inspect(node: Placed): void {
    this.inspector.replaceChildren();
    const title = document.createElement("strong");
    title.textContent = node.label;
    const detail = document.createElement("p");
    detail.textContent = `role: ${node.role}, weighted degree: ${node.degree}`;
    this.inspector.append(title, detail);
  }

  private applyViewBox(): void {
    this.svg.setAttribute(
      "viewBox",
      `${this.view.x} ${this.view.y} ${this.view.size} ${this.view.size}`,
    );
  }

  private onWheel(e: WheelEvent): void {
    e.preventDefault();
    const factor = e.deltaY > 0 ? 1.15 : 1 / 1.15;
    const next = Math.max(50, Math.min(5000, this.view.size * factor));
    // zoom about the center of the current view
    this.view.x += (this.view.size - next) / 2;
    this.view.y += (this.view.size - next) / 2;
    this.view.size = next;
    this.applyViewBox();
  }

  private onDrag(e: MouseEvent): void {
    if (!this.dragFrom) return;
    const scale = this.view.size / 600;
    this.view.x -= (e.clientX - this.dragFrom.x) * scale;
    this.view.y -= (e.clientY - this.dragFrom.y) * scale;
    this.dragFrom = { x: e.clientX, y: e.clientY };
    this.applyViewBox();
  }
}
