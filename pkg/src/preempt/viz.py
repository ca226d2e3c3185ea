"""Connection-graph construction and export.

Nodes are IP endpoints truncated to their first two octets, so exported
documents never carry a full address.  Writers are hand-rolled rather
than delegated to a graph library: output must be byte-identical for
identical graphs, and the common library writers embed timestamps.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence
from xml.sax.saxutils import quoteattr

Flow = tuple[str, str]


class Role(Enum):
    SCANNER = "scanner"
    ATTACKER = "attacker"
    LEGIT = "legit"
    UNKNOWN = "unknown"


_DOTTED_QUAD = re.compile(r"^(\d{1,3})\.(\d{1,3})\.\d{1,3}\.\d{1,3}$")


def truncate_label(endpoint: str) -> str:
    """First two octets of an IPv4 address, trailing dot kept; anything
    already truncated (or not an address) passes through unchanged."""
    m = _DOTTED_QUAD.match(endpoint)
    if m:
        return f"{m.group(1)}.{m.group(2)}."
    return endpoint


@dataclass
class ConnGraph:
    nodes: dict[str, Role] = field(default_factory=dict)
    edges: Counter = field(default_factory=Counter)

    def add_node(self, endpoint: str, role: Role = Role.UNKNOWN) -> str:
        label = truncate_label(endpoint)
        if self.nodes.get(label, Role.UNKNOWN) is Role.UNKNOWN:
            self.nodes[label] = role
        return label

    def add_flow(self, src: str, dst: str, multiplicity: int = 1) -> None:
        a = self.add_node(src)
        b = self.add_node(dst)
        self.edges[(a, b)] += multiplicity

    def annotate(self, endpoint: str, role: Role) -> None:
        self.nodes[truncate_label(endpoint)] = role

    def role_of(self, endpoint: str) -> Role:
        return self.nodes.get(truncate_label(endpoint), Role.UNKNOWN)

    def node_count(self) -> int:
        return len(self.nodes)

    def edge_count(self) -> int:
        return len(self.edges)


def sample_top_flows(flows: Sequence[Flow], k: int, by: str) -> list[Flow]:
    """Keep the k most frequent distinct flows from source `by`; every
    other source's flows pass through untouched.  Ties break
    lexicographically so a rerun picks the same subset."""
    if k < 1:
        raise ValueError("k must be >= 1")
    counts = Counter(f for f in flows if f[0] == by)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = {flow for flow, _ in ranked[:k]}
    return [f for f in flows if f[0] != by or f in kept]


def build_graph(
    flows: Iterable[Flow],
    attackers: Iterable[str] = (),
    scanners: Iterable[str] = (),
    legit: Iterable[str] = (),
) -> ConnGraph:
    """Aggregate flows into a graph and paint node roles.

    Precedence when truncation merges endpoints: attacker beats scanner
    beats legit; unannotated endpoints stay unknown.
    """
    graph = ConnGraph()
    for src, dst in flows:
        graph.add_flow(src, dst)
    for endpoint in sorted(legit):
        graph.annotate(endpoint, Role.LEGIT)
    for endpoint in sorted(scanners):
        graph.annotate(endpoint, Role.SCANNER)
    for endpoint in sorted(attackers):
        graph.annotate(endpoint, Role.ATTACKER)
    return graph


def flows_from_records(records: Iterable) -> list[Flow]:
    """(orig, resp) pairs from records that carry connection endpoints."""
    out = []
    for record in records:
        extras = getattr(record, "extras", None) or {}
        orig, resp = extras.get("id.orig_h"), extras.get("id.resp_h")
        if orig and resp:
            out.append((orig, resp))
    return out


# --- DOT ----------------------------------------------------------------

def export_dot(graph: ConnGraph) -> str:
    touched = {end for edge in graph.edges for end in edge}
    lines = ["digraph {"]
    for label in sorted(graph.nodes):
        role = graph.nodes[label]
        if role is not Role.UNKNOWN:
            lines.append(f'    "{label}" [role="{role.value}"]')
        elif label not in touched:  # isolated nodes must survive round-trip
            lines.append(f'    "{label}"')
    for (src, dst) in sorted(graph.edges):
        weight = graph.edges[(src, dst)]
        suffix = f" [weight={weight}]" if weight != 1 else ""
        lines.append(f'    "{src}" -> "{dst}"{suffix}')
    lines.append("}")
    return "\n".join(lines) + "\n"


_DOT_EDGE = re.compile(
    r'^"?(?P<src>[^"\s]+)"?\s*->\s*"?(?P<dst>[^"\s]+)"?\s*(?:\[(?P<attrs>[^\]]*)\])?;?$'
)
_DOT_NODE = re.compile(r'^"?(?P<id>[^"\s]+)"?\s*(?:\[(?P<attrs>[^\]]*)\])?;?$')


def _parse_attrs(blob: Optional[str]) -> dict[str, str]:
    attrs: dict[str, str] = {}
    if not blob:
        return attrs
    for part in re.split(r"[,\s]+", blob.strip()):
        if "=" in part:
            key, value = part.split("=", 1)
            attrs[key.strip()] = value.strip().strip('"')
    return attrs


def parse_dot(text: str) -> ConnGraph:
    """Inverse of export_dot; also tolerant of hand-listed digraphs
    (bare labels, duplicate edge lines, ellipsis placeholders)."""
    graph = ConnGraph()
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line in ("{", "}", "...") or line.startswith(("digraph", "//", "#")):
            continue
        edge = _DOT_EDGE.match(line)
        if edge and "->" in line:
            attrs = _parse_attrs(edge.group("attrs"))
            graph.add_flow(edge.group("src"), edge.group("dst"), int(attrs.get("weight", 1)))
            continue
        node = _DOT_NODE.match(line)
        if node:
            attrs = _parse_attrs(node.group("attrs"))
            role = Role(attrs["role"]) if "role" in attrs else Role.UNKNOWN
            graph.add_node(node.group("id"), role)
            continue
        raise ValueError(f"unparseable dot line: {raw!r}")
    return graph


# --- GEXF ---------------------------------------------------------------

def export_gexf(graph: ConnGraph) -> str:
    """GEXF 1.2, directed, edge weight = multiplicity, role as a node
    attribute.  No timestamps: identical graphs export identical bytes."""
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<gexf xmlns="http://www.gexf.net/1.2draft" version="1.2">',
        '  <graph defaultedgetype="directed">',
        '    <attributes class="node">',
        '      <attribute id="0" title="role" type="string"/>',
        "    </attributes>",
        "    <nodes>",
    ]
    for label in sorted(graph.nodes):
        role = graph.nodes[label]
        ident = quoteattr(label)
        out.append(f"      <node id={ident} label={ident}>")
        out.append(f'        <attvalues><attvalue for="0" value="{role.value}"/></attvalues>')
        out.append("      </node>")
    out.append("    </nodes>")
    out.append("    <edges>")
    for i, (src, dst) in enumerate(sorted(graph.edges)):
        out.append(
            f"      <edge id=\"{i}\" source={quoteattr(src)} target={quoteattr(dst)}"
            f" weight=\"{graph.edges[(src, dst)]}\"/>"
        )
    out.append("    </edges>")
    out.append("  </graph>")
    out.append("</gexf>")
    return "\n".join(out) + "\n"


def export(graph: ConnGraph, format: str) -> str:
    if format == "dot":
        return export_dot(graph)
    if format == "gexf":
        return export_gexf(graph)
    raise ValueError(f"unknown export format {format!r}")
